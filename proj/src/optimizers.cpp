#include "vsgdfd/optimizers.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "vsgdfd/text.hpp"

namespace vsgdfd {

namespace {

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void require_finite(const SampleGradients& g) {
  for (std::size_t j = 0; j < g.rows(); ++j) {
    const auto r = g.row(j);
    for (std::size_t i = 0; i < g.dim(); ++i) {
      if (!std::isfinite(r[i])) throw NonFiniteGradient(i, j);
    }
  }
}

void require_shape(const SampleGradients& g, std::size_t dim, const char* what) {
  if (g.rows() == 0) throw std::invalid_argument(std::string(what) + ": empty minibatch");
  if (g.dim() != dim) throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

// clamp(g^2 / v, 0, 1); v == 0 implies g == 0 up to rounding, so the ratio is 0.
double signal_fraction(double g, double v) { return v > 0.0 ? clamp01(g * g / v) : 0.0; }

double minibatch_ratio(double n, double g, double v, double eps) {
  return clamp01(n * g * g / (v + (n - 1.0) * g * g + eps));
}

bool outside_band(double x, double mean, double mean_sq) {
  return std::abs(x - mean) > 2.0 * std::sqrt(std::max(mean_sq - mean * mean, 0.0));
}

struct ColumnMoments {
  double g = 0, g2 = 0, h = 0, h2 = 0;
  std::size_t count = 0;
};

ColumnMoments column_moments(const SampleGradients& batch, const SampleGradients& curv, std::size_t i,
                             bool nonzero_only) {
  ColumnMoments m;
  for (std::size_t j = 0; j < batch.rows(); ++j) {
    const double g = batch(j, i);
    if (nonzero_only && g == 0.0) continue;
    const double h = curv(j, i);
    m.g += g;
    m.g2 += g * g;
    m.h += h;
    m.h2 += h * h;
    ++m.count;
  }
  if (m.count > 0) {
    const double k = static_cast<double>(m.count);
    m.g /= k;
    m.g2 /= k;
    m.h /= k;
    m.h2 /= k;
  }
  return m;
}

}  // namespace

bool VsgdFdState::finite() const {
  return all_finite(g_bar) && all_finite(v_bar) && all_finite(hfd_bar) && all_finite(vfd_bar) &&
         all_finite(tau);
}

bool VsgdState::finite() const {
  return all_finite(g_bar) && all_finite(v_bar) && all_finite(h_bar) && all_finite(tau);
}

NonFiniteGradient::NonFiniteGradient(std::size_t dimension, std::size_t sample)
    : std::runtime_error("non-finite gradient in dimension " + std::to_string(dimension) + " (sample " +
                         std::to_string(sample) + ")"),
      dimension_(dimension),
      sample_(sample) {}

VsgdFdState bootstrap_fd_state(const SampleGradients& grads, const SampleGradients& fd_curvatures,
                               double slack, double epsilon) {
  require_shape(fd_curvatures, grads.dim(), "bootstrap");
  if (fd_curvatures.rows() != grads.rows()) throw std::invalid_argument("bootstrap: row count mismatch");
  if (!(slack >= 1.0)) throw std::invalid_argument("bootstrap: slack must be >= 1");
  require_finite(grads);
  require_finite(fd_curvatures);

  VsgdFdState s;
  s.epsilon = epsilon;
  s.g_bar = average_gradient(grads);
  s.v_bar = mean_squared_gradient(grads);
  s.hfd_bar = average_gradient(fd_curvatures);
  s.vfd_bar = mean_squared_gradient(fd_curvatures);
  for (auto& v : s.v_bar) v *= slack;
  for (auto& v : s.vfd_bar) v *= slack;
  s.tau.assign(grads.dim(), static_cast<double>(grads.rows()));
  s.bootstrapped = true;
  return s;
}

VsgdFdState bootstrap(const ProblemSpec& problem, std::span<const double> theta0, std::size_t n0, Rng& rng,
                      double slack, double epsilon) {
  if (n0 == 0) throw std::invalid_argument("bootstrap: n0 must be positive");
  const std::size_t d = theta0.size();
  SampleGradients grads(n0, d);
  std::vector<Sample> samples;
  samples.reserve(n0);
  for (std::size_t j = 0; j < n0; ++j) {
    samples.push_back(draw_sample(problem, rng));
    sample_grad_into(problem, theta0, samples.back(), grads.row(j));
  }
  const auto probe = FdProbe::from_average(average_gradient(grads), epsilon);
  std::vector<double> shifted(theta0.begin(), theta0.end());
  for (std::size_t i = 0; i < d; ++i) shifted[i] += probe.delta[i];
  std::vector<double> scratch(d);
  SampleGradients fd(n0, d);
  for (std::size_t j = 0; j < n0; ++j) {
    fd_curvature_into(problem, shifted, probe, samples[j], grads.row(j), scratch, fd.row(j));
  }
  return bootstrap_fd_state(grads, fd, slack, epsilon);
}

StepDiagnostics vsgd_fd_step(VsgdFdState& state, std::vector<double>& theta, const SampleGradients& batch,
                             const SampleGradients& fd_batch, const VsgdFdOptions& options) {
  if (!state.bootstrapped) throw std::logic_error("vsgd_fd_step: state not bootstrapped");
  const std::size_t d = state.dim();
  if (theta.size() != d) throw std::invalid_argument("vsgd_fd_step: theta dimension mismatch");
  require_shape(batch, d, "vsgd_fd_step");
  require_shape(fd_batch, d, "vsgd_fd_step");
  if (fd_batch.rows() != batch.rows()) throw std::invalid_argument("vsgd_fd_step: row count mismatch");
  require_finite(batch);
  require_finite(fd_batch);

  const double n = static_cast<double>(batch.rows());
  const double eps = state.epsilon;
  StepDiagnostics diag;
  diag.eta.assign(d, 0.0);
  diag.tau.assign(d, 0.0);
  diag.noise_ratio.assign(d, 0.0);
  diag.outlier.assign(d, false);

  for (std::size_t i = 0; i < d; ++i) {
    double& g_bar = state.g_bar[i];
    double& v_bar = state.v_bar[i];
    double& h_bar = state.hfd_bar[i];
    double& vh_bar = state.vfd_bar[i];
    double& tau = state.tau[i];

    const auto m = column_moments(batch, fd_batch, i, options.sparse_rates);
    if (m.count == 0) {
      diag.tau[i] = tau;
      continue;
    }
    const double mean_grad = options.sparse_rates ? m.g * static_cast<double>(m.count) / n : m.g;

    bool outlier = false;
    if (options.per_sample_outliers) {
      for (std::size_t j = 0; j < batch.rows() && !outlier; ++j) {
        if (options.sparse_rates && batch(j, i) == 0.0) continue;
        outlier = outside_band(batch(j, i), g_bar, v_bar) || outside_band(fd_batch(j, i), h_bar, vh_bar);
      }
    } else {
      outlier = outside_band(m.g, g_bar, v_bar) || outside_band(m.h, h_bar, vh_bar);
    }
    if (outlier) tau += 1.0;

    const double r = 1.0 / tau;
    g_bar = (1.0 - r) * g_bar + r * m.g;
    v_bar = (1.0 - r) * v_bar + r * m.g2;
    h_bar = (1.0 - r) * h_bar + r * m.h;
    vh_bar = (1.0 - r) * vh_bar + r * m.h2;

    const double k = static_cast<double>(m.count);
    const double ratio = minibatch_ratio(k, g_bar, v_bar, eps);
    double eta = h_bar / (vh_bar + eps) * ratio;
    if (options.sparse_rates) eta *= n / k;

    tau = (1.0 - signal_fraction(g_bar, v_bar)) * tau + 1.0;
    theta[i] -= eta * mean_grad;

    diag.eta[i] = eta;
    diag.tau[i] = tau;
    diag.noise_ratio[i] = ratio;
    diag.outlier[i] = outlier;
  }
  return diag;
}

VsgdState bootstrap_bbprop_state(const SampleGradients& grads, const SampleGradients& curvatures, double slack,
                                 double epsilon) {
  require_shape(curvatures, grads.dim(), "bootstrap");
  if (curvatures.rows() != grads.rows()) throw std::invalid_argument("bootstrap: row count mismatch");
  if (!(slack >= 1.0)) throw std::invalid_argument("bootstrap: slack must be >= 1");
  require_finite(grads);
  require_finite(curvatures);

  VsgdState s;
  s.epsilon = epsilon;
  s.g_bar = average_gradient(grads);
  s.v_bar = mean_squared_gradient(grads);
  s.h_bar = average_gradient(curvatures);
  for (auto& v : s.v_bar) v *= slack;
  s.tau.assign(grads.dim(), static_cast<double>(grads.rows()));
  s.bootstrapped = true;
  return s;
}

StepDiagnostics vsgd_bbprop_step(VsgdState& state, std::vector<double>& theta, const SampleGradients& batch,
                                 const SampleGradients& curvature_batch) {
  if (!state.bootstrapped) throw std::logic_error("vsgd_bbprop_step: state not bootstrapped");
  const std::size_t d = state.dim();
  if (theta.size() != d) throw std::invalid_argument("vsgd_bbprop_step: theta dimension mismatch");
  require_shape(batch, d, "vsgd_bbprop_step");
  require_shape(curvature_batch, d, "vsgd_bbprop_step");
  if (curvature_batch.rows() != batch.rows()) throw std::invalid_argument("vsgd_bbprop_step: row count mismatch");
  require_finite(batch);
  require_finite(curvature_batch);

  const double n = static_cast<double>(batch.rows());
  const double eps = state.epsilon;
  StepDiagnostics diag;
  diag.eta.resize(d);
  diag.tau.resize(d);
  diag.noise_ratio.resize(d);
  diag.outlier.assign(d, false);

  for (std::size_t i = 0; i < d; ++i) {
    const auto m = column_moments(batch, curvature_batch, i, false);
    const double r = 1.0 / state.tau[i];
    double& g_bar = state.g_bar[i];
    double& v_bar = state.v_bar[i];
    double& h_bar = state.h_bar[i];
    g_bar = (1.0 - r) * g_bar + r * m.g;
    v_bar = (1.0 - r) * v_bar + r * m.g2;
    h_bar = (1.0 - r) * h_bar + r * m.h;

    const double ratio = minibatch_ratio(n, g_bar, v_bar, eps);
    const double eta = ratio / (h_bar + eps);
    state.tau[i] = (1.0 - signal_fraction(g_bar, v_bar)) * state.tau[i] + 1.0;
    theta[i] -= eta * m.g;

    diag.eta[i] = eta;
    diag.tau[i] = state.tau[i];
    diag.noise_ratio[i] = ratio;
  }
  return diag;
}

void sgd_step(std::vector<double>& theta, const SampleGradients& batch, double eta0, double gamma,
              std::size_t t) {
  if (t == 0) throw std::invalid_argument("sgd_step: t counts from 1");
  require_shape(batch, theta.size(), "sgd_step");
  require_finite(batch);
  const double eta = eta0 * std::pow(static_cast<double>(t), -gamma);
  const auto g = average_gradient(batch);
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= eta * g[i];
}

void adagrad_step(AdaGradState& state, std::vector<double>& theta, const SampleGradients& batch, double eta0,
                  double epsilon) {
  require_shape(batch, theta.size(), "adagrad_step");
  require_finite(batch);
  if (state.accumulator.empty()) state.accumulator.assign(theta.size(), 0.0);
  const auto g = average_gradient(batch);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    state.accumulator[i] += g[i] * g[i];
    theta[i] -= eta0 * g[i] / (std::sqrt(state.accumulator[i]) + epsilon);
  }
}

void natural_grad_step(NaturalGradState& state, std::vector<double>& theta, const SampleGradients& batch,
                       double eta0, double epsilon) {
  require_shape(batch, theta.size(), "natural_grad_step");
  require_finite(batch);
  if (!(state.tau >= 1.0)) throw std::invalid_argument("natural_grad_step: tau must be >= 1");
  const auto g = average_gradient(batch);
  if (!state.initialized) {
    state.v_bar.resize(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) state.v_bar[i] = g[i] * g[i];
    state.initialized = true;
  } else {
    const double r = 1.0 / state.tau;
    for (std::size_t i = 0; i < theta.size(); ++i) state.v_bar[i] = (1.0 - r) * state.v_bar[i] + r * g[i] * g[i];
  }
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= eta0 * g[i] / (state.v_bar[i] + epsilon);
}

double optimal_sparse_rate(double n, double effective_n, double curvature, double mean_grad,
                           double mean_sq_grad) {
  if (effective_n <= 0.0) return 0.0;
  const double k = effective_n;
  const double g2 = mean_grad * mean_grad;
  const double denom = mean_sq_grad / k + (k - 1.0) / k * g2;
  if (!(denom > 0.0) || !(curvature > 0.0)) return 0.0;
  return n / k / curvature * g2 / denom;
}

std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Sgd: return "sgd";
    case Algorithm::AdaGrad: return "adagrad";
    case Algorithm::NaturalGrad: return "natural";
    case Algorithm::VsgdBbprop: return "vsgd";
    case Algorithm::VsgdFd: return "vsgd-fd";
  }
  return "?";
}

Algorithm parse_algorithm(std::string_view name) {
  for (auto a : {Algorithm::Sgd, Algorithm::AdaGrad, Algorithm::NaturalGrad, Algorithm::VsgdBbprop,
                 Algorithm::VsgdFd}) {
    if (to_string(a) == name) return a;
  }
  throw std::invalid_argument("unknown algorithm '" + std::string(name) + "'");
}

void OptimizerConfig::validate() const {
  if (minibatch_n == 0) throw std::invalid_argument("minibatch_n must be positive");
  if (bootstrap_count == 0) throw std::invalid_argument("bootstrap_count must be positive");
  if (curvature_stride == 0) throw std::invalid_argument("curvature_stride must be positive");
  if (!(bootstrap_slack >= 1.0)) throw std::invalid_argument("bootstrap_slack must be >= 1");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (!is_adaptive()) {
    if (!(eta0 > 0.0) || !std::isfinite(eta0)) throw std::invalid_argument("eta0 must be positive");
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("gamma must be non-negative");
  }
  if (algorithm == Algorithm::NaturalGrad && !(natural_grad_tau >= 1.0)) {
    throw std::invalid_argument("natural_grad_tau must be >= 1");
  }
}

std::string OptimizerConfig::label() const {
  std::string s(to_string(algorithm));
  if (!is_adaptive()) s += "-eta" + text::format_double(eta0);
  if (algorithm == Algorithm::Sgd) s += "-g" + text::format_double(gamma);
  s += "-n" + std::to_string(minibatch_n);
  return s;
}

Optimizer::Optimizer(OptimizerConfig config, ProblemSpec problem)
    : config_(std::move(config)), problem_(std::move(problem)) {
  config_.validate();
  problem_.validate();
  const std::size_t d = problem_.dim;
  grads_ = SampleGradients(config_.minibatch_n, d);
  curvatures_ = SampleGradients(config_.minibatch_n, d);
  shifted_.resize(d);
  scratch_.resize(d);
  switch (config_.algorithm) {
    case Algorithm::Sgd: break;
    case Algorithm::AdaGrad: state_ = AdaGradState{}; break;
    case Algorithm::NaturalGrad: state_ = NaturalGradState{{}, config_.natural_grad_tau, false}; break;
    case Algorithm::VsgdBbprop: state_ = VsgdState{}; break;
    case Algorithm::VsgdFd: state_ = VsgdFdState{}; break;
  }
}

void Optimizer::initialize(std::span<const double> theta0, Rng& rng) {
  if (theta0.size() != problem_.dim) throw std::invalid_argument("initialize: theta dimension mismatch");
  iteration_ = 0;
  curvatures_valid_ = false;
  const std::size_t n0 = config_.bootstrap_count;
  if (auto* s = std::get_if<VsgdFdState>(&state_)) {
    *s = bootstrap(problem_, theta0, n0, rng, config_.bootstrap_slack, config_.epsilon);
  } else if (auto* b = std::get_if<VsgdState>(&state_)) {
    SampleGradients g(n0, problem_.dim);
    SampleGradients h(n0, problem_.dim);
    for (std::size_t j = 0; j < n0; ++j) {
      const auto sample = draw_sample(problem_, rng);
      sample_grad_into(problem_, theta0, sample, g.row(j));
      sample_curvature_bbprop_into(problem_, theta0, sample, h.row(j));
    }
    *b = bootstrap_bbprop_state(g, h, config_.bootstrap_slack, config_.epsilon);
  } else if (auto* a = std::get_if<AdaGradState>(&state_)) {
    a->accumulator.clear();
  } else if (auto* ng = std::get_if<NaturalGradState>(&state_)) {
    *ng = NaturalGradState{{}, config_.natural_grad_tau, false};
  }
}

void Optimizer::draw_batch(std::span<const double> theta, Rng& rng) {
  const std::size_t n = config_.minibatch_n;
  const std::size_t d = problem_.dim;
  if (const auto* s = std::get_if<VsgdFdState>(&state_)) {
    const bool refresh = !curvatures_valid_ || iteration_ % config_.curvature_stride == 0;
    FdProbe probe;
    if (refresh) {
      probe = FdProbe::from_average(s->g_bar, config_.epsilon);
      for (std::size_t i = 0; i < d; ++i) shifted_[i] = theta[i] + probe.delta[i];
    }
    for (std::size_t j = 0; j < n; ++j) {
      draw_sample_into(problem_, rng, sample_);
      sample_grad_into(problem_, theta, sample_, grads_.row(j));
      if (refresh) fd_curvature_into(problem_, shifted_, probe, sample_, grads_.row(j), scratch_, curvatures_.row(j));
    }
    curvatures_valid_ = true;
    return;
  }
  const bool bbprop = std::holds_alternative<VsgdState>(state_);
  for (std::size_t j = 0; j < n; ++j) {
    draw_sample_into(problem_, rng, sample_);
    sample_grad_into(problem_, theta, sample_, grads_.row(j));
    if (bbprop) sample_curvature_bbprop_into(problem_, theta, sample_, curvatures_.row(j));
  }
}

StepDiagnostics Optimizer::step(std::vector<double>& theta, Rng& rng) {
  if (theta.size() != problem_.dim) throw std::invalid_argument("step: theta dimension mismatch");
  draw_batch(theta, rng);
  ++iteration_;
  StepDiagnostics diag;
  switch (config_.algorithm) {
    case Algorithm::Sgd: {
      sgd_step(theta, grads_, config_.eta0, config_.gamma, iteration_);
      diag.eta.assign(theta.size(), config_.eta0 * std::pow(static_cast<double>(iteration_), -config_.gamma));
      break;
    }
    case Algorithm::AdaGrad: {
      auto& s = std::get<AdaGradState>(state_);
      adagrad_step(s, theta, grads_, config_.eta0, config_.epsilon);
      diag.eta.resize(theta.size());
      for (std::size_t i = 0; i < theta.size(); ++i) {
        diag.eta[i] = config_.eta0 / (std::sqrt(s.accumulator[i]) + config_.epsilon);
      }
      break;
    }
    case Algorithm::NaturalGrad: {
      auto& s = std::get<NaturalGradState>(state_);
      natural_grad_step(s, theta, grads_, config_.eta0, config_.epsilon);
      diag.eta.resize(theta.size());
      for (std::size_t i = 0; i < theta.size(); ++i) diag.eta[i] = config_.eta0 / (s.v_bar[i] + config_.epsilon);
      break;
    }
    case Algorithm::VsgdBbprop:
      diag = vsgd_bbprop_step(std::get<VsgdState>(state_), theta, grads_, curvatures_);
      break;
    case Algorithm::VsgdFd: {
      const VsgdFdOptions options{config_.per_sample_outliers, config_.sparse_rates};
      diag = vsgd_fd_step(std::get<VsgdFdState>(state_), theta, grads_, curvatures_, options);
      break;
    }
  }
  return diag;
}

std::size_t invariant_violations(const Optimizer& optimizer, const StepDiagnostics& diag) {
  if (!optimizer.config().is_adaptive()) return 0;
  std::size_t bad = 0;
  for (double t : diag.tau) bad += !(t >= 1.0) || !std::isfinite(t);
  for (double e : diag.eta) bad += !(e >= 0.0) || !std::isfinite(e);
  for (double r : diag.noise_ratio) bad += !(r >= 0.0 && r <= 1.0);
  const auto nonneg = [&bad](const std::vector<double>& v) {
    for (double x : v) bad += !(x >= 0.0);
  };
  if (const auto* s = optimizer.fd_state()) {
    bad += !s->finite();
    nonneg(s->v_bar);
    nonneg(s->hfd_bar);
    nonneg(s->vfd_bar);
  } else if (const auto* b = optimizer.bbprop_state()) {
    bad += !b->finite();
    nonneg(b->v_bar);
  }
  return bad;
}

void DiagnosticsLog::record(std::size_t iteration, const StepDiagnostics& diag, bool keep_row) {
  if (outlier_counts_.size() < diag.eta.size()) outlier_counts_.resize(diag.eta.size(), 0);
  for (std::size_t i = 0; i < diag.outlier.size(); ++i) outlier_counts_[i] += diag.outlier[i];
  if (!keep_row) return;
  for (std::size_t i = 0; i < diag.eta.size(); ++i) {
    const double tau = i < diag.tau.size() ? diag.tau[i] : 0.0;
    const double ratio = i < diag.noise_ratio.size() ? diag.noise_ratio[i] : 0.0;
    rows_.push_back({iteration, i, diag.eta[i], tau, ratio, outlier_counts_[i]});
  }
}

void DiagnosticsLog::write_csv(std::ostream& os) const {
  os << "iteration,dim,eta,tau,noise_ratio,outliers\n";
  for (const auto& r : rows_) {
    os << r.iteration << ',' << r.dim << ',' << text::format_double(r.eta) << ',' << text::format_double(r.tau)
       << ',' << text::format_double(r.noise_ratio) << ',' << r.outliers << '\n';
  }
}

}  // namespace vsgdfd
