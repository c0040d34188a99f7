#include "vsgdfd/gain.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

#include "vsgdfd/aggregation.hpp"
#include "vsgdfd/harness.hpp"
#include "vsgdfd/optimizers.hpp"
#include "vsgdfd/parallel.hpp"
#include "vsgdfd/text.hpp"

namespace vsgdfd {

namespace {

GainEstimate estimate(const std::vector<double>& gains) {
  const double reps = static_cast<double>(gains.size());
  double sum = 0.0;
  for (double g : gains) sum += g;
  const double mean = sum / reps;
  double ss = 0.0;
  for (double g : gains) ss += (g - mean) * (g - mean);
  const double sd = gains.size() > 1 ? std::sqrt(ss / (reps - 1.0)) : 0.0;
  return {mean, sd / std::sqrt(reps)};
}

// Common random numbers: every mode and rate replays the same draws for a
// given (n, rep), so dense instance and global modes coincide exactly.
std::uint64_t trajectory_seed(const GainConfig& c, std::size_t n, std::size_t rep) {
  return derive_seed(c.master_seed, 0, n, rep);
}

GainEstimate simulate(const GainConfig& c, GainMode mode, std::size_t n) {
  std::vector<double> gains(c.repetitions);
  parallel_for(c.repetitions, c.workers, [&](std::size_t rep) {
    Rng rng(trajectory_seed(c, n, rep));
    gains[rep] = gain_trajectory(c, mode, n, 0.0, rng);
  });
  return estimate(gains);
}

GainPoint simulate_envelope(const GainConfig& c, std::size_t n) {
  const auto rates = c.fixed_rates();
  std::vector<std::vector<double>> gains(rates.size(), std::vector<double>(c.repetitions));
  parallel_for(c.repetitions, c.workers, [&](std::size_t rep) {
    for (std::size_t r = 0; r < rates.size(); ++r) {
      Rng rng(trajectory_seed(c, n, rep));
      gains[r][rep] = gain_trajectory(c, GainMode::FixedEnvelope, n, rates[r], rng);
    }
  });
  GainPoint best;
  best.mode = GainMode::FixedEnvelope;
  best.n = n;
  for (std::size_t r = 0; r < rates.size(); ++r) {
    const auto e = estimate(gains[r]);
    if (r == 0 || e.mean < best.gain.mean) {
      best.gain = e;
      best.best_rate = rates[r];
    }
  }
  return best;
}

}  // namespace

std::string_view to_string(GainMode mode) {
  switch (mode) {
    case GainMode::Instance: return "instance";
    case GainMode::Global: return "global";
    case GainMode::FixedEnvelope: return "fixed";
  }
  return "?";
}

GainMode parse_gain_mode(std::string_view name) {
  for (auto m : {GainMode::Instance, GainMode::Global, GainMode::FixedEnvelope}) {
    if (to_string(m) == name) return m;
  }
  throw std::invalid_argument("unknown gain mode '" + std::string(name) + "'");
}

void GainConfig::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("sigma must be positive");
  if (!(p_nz > 0.0 && p_nz <= 1.0)) throw std::invalid_argument("p_nz must lie in (0, 1]");
  if (minibatch_sizes.empty()) throw std::invalid_argument("no minibatch sizes");
  for (auto n : minibatch_sizes) {
    if (n == 0) throw std::invalid_argument("minibatch sizes must be positive");
  }
  if (modes.empty()) throw std::invalid_argument("no gain modes");
  if (horizon == 0) throw std::invalid_argument("horizon must be positive");
  if (repetitions < 2) throw std::invalid_argument("repetitions must be at least 2");
  if (fixed_rate_count == 0) throw std::invalid_argument("fixed_rate_count must be positive");
  if (!(fixed_rate_min > 0.0 && fixed_rate_max >= fixed_rate_min)) {
    throw std::invalid_argument("fixed rate range must be positive and ordered");
  }
  if (!(curvature > 0.0)) throw std::invalid_argument("curvature must be positive");
  if (!(theta0 != 0.0) || !std::isfinite(theta0)) throw std::invalid_argument("theta0 must be finite and non-zero");
}

ProblemSpec GainConfig::problem() const {
  ProblemSpec p;
  p.kind = LossKind::SparseQuad;
  p.curvature = curvature;
  p.noise_var = sigma * sigma;
  p.sparsity_pnz = p_nz;
  p.dim = 1;
  return p;
}

std::vector<double> GainConfig::fixed_rates() const {
  std::vector<double> rates(fixed_rate_count);
  const double lo = std::log10(fixed_rate_min);
  const double hi = std::log10(fixed_rate_max);
  for (std::size_t r = 0; r < fixed_rate_count; ++r) {
    const double f = fixed_rate_count > 1 ? static_cast<double>(r) / static_cast<double>(fixed_rate_count - 1) : 0.0;
    rates[r] = std::pow(10.0, lo + f * (hi - lo));
  }
  return rates;
}

double gain_trajectory(const GainConfig& config, GainMode mode, std::size_t n, double fixed_rate, Rng& rng) {
  const auto problem = config.problem();
  const double a = config.curvature;
  const double h = 2.0 * a;
  const double var = config.sigma * config.sigma;
  const double nn = static_cast<double>(n);

  std::vector<double> theta{config.theta0};
  SampleGradients batch(n, 1);
  Sample sample;
  for (std::size_t t = 0; t < config.horizon; ++t) {
    for (std::size_t j = 0; j < n; ++j) {
      draw_sample_into(problem, rng, sample);
      sample_grad_into(problem, theta, sample, batch.row(j));
    }
    const auto stats = sparse_stats(batch);
    const double k = static_cast<double>(stats.effective_n[0]);
    if (k == 0.0) continue;
    const double mean_active = h * theta[0];
    const double mean_sq_active = h * h * (theta[0] * theta[0] + var);
    double eta = fixed_rate;
    if (mode == GainMode::Instance) eta = optimal_sparse_rate(nn, k, h, mean_active, mean_sq_active);
    if (mode == GainMode::Global) eta = optimal_sparse_rate(nn, nn * config.p_nz, h, mean_active, mean_sq_active);
    theta[0] -= eta * average_gradient(batch)[0];
  }
  const double ratio = (theta[0] * theta[0]) / (config.theta0 * config.theta0);
  return std::log10(ratio) / (nn * static_cast<double>(config.horizon));
}

const GainPoint& GainResult::find(GainMode mode, std::size_t n) const {
  for (const auto& p : points) {
    if (p.mode == mode && p.n == n) return p;
  }
  throw std::out_of_range("no gain point for " + std::string(to_string(mode)) + " n=" + std::to_string(n));
}

GainResult simulate_parallel_gain(const GainConfig& config) {
  config.validate();
  GainResult result;
  result.config = config;
  result.reference = simulate(config, GainMode::Instance, 1);
  const double ref = std::abs(result.reference.mean);
  if (!(ref > 0.0)) throw std::runtime_error("reference gain is zero");
  for (auto mode : config.modes) {
    for (auto n : config.minibatch_sizes) {
      GainPoint p;
      if (mode == GainMode::FixedEnvelope) {
        p = simulate_envelope(config, n);
      } else {
        p.mode = mode;
        p.n = n;
        p.gain = simulate(config, mode, n);
      }
      p.ratio = p.gain.mean / result.reference.mean;
      p.ratio_stderr = p.gain.std_error / ref;
      result.points.push_back(p);
    }
  }
  return result;
}

void write_gains_csv(std::ostream& os, const std::vector<GainResult>& results, bool header) {
  if (header) os << "mode,n,p_nz,sigma,ratio,stderr\n";
  for (const auto& r : results) {
    for (const auto& p : r.points) {
      os << to_string(p.mode) << ',' << p.n << ',' << text::format_double(r.config.p_nz) << ','
         << text::format_double(r.config.sigma) << ',' << text::format_double(p.ratio) << ','
         << text::format_double(p.ratio_stderr) << '\n';
    }
  }
}

}  // namespace vsgdfd
