#include "vsgdfd/problems.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "vsgdfd/text.hpp"

namespace vsgdfd {

namespace {

constexpr LossKind kAllKinds[] = {LossKind::Quad,    LossKind::Abs,        LossKind::RectLin,
                                  LossKind::Gauss,   LossKind::SparseQuad, LossKind::TwoCluster};

void check_dim(const ProblemSpec& spec, std::size_t n, const char* what) {
  if (n != spec.dim) {
    throw std::invalid_argument(std::string(what) + ": expected length " + std::to_string(spec.dim) +
                                ", got " + std::to_string(n));
  }
}

void check_sample(const ProblemSpec& spec, std::span<const double> theta, const Sample& s) {
  check_dim(spec, theta.size(), "theta");
  check_dim(spec, s.offsets.size(), "sample offsets");
  if (spec.kind == LossKind::SparseQuad) check_dim(spec, s.active.size(), "sample mask");
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

const std::vector<double>& cluster_mean(const ProblemSpec& spec, int cluster) {
  return cluster == 0 ? spec.clusters->mean1 : spec.clusters->mean2;
}

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double std_normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::Quad: return "quad";
    case LossKind::Abs: return "abs";
    case LossKind::RectLin: return "rectlin";
    case LossKind::Gauss: return "gauss";
    case LossKind::SparseQuad: return "sparsequad";
    case LossKind::TwoCluster: return "twocluster";
  }
  return "unknown";
}

LossKind parse_loss_kind(std::string_view name) {
  std::string lower(text::trim(name));
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (auto kind : kAllKinds) {
    if (to_string(kind) == lower) return kind;
  }
  throw std::invalid_argument("unknown loss kind '" + std::string(name) + "'");
}

void ProblemSpec::validate() const {
  if (!(curvature > 0.0) || !std::isfinite(curvature)) {
    throw std::invalid_argument("curvature must be positive and finite");
  }
  if (!(noise_var > 0.0) || !std::isfinite(noise_var)) {
    throw std::invalid_argument("noise_var must be positive and finite");
  }
  if (dim == 0) throw std::invalid_argument("dim must be at least 1");
  if (!(sparsity_pnz > 0.0 && sparsity_pnz <= 1.0)) {
    throw std::invalid_argument("sparsity_pnz must lie in (0, 1]");
  }
  if (!optimum.empty()) check_dim(*this, optimum.size(), "optimum");
  if (kind == LossKind::TwoCluster) {
    if (!clusters) throw std::invalid_argument("TwoCluster problem needs cluster parameters");
    check_dim(*this, clusters->mean1.size(), "cluster mean1");
    check_dim(*this, clusters->mean2.size(), "cluster mean2");
    if (clusters->noise_var1 < 0.0 || clusters->noise_var2 < 0.0) {
      throw std::invalid_argument("cluster noise variances must be non-negative");
    }
    if (!(clusters->prob1 >= 0.0 && clusters->prob1 <= 1.0)) {
      throw std::invalid_argument("cluster probability must lie in [0, 1]");
    }
  }
}

ProblemSpec default_two_cluster_problem() {
  ProblemSpec spec;
  spec.kind = LossKind::TwoCluster;
  spec.dim = 2;
  spec.clusters = TwoClusterParams{{1.0, 0.0}, {0.0, 1.0}, 0.01, 0.01, 0.8};
  return spec;
}

Sample draw_sample(const ProblemSpec& spec, Rng& rng) {
  Sample s;
  draw_sample_into(spec, rng, s);
  return s;
}

void draw_sample_into(const ProblemSpec& spec, Rng& rng, Sample& s) {
  s.offsets.resize(spec.dim);
  s.cluster = 0;
  double stddev = std::sqrt(spec.noise_var);
  if (spec.kind == LossKind::TwoCluster) {
    std::bernoulli_distribution first(spec.clusters->prob1);
    s.cluster = first(rng) ? 0 : 1;
    stddev = std::sqrt(s.cluster == 0 ? spec.clusters->noise_var1 : spec.clusters->noise_var2);
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& xi : s.offsets) xi = stddev * normal(rng);
  s.active.assign(spec.dim, true);
  if (spec.kind == LossKind::SparseQuad) {
    std::bernoulli_distribution participates(spec.sparsity_pnz);
    for (std::size_t i = 0; i < spec.dim; ++i) s.active[i] = participates(rng);
  }
}

double sample_loss(const ProblemSpec& spec, std::span<const double> theta, const Sample& s) {
  check_sample(spec, theta, s);
  const double a = spec.curvature;
  double total = 0.0;
  for (std::size_t i = 0; i < spec.dim; ++i) {
    const double u = theta[i] - spec.optimum_at(i) - s.offsets[i];
    switch (spec.kind) {
      case LossKind::Quad: total += a * u * u; break;
      case LossKind::Abs: total += a * std::abs(u); break;
      case LossKind::RectLin: total += u > 0.0 ? a * u : 0.0; break;
      case LossKind::Gauss: total += a - a * std::exp(-0.5 * u * u); break;
      case LossKind::SparseQuad: total += s.active[i] ? a * u * u : 0.0; break;
      case LossKind::TwoCluster:
        total += (cluster_mean(spec, s.cluster)[i] + s.offsets[i]) * theta[i];
        break;
    }
  }
  return total;
}

void sample_grad_into(const ProblemSpec& spec, std::span<const double> theta, const Sample& s,
                      std::span<double> out) {
  check_sample(spec, theta, s);
  check_dim(spec, out.size(), "gradient output");
  const double a = spec.curvature;
  for (std::size_t i = 0; i < spec.dim; ++i) {
    const double u = theta[i] - spec.optimum_at(i) - s.offsets[i];
    switch (spec.kind) {
      case LossKind::Quad: out[i] = 2.0 * a * u; break;
      case LossKind::Abs: out[i] = a * sign(u); break;
      case LossKind::RectLin: out[i] = u > 0.0 ? a : 0.0; break;
      case LossKind::Gauss: out[i] = a * u * std::exp(-0.5 * u * u); break;
      case LossKind::SparseQuad: out[i] = s.active[i] ? 2.0 * a * u : 0.0; break;
      case LossKind::TwoCluster: out[i] = cluster_mean(spec, s.cluster)[i] + s.offsets[i]; break;
    }
  }
}

std::vector<double> sample_grad(const ProblemSpec& spec, std::span<const double> theta, const Sample& s) {
  std::vector<double> g(spec.dim);
  sample_grad_into(spec, theta, s, g);
  return g;
}

void sample_curvature_bbprop_into(const ProblemSpec& spec, std::span<const double> theta,
                                  const Sample& s, std::span<double> out) {
  check_sample(spec, theta, s);
  check_dim(spec, out.size(), "curvature output");
  const double a = spec.curvature;
  for (std::size_t i = 0; i < spec.dim; ++i) {
    const double u = theta[i] - spec.optimum_at(i) - s.offsets[i];
    switch (spec.kind) {
      case LossKind::Quad: out[i] = 2.0 * a; break;
      case LossKind::Abs:
      case LossKind::RectLin:
      case LossKind::TwoCluster: out[i] = 0.0; break;
      case LossKind::Gauss: out[i] = std::max(a * (1.0 - u * u) * std::exp(-0.5 * u * u), 0.0); break;
      case LossKind::SparseQuad: out[i] = s.active[i] ? 2.0 * a : 0.0; break;
    }
  }
}

std::vector<double> sample_curvature_bbprop(const ProblemSpec& spec, std::span<const double> theta,
                                            const Sample& s) {
  std::vector<double> h(spec.dim);
  sample_curvature_bbprop_into(spec, theta, s, h);
  return h;
}

double expected_loss(const ProblemSpec& spec, std::span<const double> theta) {
  check_dim(spec, theta.size(), "theta");
  const double a = spec.curvature;
  const double var = spec.noise_var;
  const double sigma = std::sqrt(var);
  double total = 0.0;
  for (std::size_t i = 0; i < spec.dim; ++i) {
    const double t = theta[i] - spec.optimum_at(i);
    switch (spec.kind) {
      case LossKind::Quad: total += a * (t * t + var); break;
      case LossKind::Abs:
        // Mean of a folded normal.
        total += a * (sigma * std::sqrt(2.0 / std::numbers::pi) * std::exp(-t * t / (2.0 * var)) +
                      t * std::erf(t / (sigma * std::numbers::sqrt2)));
        break;
      case LossKind::RectLin:
        total += a * (t * std_normal_cdf(t / sigma) + sigma * std_normal_pdf(t / sigma));
        break;
      case LossKind::Gauss:
        total += a - a / std::sqrt(1.0 + var) * std::exp(-t * t / (2.0 * (1.0 + var)));
        break;
      case LossKind::SparseQuad: total += spec.sparsity_pnz * a * (t * t + var); break;
      case LossKind::TwoCluster: {
        const double q = spec.clusters->prob1;
        total += (q * spec.clusters->mean1[i] + (1.0 - q) * spec.clusters->mean2[i]) * theta[i];
        break;
      }
    }
  }
  return total;
}

std::string to_config(const ProblemSpec& spec) {
  std::ostringstream os;
  os << "kind=" << to_string(spec.kind) << '\n'
     << "curvature=" << text::format_double(spec.curvature) << '\n'
     << "noise_var=" << text::format_double(spec.noise_var) << '\n'
     << "dim=" << spec.dim << '\n'
     << "sparsity_pnz=" << text::format_double(spec.sparsity_pnz) << '\n';
  if (!spec.optimum.empty()) os << "optimum=" << text::join_doubles(spec.optimum) << '\n';
  if (spec.clusters) {
    os << "cluster_mean1=" << text::join_doubles(spec.clusters->mean1) << '\n'
       << "cluster_mean2=" << text::join_doubles(spec.clusters->mean2) << '\n'
       << "cluster_noise_var1=" << text::format_double(spec.clusters->noise_var1) << '\n'
       << "cluster_noise_var2=" << text::format_double(spec.clusters->noise_var2) << '\n'
       << "cluster_prob1=" << text::format_double(spec.clusters->prob1) << '\n';
  }
  return os.str();
}

ProblemSpec parse_problem_config(std::string_view config) {
  auto kv = text::parse_key_values(config);
  ProblemSpec spec;
  TwoClusterParams clusters;
  bool has_clusters = false;
  for (const auto& [key, value] : kv) {
    if (key == "kind") {
      spec.kind = parse_loss_kind(value);
    } else if (key == "curvature") {
      spec.curvature = text::parse_double(value, key);
    } else if (key == "noise_var") {
      spec.noise_var = text::parse_double(value, key);
    } else if (key == "dim") {
      spec.dim = static_cast<std::size_t>(text::parse_u64(value, key));
    } else if (key == "sparsity_pnz") {
      spec.sparsity_pnz = text::parse_double(value, key);
    } else if (key == "optimum") {
      spec.optimum = text::parse_double_list(value, key);
    } else if (key == "cluster_mean1") {
      clusters.mean1 = text::parse_double_list(value, key);
      has_clusters = true;
    } else if (key == "cluster_mean2") {
      clusters.mean2 = text::parse_double_list(value, key);
      has_clusters = true;
    } else if (key == "cluster_noise_var1") {
      clusters.noise_var1 = text::parse_double(value, key);
      has_clusters = true;
    } else if (key == "cluster_noise_var2") {
      clusters.noise_var2 = text::parse_double(value, key);
      has_clusters = true;
    } else if (key == "cluster_prob1") {
      clusters.prob1 = text::parse_double(value, key);
      has_clusters = true;
    } else {
      throw std::invalid_argument("unknown problem key '" + key + "'");
    }
  }
  if (has_clusters) spec.clusters = clusters;
  spec.validate();
  return spec;
}

}  // namespace vsgdfd
