#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "vsgdfd/aggregation.hpp"
#include "vsgdfd/curvature.hpp"
#include "vsgdfd/problems.hpp"

namespace vsgdfd {

/// Per-dimension statistics of the finite-difference variant. All vectors
/// have one entry per parameter dimension.
struct VsgdFdState {
  std::vector<double> g_bar;    ///< running mean of the minibatch-mean gradient
  std::vector<double> v_bar;    ///< running mean of the per-sample squared gradient
  std::vector<double> hfd_bar;  ///< running mean of the finite-difference curvature
  std::vector<double> vfd_bar;  ///< running mean of its square
  std::vector<double> tau;      ///< memory size of the running means, >= 1
  bool bootstrapped = false;
  double epsilon = kDefaultEpsilon;

  std::size_t dim() const { return g_bar.size(); }
  bool finite() const;
};

/// State of the bbprop-curvature baseline.
struct VsgdState {
  std::vector<double> g_bar;
  std::vector<double> v_bar;
  std::vector<double> h_bar;
  std::vector<double> tau;
  bool bootstrapped = false;
  double epsilon = kDefaultEpsilon;

  std::size_t dim() const { return g_bar.size(); }
  bool finite() const;
};

struct StepDiagnostics {
  std::vector<double> eta;
  /// Memory size after the step (adaptive variants only).
  std::vector<double> tau;
  /// Clamped minibatch noise ratio n g^2 / (v + (n-1) g^2) (adaptive variants only).
  std::vector<double> noise_ratio;
  std::vector<bool> outlier;
};

/// Raised before any state is touched when a gradient or curvature entry is
/// NaN or infinite.
class NonFiniteGradient : public std::runtime_error {
 public:
  NonFiniteGradient(std::size_t dimension, std::size_t sample);
  std::size_t dimension() const { return dimension_; }
  std::size_t sample() const { return sample_; }

 private:
  std::size_t dimension_;
  std::size_t sample_;
};

struct VsgdFdOptions {
  /// Test every sample against the two-standard-deviation band instead of
  /// the minibatch means; tau grows by one if any sample is flagged.
  bool per_sample_outliers = false;
  /// Average only over the non-zero entries of each column and scale the
  /// rate by the realized effective minibatch size.
  bool sparse_rates = false;
};

/// Initializes the running means from bootstrap gradients and the matching
/// finite-difference curvatures. `slack` multiplies both variance terms.
VsgdFdState bootstrap_fd_state(const SampleGradients& grads, const SampleGradients& fd_curvatures,
                               double slack = 1.0, double epsilon = kDefaultEpsilon);

/// Draws `n0` samples at `theta0` and bootstraps from them without moving
/// the parameters. The curvature probe is the floored gradient average.
VsgdFdState bootstrap(const ProblemSpec& problem, std::span<const double> theta0, std::size_t n0,
                      Rng& rng, double slack = 1.0, double epsilon = kDefaultEpsilon);

/// One iteration of the finite-difference variant, in place.
///
/// For every dimension: outlier test against the current means (tau + 1 on a
/// hit), moving-average updates with rate 1/tau, learning rate
///   eta = hfd_bar / (vfd_bar + eps) * clamp(n g^2 / (v + (n-1) g^2 + eps), 0, 1),
/// memory update tau = (1 - clamp(g^2 / (v + eps), 0, 1)) tau + 1, and finally
/// theta -= eta * (minibatch mean gradient).
///
/// `fd_batch` row j holds the finite-difference curvature of sample j.
/// Throws NonFiniteGradient, leaving state and theta unchanged.
StepDiagnostics vsgd_fd_step(VsgdFdState& state, std::vector<double>& theta, const SampleGradients& batch,
                             const SampleGradients& fd_batch, const VsgdFdOptions& options = {});

VsgdState bootstrap_bbprop_state(const SampleGradients& grads, const SampleGradients& curvatures,
                                 double slack = 1.0, double epsilon = kDefaultEpsilon);

/// Same as vsgd_fd_step but with bbprop curvature and without the outlier
/// test: eta = clamp(noise ratio) / (h_bar + eps).
StepDiagnostics vsgd_bbprop_step(VsgdState& state, std::vector<double>& theta, const SampleGradients& batch,
                                 const SampleGradients& curvature_batch);

/// theta -= eta0 * t^-gamma * mean gradient, with t counted from 1.
void sgd_step(std::vector<double>& theta, const SampleGradients& batch, double eta0, double gamma,
              std::size_t t);

struct AdaGradState {
  std::vector<double> accumulator;
};

void adagrad_step(AdaGradState& state, std::vector<double>& theta, const SampleGradients& batch,
                  double eta0, double epsilon = kDefaultEpsilon);

/// Element-wise empirical-Fisher preconditioning. The first call seeds the
/// running mean with the first squared minibatch gradient.
struct NaturalGradState {
  std::vector<double> v_bar;
  double tau = 100.0;
  bool initialized = false;
};

void natural_grad_step(NaturalGradState& state, std::vector<double>& theta, const SampleGradients& batch,
                       double eta0, double epsilon = kDefaultEpsilon);

/// Optimal rate for a sparse minibatch with `effective_n` non-zero entries
/// out of `n`, given the curvature and the first two moments of the non-zero
/// gradient entries. `effective_n` may be fractional (long-term average).
/// Returns 0 when `effective_n` is 0.
double optimal_sparse_rate(double n, double effective_n, double curvature, double mean_grad,
                           double mean_sq_grad);

enum class Algorithm { Sgd, AdaGrad, NaturalGrad, VsgdBbprop, VsgdFd };

std::string_view to_string(Algorithm a);
/// Accepts sgd, adagrad, natural, vsgd, vsgd-fd.
Algorithm parse_algorithm(std::string_view name);

struct OptimizerConfig {
  Algorithm algorithm = Algorithm::VsgdFd;
  double eta0 = 0.1;   // baselines only
  double gamma = 0.0;  // SGD only
  std::size_t minibatch_n = 1;
  std::size_t bootstrap_count = 10;
  double bootstrap_slack = 1.0;
  bool per_sample_outliers = false;
  bool sparse_rates = false;
  std::size_t curvature_stride = 1;
  double natural_grad_tau = 100.0;
  double epsilon = kDefaultEpsilon;

  void validate() const;
  /// Short identifier such as "sgd-eta0.1-g1-n10" or "vsgd-fd-n1".
  std::string label() const;
  bool is_adaptive() const { return algorithm == Algorithm::VsgdBbprop || algorithm == Algorithm::VsgdFd; }

  bool operator==(const OptimizerConfig&) const = default;
};

/// Drives any of the algorithms on a synthetic problem: draws the minibatch,
/// computes the gradients (and curvatures where needed) and applies the
/// matching step function.
class Optimizer {
 public:
  Optimizer(OptimizerConfig config, ProblemSpec problem);

  /// Bootstraps the adaptive variants at theta0; a no-op for the baselines.
  void initialize(std::span<const double> theta0, Rng& rng);

  StepDiagnostics step(std::vector<double>& theta, Rng& rng);

  const OptimizerConfig& config() const { return config_; }
  const ProblemSpec& problem() const { return problem_; }
  std::size_t iteration() const { return iteration_; }

  const VsgdFdState* fd_state() const { return std::get_if<VsgdFdState>(&state_); }
  const VsgdState* bbprop_state() const { return std::get_if<VsgdState>(&state_); }

 private:
  void draw_batch(std::span<const double> theta, Rng& rng);

  OptimizerConfig config_;
  ProblemSpec problem_;
  std::variant<std::monostate, AdaGradState, NaturalGradState, VsgdState, VsgdFdState> state_;
  std::size_t iteration_ = 0;

  SampleGradients grads_;
  SampleGradients curvatures_;
  std::vector<double> shifted_;
  std::vector<double> scratch_;
  Sample sample_;
  bool curvatures_valid_ = false;
};

/// Number of violated invariants after a step of an adaptive variant:
/// tau >= 1, eta finite and non-negative, noise ratio in [0, 1], finite
/// non-negative statistics. Always 0 for the baselines.
std::size_t invariant_violations(const Optimizer& optimizer, const StepDiagnostics& diag);

/// Collects eta, tau and the running outlier count per dimension for CSV export.
class DiagnosticsLog {
 public:
  /// Counts outliers of every step; a row is kept only when `keep_row` is set.
  void record(std::size_t iteration, const StepDiagnostics& diag, bool keep_row);
  /// Columns: iteration,dim,eta,tau,noise_ratio,outliers.
  void write_csv(std::ostream& os) const;
  std::size_t rows() const { return rows_.size(); }

 private:
  struct Row {
    std::size_t iteration;
    std::size_t dim;
    double eta;
    double tau;
    double noise_ratio;
    std::size_t outliers;
  };
  std::vector<std::size_t> outlier_counts_;
  std::vector<Row> rows_;
};

}  // namespace vsgdfd
