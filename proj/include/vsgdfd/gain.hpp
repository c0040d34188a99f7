#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "vsgdfd/problems.hpp"

namespace vsgdfd {

/// How the step size of the sparse noisy quadratic is chosen.
///  Instance: optimal rate for the realized non-zero count of each batch.
///  Global: same formula with the expected count n * p_nz.
///  FixedEnvelope: best of a log-spaced set of constant rates.
enum class GainMode { Instance, Global, FixedEnvelope };

std::string_view to_string(GainMode mode);
/// Accepts instance, global, fixed.
GainMode parse_gain_mode(std::string_view name);

struct GainConfig {
  /// Standard deviation of the sample optima.
  double sigma = 0.1;
  double p_nz = 1.0;
  std::vector<std::size_t> minibatch_sizes{1, 2, 5, 10, 20, 50, 100, 200, 500, 1000};
  std::vector<GainMode> modes{GainMode::Instance, GainMode::Global, GainMode::FixedEnvelope};
  /// Updates per trajectory, the same for every n.
  std::size_t horizon = 10;
  std::size_t repetitions = 1000;
  std::size_t fixed_rate_count = 40;
  double fixed_rate_min = 0.01;
  double fixed_rate_max = 100.0;
  /// Loss scale A; 0.5 gives unit curvature.
  double curvature = 0.5;
  double theta0 = 1.0;
  std::uint64_t master_seed = 0;
  std::size_t workers = 0;

  void validate() const;
  /// One-dimensional SparseQuad problem with optimum 0.
  ProblemSpec problem() const;
  std::vector<double> fixed_rates() const;
};

/// Mean and standard error of log10(L_T / L_0) / (n T) over trajectories,
/// with L the excess loss A theta^2.
struct GainEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// One trajectory; returns its gain. `fixed_rate` is used only in
/// FixedEnvelope mode. A batch without any non-zero gradient leaves theta
/// unchanged but still counts as an update.
double gain_trajectory(const GainConfig& config, GainMode mode, std::size_t n, double fixed_rate, Rng& rng);

struct GainPoint {
  GainMode mode = GainMode::Instance;
  std::size_t n = 1;
  GainEstimate gain;
  /// gain / reference gain, and its standard error with the reference held fixed.
  double ratio = 0.0;
  double ratio_stderr = 0.0;
  /// Winning constant rate (FixedEnvelope only).
  double best_rate = 0.0;
};

struct GainResult {
  GainConfig config;
  /// Instance mode at n = 1.
  GainEstimate reference;
  std::vector<GainPoint> points;

  const GainPoint& find(GainMode mode, std::size_t n) const;
};

/// Every mode and minibatch size of `config`, each normalized by the
/// single-sample instance-mode gain. Deterministic for a given master seed.
GainResult simulate_parallel_gain(const GainConfig& config);

/// Columns: mode,n,p_nz,sigma,ratio,stderr.
void write_gains_csv(std::ostream& os, const std::vector<GainResult>& results, bool header = true);

}  // namespace vsgdfd
