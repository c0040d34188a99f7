#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "vsgdfd/optimizers.hpp"
#include "vsgdfd/problems.hpp"

namespace vsgdfd {

/// One cell of the benchmark: a one-dimensional loss family at a given
/// scale and noise level.
struct TestCase {
  LossKind kind = LossKind::Quad;
  double curvature = 1.0;
  double noise_var = 1.0;

  /// e.g. "quad-A0.1-v10"
  std::string id() const;
  ProblemSpec problem() const;
};

/// Baseline rows (each rate, SGD also each decay) followed by the two
/// adaptive variants, all repeated for every minibatch size.
std::vector<OptimizerConfig> default_algorithm_rows(const std::vector<std::size_t>& minibatch_sizes = {1, 10});

struct ExperimentGrid {
  std::vector<LossKind> functions{LossKind::Quad, LossKind::Abs, LossKind::RectLin, LossKind::Gauss};
  std::vector<double> curvatures{0.1, 1.0, 10.0};
  std::vector<double> noise_vars{0.1, 1.0, 10.0};
  std::vector<OptimizerConfig> algorithms = default_algorithm_rows();
  std::size_t trials = 100;
  std::size_t updates = 1024;
  double theta0 = 1.0;
  std::uint64_t master_seed = 0;
  /// 0 selects the hardware concurrency.
  std::size_t workers = 0;

  /// Function-major, then curvature, then noise variance.
  std::vector<TestCase> cases() const;
  void validate() const;
};

/// 0, 1, 2, 4, ... up to `updates`; `updates` itself is appended when it is
/// not a power of two.
std::vector<std::size_t> checkpoint_iterations(std::size_t updates);

std::uint64_t derive_seed(std::uint64_t master_seed, std::size_t case_index, std::size_t row_index,
                          std::size_t trial);

/// Loss recorded for every checkpoint after a trial diverges.
inline constexpr double kDivergedLoss = 1.7976931348623157e308;

struct TrialRecord {
  std::size_t case_index = 0;
  std::size_t row_index = 0;
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  /// Expected loss at each of `checkpoint_iterations(updates)`.
  std::vector<double> checkpoint_losses;
  bool diverged = false;
  std::size_t steps = 0;
  std::size_t invariant_violations = 0;

  double initial_loss() const { return checkpoint_losses.front(); }
  double final_loss() const { return checkpoint_losses.back(); }
};

/// Runs bootstrap plus `updates` steps from theta0 and records the expected
/// loss at the checkpoints. Divergence (non-finite parameter, loss or
/// gradient) freezes the remaining checkpoints at kDivergedLoss.
TrialRecord run_trial(const TestCase& test_case, const OptimizerConfig& config, double theta0,
                      std::size_t updates, std::uint64_t seed);

struct GridResult {
  ExperimentGrid grid;
  std::vector<TestCase> cases;
  std::vector<std::size_t> checkpoints;
  /// Ordered by (case, row, trial).
  std::vector<TrialRecord> records;
  std::size_t total_steps = 0;

  const TrialRecord& at(std::size_t case_index, std::size_t row_index, std::size_t trial) const;
  /// Final losses of every trial of one (case, row) cell.
  std::vector<double> final_losses(std::size_t case_index, std::size_t row_index) const;
};

/// Runs every (case, row, trial) on a worker pool. Records depend only on
/// the grid, never on the number of workers.
GridResult run_grid(const ExperimentGrid& grid);

/// Columns: case_id,algo_id,trial,checkpoint_iter,loss,diverged.
void write_trials_csv(std::ostream& os, const GridResult& result);

double median(std::vector<double> values);

struct ReweightDemo {
  std::vector<double> average;
  std::vector<double> reweighted;
  /// Sum of the per-cluster sample means over the clusters that were drawn.
  std::vector<double> oracle;
  std::size_t cluster_counts[2] = {0, 0};
};

/// Draws `n` gradients from a TwoCluster problem and aggregates them three
/// ways.
ReweightDemo demo_reweighting(const ProblemSpec& clusters, std::size_t n, Rng& rng);

/// Columns: vector,dim,value.
void write_reweight_csv(std::ostream& os, const ReweightDemo& demo);

}  // namespace vsgdfd
