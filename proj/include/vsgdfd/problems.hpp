#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vsgdfd {

using Rng = std::mt19937_64;

/// Shape of the per-sample loss.
///
/// Quad, Abs, RectLin and Gauss are the four elementary families of the
/// benchmark grid. SparseQuad is a quadratic whose coordinates participate in
/// a sample only with probability `sparsity_pnz`. TwoCluster is a linear
/// gradient generator whose samples come from one of two noisy clusters.
enum class LossKind { Quad, Abs, RectLin, Gauss, SparseQuad, TwoCluster };

std::string_view to_string(LossKind kind);
/// Accepts the names produced by `to_string` (case-insensitive).
LossKind parse_loss_kind(std::string_view name);

struct TwoClusterParams {
  std::vector<double> mean1;
  std::vector<double> mean2;
  double noise_var1 = 0.01;
  double noise_var2 = 0.01;
  /// Probability that a sample belongs to the first cluster.
  double prob1 = 0.8;

  bool operator==(const TwoClusterParams&) const = default;
};

/// A stochastic loss family: `curvature` is the loss scale A, `noise_var` the
/// variance of the sample offsets, `optimum` the minimizer of the expected
/// loss.
struct ProblemSpec {
  LossKind kind = LossKind::Quad;
  double curvature = 1.0;
  double noise_var = 1.0;
  std::size_t dim = 1;
  double sparsity_pnz = 1.0;
  std::vector<double> optimum;  // empty means all zeros
  std::optional<TwoClusterParams> clusters;

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;

  double optimum_at(std::size_t i) const { return optimum.empty() ? 0.0 : optimum[i]; }

  bool operator==(const ProblemSpec&) const = default;
};

/// Clusters used by the reweighting demo: orthogonal unit means, 0.8/0.2
/// mixture, noise variance 0.01 per coordinate.
ProblemSpec default_two_cluster_problem();

struct Sample {
  std::vector<double> offsets;
  std::vector<bool> active;
  int cluster = 0;
};

/// Random draws, in order: the cluster (TwoCluster only), one standard normal
/// per coordinate, then one participation flag per coordinate (SparseQuad only).
Sample draw_sample(const ProblemSpec& spec, Rng& rng);
/// Same draws as `draw_sample`, reusing the buffers of `s`.
void draw_sample_into(const ProblemSpec& spec, Rng& rng, Sample& s);

double sample_loss(const ProblemSpec& spec, std::span<const double> theta, const Sample& s);

std::vector<double> sample_grad(const ProblemSpec& spec, std::span<const double> theta, const Sample& s);

/// Writes the gradient into `out` (length dim) without allocating.
void sample_grad_into(const ProblemSpec& spec, std::span<const double> theta, const Sample& s,
                      std::span<double> out);

/// Non-negative Gauss-Newton diagonal curvature of one sample loss. Exactly
/// zero for the piecewise-linear families.
std::vector<double> sample_curvature_bbprop(const ProblemSpec& spec, std::span<const double> theta,
                                            const Sample& s);

void sample_curvature_bbprop_into(const ProblemSpec& spec, std::span<const double> theta,
                                  const Sample& s, std::span<double> out);

/// Closed-form expectation of `sample_loss` over the sample distribution.
double expected_loss(const ProblemSpec& spec, std::span<const double> theta);

/// key=value text, one pair per line. Lists are comma separated.
std::string to_config(const ProblemSpec& spec);
ProblemSpec parse_problem_config(std::string_view text);

}  // namespace vsgdfd
