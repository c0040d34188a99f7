#pragma once

#include <span>
#include <vector>

#include "vsgdfd/problems.hpp"

namespace vsgdfd {

inline constexpr double kDefaultEpsilon = 1e-5;

/// Step used to probe the gradient a second time. Every entry has magnitude
/// at least `epsilon`; use `from_average` to build one from the running
/// gradient average.
struct FdProbe {
  std::vector<double> delta;
  double epsilon = kDefaultEpsilon;

  /// delta_i = g_bar_i, floored to epsilon * sign(g_bar_i) (sign(0) = +1)
  /// when |g_bar_i| < epsilon.
  static FdProbe from_average(std::span<const double> g_bar, double epsilon = kDefaultEpsilon);
};

double floor_probe_step(double step, double epsilon);

/// |(grad(theta) - grad(theta + delta)) / delta| per coordinate, both gradients
/// taken on the same sample, with every coordinate shifted at once.
std::vector<double> fd_curvature(const ProblemSpec& problem, std::span<const double> theta,
                                 const FdProbe& probe, const Sample& s);

/// Allocation-free form used by the optimizer loop. The caller supplies the
/// gradient at theta (already needed for the update) and theta + delta.
void fd_curvature_into(const ProblemSpec& problem, std::span<const double> shifted_theta,
                       const FdProbe& probe, const Sample& s,
                       std::span<const double> grad_at_theta, std::span<double> scratch,
                       std::span<double> out);

}  // namespace vsgdfd
