#include "vsgdfd/curvature.hpp"

#include <cmath>
#include <stdexcept>

namespace vsgdfd {

double floor_probe_step(double step, double epsilon) {
  if (std::abs(step) >= epsilon) return step;
  return step < 0.0 ? -epsilon : epsilon;
}

FdProbe FdProbe::from_average(std::span<const double> g_bar, double epsilon) {
  FdProbe probe;
  probe.epsilon = epsilon;
  probe.delta.reserve(g_bar.size());
  for (double g : g_bar) probe.delta.push_back(floor_probe_step(g, epsilon));
  return probe;
}

void fd_curvature_into(const ProblemSpec& problem, std::span<const double> shifted_theta,
                       const FdProbe& probe, const Sample& s,
                       std::span<const double> grad_at_theta, std::span<double> scratch,
                       std::span<double> out) {
  sample_grad_into(problem, shifted_theta, s, scratch);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::abs((grad_at_theta[i] - scratch[i]) / probe.delta[i]);
  }
}

std::vector<double> fd_curvature(const ProblemSpec& problem, std::span<const double> theta,
                                 const FdProbe& probe, const Sample& s) {
  if (probe.delta.size() != theta.size()) {
    throw std::invalid_argument("fd_curvature: probe and theta differ in length");
  }
  for (double d : probe.delta) {
    if (!(std::abs(d) >= probe.epsilon)) {
      throw std::invalid_argument("fd_curvature: probe step below the epsilon floor");
    }
  }
  const auto g0 = sample_grad(problem, theta, s);
  std::vector<double> shifted(theta.begin(), theta.end());
  for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] += probe.delta[i];
  std::vector<double> scratch(theta.size());
  std::vector<double> h(theta.size());
  fd_curvature_into(problem, shifted, probe, s, g0, scratch, h);
  return h;
}

}  // namespace vsgdfd
