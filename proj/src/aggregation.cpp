#include "vsgdfd/aggregation.hpp"

#include <cmath>
#include <stdexcept>

namespace vsgdfd {

SampleGradients::SampleGradients(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), dim_(rows.size() ? rows.begin()->size() : 0) {
  values_.reserve(rows_ * dim_);
  for (const auto& r : rows) {
    if (r.size() != dim_) throw std::invalid_argument("SampleGradients: ragged rows");
    values_.insert(values_.end(), r.begin(), r.end());
  }
}

namespace {

void require_rows(const SampleGradients& g) {
  if (g.rows() == 0) throw std::invalid_argument("empty minibatch");
}

}  // namespace

std::vector<double> average_gradient(const SampleGradients& g) {
  require_rows(g);
  std::vector<double> mean(g.dim(), 0.0);
  for (std::size_t j = 0; j < g.rows(); ++j) {
    const auto r = g.row(j);
    for (std::size_t i = 0; i < g.dim(); ++i) mean[i] += r[i];
  }
  for (auto& m : mean) m /= static_cast<double>(g.rows());
  return mean;
}

std::vector<double> mean_squared_gradient(const SampleGradients& g) {
  require_rows(g);
  std::vector<double> mean(g.dim(), 0.0);
  for (std::size_t j = 0; j < g.rows(); ++j) {
    const auto r = g.row(j);
    for (std::size_t i = 0; i < g.dim(); ++i) mean[i] += r[i] * r[i];
  }
  for (auto& m : mean) m /= static_cast<double>(g.rows());
  return mean;
}

SparseStats sparse_stats(const SampleGradients& g) {
  SparseStats stats;
  stats.zero_counts.assign(g.dim(), 0);
  for (std::size_t j = 0; j < g.rows(); ++j) {
    const auto r = g.row(j);
    for (std::size_t i = 0; i < g.dim(); ++i) {
      if (r[i] == 0.0) ++stats.zero_counts[i];
    }
  }
  stats.effective_n.resize(g.dim());
  for (std::size_t i = 0; i < g.dim(); ++i) stats.effective_n[i] = g.rows() - stats.zero_counts[i];
  return stats;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

std::vector<double> orthogonal_weights(const SampleGradients& g) {
  const std::size_t n = g.rows();
  std::vector<double> norms(n);
  for (std::size_t j = 0; j < n; ++j) norms[j] = norm(g.row(j));

  std::vector<double> weights(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (norms[i] == 0.0) continue;
    double interference = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || norms[j] == 0.0) continue;
      interference += std::abs(dot(g.row(i), g.row(j))) / (norms[i] * norms[j]);
    }
    weights[i] = 1.0 / interference;
  }
  return weights;
}

std::vector<double> reweight_orthogonal(const SampleGradients& g) {
  const auto weights = orthogonal_weights(g);
  std::vector<double> out(g.dim(), 0.0);
  for (std::size_t j = 0; j < g.rows(); ++j) {
    if (weights[j] == 0.0) continue;
    const auto r = g.row(j);
    for (std::size_t i = 0; i < g.dim(); ++i) out[i] += weights[j] * r[i];
  }
  return out;
}

}  // namespace vsgdfd
