#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace vsgdfd {

/// Per-sample gradients of one minibatch, stored row-major: row j is the
/// gradient of sample j, one column per parameter dimension.
class SampleGradients {
 public:
  SampleGradients() = default;
  SampleGradients(std::size_t rows, std::size_t dim) : rows_(rows), dim_(dim), values_(rows * dim) {}
  SampleGradients(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t dim() const { return dim_; }

  std::span<double> row(std::size_t j) { return {values_.data() + j * dim_, dim_}; }
  std::span<const double> row(std::size_t j) const { return {values_.data() + j * dim_, dim_}; }

  double& operator()(std::size_t j, std::size_t i) { return values_[j * dim_ + i]; }
  double operator()(std::size_t j, std::size_t i) const { return values_[j * dim_ + i]; }

  std::span<const double> values() const { return values_; }

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> values_;
};

struct SparseStats {
  /// Number of exactly-zero entries per column.
  std::vector<std::size_t> zero_counts;
  /// rows - zero_counts, per column.
  std::vector<std::size_t> effective_n;
};

/// Column-wise mean. Throws std::invalid_argument on an empty batch.
std::vector<double> average_gradient(const SampleGradients& g);

/// Column-wise mean of the squared entries.
std::vector<double> mean_squared_gradient(const SampleGradients& g);

/// Counts entries that compare equal to 0.0; no tolerance.
SparseStats sparse_stats(const SampleGradients& g);

/// Weight of each sample in the orthogonality-reweighted direction:
/// w_i = 1 / sum_j |cos(g_i, g_j)|, where the j = i term is 1. Zero-norm rows
/// get weight 0 and are left out of every other row's sum.
std::vector<double> orthogonal_weights(const SampleGradients& g);

/// sum_i w_i g_i with the weights from `orthogonal_weights`. O(n^2 d).
std::vector<double> reweight_orthogonal(const SampleGradients& g);

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
/// Cosine similarity; 0 when either vector has zero norm.
double cosine(std::span<const double> a, std::span<const double> b);

}  // namespace vsgdfd
