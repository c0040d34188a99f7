#include "vsgdfd/harness.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <stdexcept>

#include "vsgdfd/aggregation.hpp"
#include "vsgdfd/parallel.hpp"
#include "vsgdfd/text.hpp"

namespace vsgdfd {

std::string TestCase::id() const {
  return std::string(to_string(kind)) + "-A" + text::format_double(curvature) + "-v" +
         text::format_double(noise_var);
}

ProblemSpec TestCase::problem() const {
  ProblemSpec p;
  p.kind = kind;
  p.curvature = curvature;
  p.noise_var = noise_var;
  p.dim = 1;
  return p;
}

std::vector<OptimizerConfig> default_algorithm_rows(const std::vector<std::size_t>& minibatch_sizes) {
  constexpr double kRates[] = {0.01, 0.1, 1.0, 10.0};
  std::vector<OptimizerConfig> rows;
  for (std::size_t n : minibatch_sizes) {
    OptimizerConfig base;
    base.minibatch_n = n;
    for (double gamma : {0.0, 1.0}) {
      for (double eta0 : kRates) {
        auto c = base;
        c.algorithm = Algorithm::Sgd;
        c.eta0 = eta0;
        c.gamma = gamma;
        rows.push_back(c);
      }
    }
    for (auto algo : {Algorithm::AdaGrad, Algorithm::NaturalGrad}) {
      for (double eta0 : kRates) {
        auto c = base;
        c.algorithm = algo;
        c.eta0 = eta0;
        rows.push_back(c);
      }
    }
    for (auto algo : {Algorithm::VsgdBbprop, Algorithm::VsgdFd}) {
      auto c = base;
      c.algorithm = algo;
      rows.push_back(c);
    }
  }
  return rows;
}

std::vector<TestCase> ExperimentGrid::cases() const {
  std::vector<TestCase> out;
  for (auto kind : functions) {
    for (double a : curvatures) {
      for (double v : noise_vars) out.push_back({kind, a, v});
    }
  }
  return out;
}

void ExperimentGrid::validate() const {
  if (functions.empty()) throw std::invalid_argument("grid: no functions");
  if (curvatures.empty()) throw std::invalid_argument("grid: no curvatures");
  if (noise_vars.empty()) throw std::invalid_argument("grid: no noise variances");
  if (algorithms.empty()) throw std::invalid_argument("grid: no algorithms");
  if (trials == 0) throw std::invalid_argument("grid: trials must be positive");
  if (updates == 0) throw std::invalid_argument("grid: updates must be positive");
  if (!std::isfinite(theta0)) throw std::invalid_argument("grid: theta0 must be finite");
  for (auto kind : functions) {
    if (kind == LossKind::SparseQuad || kind == LossKind::TwoCluster) {
      throw std::invalid_argument("grid: only quad, abs, rectlin and gauss are grid functions");
    }
  }
  for (const auto& c : cases()) c.problem().validate();
  for (const auto& a : algorithms) a.validate();
}

std::vector<std::size_t> checkpoint_iterations(std::size_t updates) {
  std::vector<std::size_t> out{0};
  for (std::size_t p = 1; p <= updates; p *= 2) out.push_back(p);
  if (out.back() != updates) out.push_back(updates);
  return out;
}

std::uint64_t derive_seed(std::uint64_t master_seed, std::size_t case_index, std::size_t row_index,
                          std::size_t trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(case_index), static_cast<std::uint32_t>(row_index),
                    static_cast<std::uint32_t>(trial)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

TrialRecord run_trial(const TestCase& test_case, const OptimizerConfig& config, double theta0,
                      std::size_t updates, std::uint64_t seed) {
  const auto problem = test_case.problem();
  const auto checkpoints = checkpoint_iterations(updates);
  TrialRecord rec;
  rec.seed = seed;
  rec.checkpoint_losses.reserve(checkpoints.size());

  Rng rng(seed);
  std::vector<double> theta{theta0};
  Optimizer opt(config, problem);
  rec.checkpoint_losses.push_back(expected_loss(problem, theta));

  const auto diverge = [&] {
    rec.diverged = true;
    rec.checkpoint_losses.resize(checkpoints.size(), kDivergedLoss);
  };

  try {
    opt.initialize(theta, rng);
  } catch (const NonFiniteGradient&) {
    diverge();
    return rec;
  }

  std::size_t next = 1;
  for (std::size_t t = 1; t <= updates; ++t) {
    StepDiagnostics diag;
    try {
      diag = opt.step(theta, rng);
    } catch (const NonFiniteGradient&) {
      diverge();
      return rec;
    }
    ++rec.steps;
    rec.invariant_violations += invariant_violations(opt, diag);
    if (!std::all_of(theta.begin(), theta.end(), [](double x) { return std::isfinite(x); })) {
      diverge();
      return rec;
    }
    if (t == checkpoints[next]) {
      const double loss = expected_loss(problem, theta);
      if (!std::isfinite(loss)) {
        diverge();
        return rec;
      }
      rec.checkpoint_losses.push_back(loss);
      ++next;
    }
  }
  return rec;
}

const TrialRecord& GridResult::at(std::size_t case_index, std::size_t row_index, std::size_t trial) const {
  const std::size_t rows = grid.algorithms.size();
  return records.at((case_index * rows + row_index) * grid.trials + trial);
}

std::vector<double> GridResult::final_losses(std::size_t case_index, std::size_t row_index) const {
  std::vector<double> out;
  out.reserve(grid.trials);
  for (std::size_t t = 0; t < grid.trials; ++t) out.push_back(at(case_index, row_index, t).final_loss());
  return out;
}

GridResult run_grid(const ExperimentGrid& grid) {
  grid.validate();
  GridResult result;
  result.grid = grid;
  result.cases = grid.cases();
  result.checkpoints = checkpoint_iterations(grid.updates);

  const std::size_t rows = grid.algorithms.size();
  const std::size_t total = result.cases.size() * rows * grid.trials;
  result.records.resize(total);

  parallel_for(total, grid.workers, [&](std::size_t k) {
    const std::size_t trial = k % grid.trials;
    const std::size_t row = (k / grid.trials) % rows;
    const std::size_t c = k / (grid.trials * rows);
    auto rec = run_trial(result.cases[c], grid.algorithms[row], grid.theta0, grid.updates,
                         derive_seed(grid.master_seed, c, row, trial));
    rec.case_index = c;
    rec.row_index = row;
    rec.trial = trial;
    result.records[k] = std::move(rec);
  });

  for (const auto& r : result.records) result.total_steps += r.steps;
  return result;
}

void write_trials_csv(std::ostream& os, const GridResult& result) {
  os << "case_id,algo_id,trial,checkpoint_iter,loss,diverged\n";
  std::vector<std::string> case_ids;
  for (const auto& c : result.cases) case_ids.push_back(c.id());
  std::vector<std::string> algo_ids;
  for (const auto& a : result.grid.algorithms) algo_ids.push_back(a.label());
  for (const auto& r : result.records) {
    for (std::size_t k = 0; k < r.checkpoint_losses.size(); ++k) {
      os << case_ids[r.case_index] << ',' << algo_ids[r.row_index] << ',' << r.trial << ','
         << result.checkpoints[k] << ',' << text::format_double(r.checkpoint_losses[k]) << ','
         << (r.diverged ? 1 : 0) << '\n';
    }
  }
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty set");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  if (values.size() % 2 == 1) return values[mid];
  const double hi = values[mid];
  const double lo = *std::max_element(values.begin(), values.begin() + mid);
  return lo + (hi - lo) / 2.0;
}

ReweightDemo demo_reweighting(const ProblemSpec& clusters, std::size_t n, Rng& rng) {
  if (clusters.kind != LossKind::TwoCluster) throw std::invalid_argument("reweighting demo needs a TwoCluster problem");
  clusters.validate();
  if (clusters.dim < 2) throw std::invalid_argument("reweighting demo needs dim >= 2");
  if (n == 0) throw std::invalid_argument("reweighting demo needs n >= 1");

  const std::size_t d = clusters.dim;
  const std::vector<double> origin(d, 0.0);
  SampleGradients grads(n, d);
  ReweightDemo demo;
  std::vector<double> cluster_sum[2] = {std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  for (std::size_t j = 0; j < n; ++j) {
    const auto s = draw_sample(clusters, rng);
    sample_grad_into(clusters, origin, s, grads.row(j));
    const auto c = static_cast<std::size_t>(s.cluster);
    ++demo.cluster_counts[c];
    for (std::size_t i = 0; i < d; ++i) cluster_sum[c][i] += grads(j, i);
  }
  demo.average = average_gradient(grads);
  demo.reweighted = reweight_orthogonal(grads);
  demo.oracle.assign(d, 0.0);
  for (std::size_t c = 0; c < 2; ++c) {
    if (demo.cluster_counts[c] == 0) continue;
    for (std::size_t i = 0; i < d; ++i) {
      demo.oracle[i] += cluster_sum[c][i] / static_cast<double>(demo.cluster_counts[c]);
    }
  }
  return demo;
}

void write_reweight_csv(std::ostream& os, const ReweightDemo& demo) {
  os << "vector,dim,value\n";
  const auto emit = [&os](const char* name, const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) os << name << ',' << i << ',' << text::format_double(v[i]) << '\n';
  };
  emit("average", demo.average);
  emit("reweighted", demo.reweighted);
  emit("oracle", demo.oracle);
}

}  // namespace vsgdfd
