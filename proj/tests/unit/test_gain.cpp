#include <doctest.h>

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "vsgdfd/gain.hpp"

using namespace vsgdfd;

namespace {

GainConfig quick(double sigma) {
  GainConfig c;
  c.sigma = sigma;
  c.minibatch_sizes = {1, 2, 10, 100};
  c.repetitions = 1000;
  c.fixed_rate_count = 10;
  c.master_seed = 17;
  c.workers = 1;
  return c;
}

}  // namespace

TEST_CASE("modes and validation") {
  CHECK(parse_gain_mode("fixed") == GainMode::FixedEnvelope);
  CHECK(to_string(GainMode::Global) == "global");
  CHECK_THROWS_AS(parse_gain_mode("best"), std::invalid_argument);
  GainConfig c;
  CHECK_NOTHROW(c.validate());
  c.p_nz = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = GainConfig{};
  c.minibatch_sizes = {0};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = GainConfig{};
  c.repetitions = 1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("fixed rates are log spaced") {
  GainConfig c;
  const auto r = c.fixed_rates();
  CHECK(r.size() == 40);
  CHECK(r.front() == doctest::Approx(0.01));
  CHECK(r.back() == doctest::Approx(100.0));
  CHECK(r[1] / r[0] == doctest::Approx(r[39] / r[38]));
  CHECK(c.problem().noise_var == doctest::Approx(0.01));
  CHECK(c.problem().kind == LossKind::SparseQuad);
}

TEST_CASE("noise-free single sample jumps to the optimum") {
  GainConfig c = quick(1e-8);
  c.horizon = 1;
  Rng rng(1);
  // eta = 1/h exactly when the gradient carries no noise: theta lands within the noise scale of 0.
  const double g = gain_trajectory(c, GainMode::Instance, 1, 0.0, rng);
  CHECK(g < -10.0);
}

TEST_CASE("dense ratios") {
  for (double sigma : {0.1, 10.0}) {
    const auto r = simulate_parallel_gain(quick(sigma));
    CHECK(r.find(GainMode::Instance, 1).ratio == 1.0);
    CHECK(r.reference.mean < 0.0);
    double previous = 1.0;
    double previous_se = 0.0;
    for (std::size_t n : {2, 10, 100}) {
      const auto& p = r.find(GainMode::Instance, n);
      CHECK(p.ratio <= 1.0 + 2 * p.ratio_stderr);
      CHECK(p.ratio <= previous + 2 * std::hypot(p.ratio_stderr, previous_se));
      previous = p.ratio;
      previous_se = p.ratio_stderr;
      // Dense batches: the expected count equals the realized one.
      CHECK(r.find(GainMode::Global, n).ratio == p.ratio);
      CHECK(r.find(GainMode::FixedEnvelope, n).best_rate > 0.0);
    }
  }
  const auto low = simulate_parallel_gain(quick(0.1));
  const auto high = simulate_parallel_gain(quick(10.0));
  CHECK(low.find(GainMode::Instance, 100).ratio < high.find(GainMode::Instance, 100).ratio);
  CHECK_THROWS_AS(low.find(GainMode::Instance, 7), std::out_of_range);
}

TEST_CASE("determinism and CSV") {
  auto c = quick(0.1);
  c.p_nz = 0.2;
  c.minibatch_sizes = {1, 10};
  const auto a = simulate_parallel_gain(c);
  c.workers = 3;
  const auto b = simulate_parallel_gain(c);
  std::ostringstream sa, sb;
  write_gains_csv(sa, {a});
  write_gains_csv(sb, {b});
  CHECK(sa.str() == sb.str());
  CHECK(sa.str().rfind("mode,n,p_nz,sigma,ratio,stderr\ninstance,1,0.2,0.1,1,", 0) == 0);
  std::size_t lines = 0;
  for (char ch : sa.str()) lines += ch == '\n';
  CHECK(lines == 1 + 3 * 2);
}
