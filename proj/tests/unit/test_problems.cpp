#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "oracle.hpp"
#include "vsgdfd/problems.hpp"

using namespace vsgdfd;

namespace {

ProblemSpec make(LossKind kind, double a, double var) {
  ProblemSpec p;
  p.kind = kind;
  p.curvature = a;
  p.noise_var = var;
  return p;
}

Sample at_offset(double xi) {
  Sample s;
  s.offsets = {xi};
  s.active = {true};
  return s;
}

constexpr LossKind kGridKinds[] = {LossKind::Quad, LossKind::Abs, LossKind::RectLin, LossKind::Gauss};

}  // namespace

TEST_CASE("kind names round-trip") {
  for (auto k : {LossKind::Quad, LossKind::Abs, LossKind::RectLin, LossKind::Gauss, LossKind::SparseQuad,
                 LossKind::TwoCluster}) {
    CHECK(parse_loss_kind(to_string(k)) == k);
  }
  CHECK(parse_loss_kind("QUAD") == LossKind::Quad);
  CHECK_THROWS_AS(parse_loss_kind("cubic"), std::invalid_argument);
}

TEST_CASE("validation") {
  CHECK_THROWS_AS(make(LossKind::Quad, 0.0, 1.0).validate(), std::invalid_argument);
  CHECK_THROWS_AS(make(LossKind::Quad, 1.0, 0.0).validate(), std::invalid_argument);
  auto p = make(LossKind::SparseQuad, 1.0, 1.0);
  p.sparsity_pnz = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p.sparsity_pnz = 1.5;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  auto tc = make(LossKind::TwoCluster, 1.0, 1.0);
  CHECK_THROWS_AS(tc.validate(), std::invalid_argument);
  CHECK_NOTHROW(default_two_cluster_problem().validate());
}

TEST_CASE("draw_sample is reproducible") {
  const auto p = make(LossKind::Quad, 1.0, 1.0);
  Rng a(42), b(42);
  for (int k = 0; k < 100; ++k) CHECK(draw_sample(p, a).offsets == draw_sample(p, b).offsets);
}

TEST_CASE("draw_sample moments") {
  SUBCASE("sparse mask density") {
    auto p = make(LossKind::SparseQuad, 1.0, 1.0);
    p.sparsity_pnz = 0.1;
    Rng rng(1);
    std::size_t active = 0;
    for (int k = 0; k < 100000; ++k) active += draw_sample(p, rng).active[0];
    CHECK(std::abs(active / 1e5 - 0.1) <= 0.01);
  }
  SUBCASE("offset variance") {
    const auto p = make(LossKind::Quad, 1.0, 10.0);
    Rng rng(2);
    double s = 0, s2 = 0;
    for (int k = 0; k < 100000; ++k) {
      const double x = draw_sample(p, rng).offsets[0];
      s += x;
      s2 += x * x;
    }
    const double var = s2 / 1e5 - (s / 1e5) * (s / 1e5);
    CHECK(std::abs(var / 10.0 - 1.0) < 0.05);
  }
  SUBCASE("dense kinds have an all-true mask") {
    auto p = make(LossKind::Abs, 1.0, 1.0);
    p.dim = 3;
    Rng rng(3);
    const auto s = draw_sample(p, rng);
    CHECK(s.active == std::vector<bool>{true, true, true});
  }
}

TEST_CASE("sample_loss examples") {
  const std::vector<double> th{0.7};
  CHECK(sample_loss(make(LossKind::Quad, 1.0, 1.0), th, at_offset(0.7)) == 0.0);
  CHECK(sample_loss(make(LossKind::Abs, 10.0, 1.0), std::vector<double>{1.0}, at_offset(0.5)) == doctest::Approx(5.0));
  CHECK(sample_loss(make(LossKind::Gauss, 1.0, 1.0), th, at_offset(0.7)) == 0.0);
  CHECK(sample_loss(make(LossKind::Gauss, 1.0, 1.0), std::vector<double>{1e3}, at_offset(0.0)) == 1.0);
  CHECK(sample_loss(make(LossKind::RectLin, 2.0, 1.0), std::vector<double>{-1.0}, at_offset(0.0)) == 0.0);
  CHECK(sample_loss(make(LossKind::RectLin, 2.0, 1.0), std::vector<double>{1.5}, at_offset(0.5)) == 2.0);
}

TEST_CASE("sample_grad examples") {
  CHECK(sample_grad(make(LossKind::Quad, 1.0, 1.0), std::vector<double>{2.0}, at_offset(0.0))[0] == 4.0);
  CHECK(sample_grad(make(LossKind::Abs, 3.0, 1.0), std::vector<double>{0.5}, at_offset(0.5))[0] == 0.0);
  CHECK(sample_grad(make(LossKind::Abs, 3.0, 1.0), std::vector<double>{0.4}, at_offset(0.5))[0] == -3.0);
  CHECK(sample_grad(make(LossKind::RectLin, 3.0, 1.0), std::vector<double>{0.5}, at_offset(0.5))[0] == 0.0);
  CHECK(sample_grad(make(LossKind::RectLin, 3.0, 1.0), std::vector<double>{0.6}, at_offset(0.5))[0] == 3.0);

  auto sparse = make(LossKind::SparseQuad, 1.0, 1.0);
  sparse.dim = 2;
  Sample s;
  s.offsets = {0.0, 0.0};
  s.active = {true, false};
  const auto g = sample_grad(sparse, std::vector<double>{1.0, 1.0}, s);
  CHECK(g[0] == 2.0);
  CHECK(g[1] == 0.0);
}

TEST_CASE("sample_grad matches central differences") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(-3.0, 3.0);
  const double h = 1e-5;
  for (auto kind : kGridKinds) {
    for (int k = 0; k < 100; ++k) {
      const auto p = make(kind, std::pow(10.0, unif(rng) / 3.0), 1.0);
      const auto s = at_offset(unif(rng));
      double th = unif(rng);
      if (std::abs(th - s.offsets[0]) <= 1e-3) th += 0.01;
      const double up = sample_loss(p, std::vector<double>{th + h}, s);
      const double down = sample_loss(p, std::vector<double>{th - h}, s);
      const double fd = (up - down) / (2 * h);
      CHECK(std::abs(sample_grad(p, std::vector<double>{th}, s)[0] - fd) < 1e-5 * std::max(1.0, p.curvature));
    }
  }
}

TEST_CASE("bbprop curvature") {
  Rng rng(3);
  for (auto kind : kGridKinds) {
    const auto p = make(kind, 10.0, 1.0);
    for (int k = 0; k < 200; ++k) {
      const auto s = draw_sample(p, rng);
      const double th = std::uniform_real_distribution<double>(-4, 4)(rng);
      const double h = sample_curvature_bbprop(p, std::vector<double>{th}, s)[0];
      CHECK(h >= 0.0);
      if (kind == LossKind::Quad) CHECK(h == 20.0);
      if (kind == LossKind::Abs || kind == LossKind::RectLin) CHECK(h == 0.0);
    }
  }
  CHECK(sample_curvature_bbprop(make(LossKind::Gauss, 1.0, 1.0), std::vector<double>{0.3}, at_offset(0.3))[0] == 1.0);
}

TEST_CASE("dimension mismatch throws") {
  const auto p = make(LossKind::Quad, 1.0, 1.0);
  CHECK_THROWS_AS(sample_loss(p, std::vector<double>{1.0, 2.0}, at_offset(0.0)), std::invalid_argument);
  CHECK_THROWS_AS(sample_grad(p, std::vector<double>{1.0, 2.0}, at_offset(0.0)), std::invalid_argument);
  CHECK_THROWS_AS(expected_loss(p, std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("expected_loss examples") {
  CHECK(expected_loss(make(LossKind::Quad, 1.0, 1.0), std::vector<double>{0.0}) == doctest::Approx(1.0));
  CHECK(expected_loss(make(LossKind::Abs, 1.0, 1.0), std::vector<double>{0.0}) ==
        doctest::Approx(std::sqrt(2.0 / std::numbers::pi)));
  CHECK(expected_loss(make(LossKind::Abs, 1.0, 1.0), std::vector<double>{0.0}) == doctest::Approx(0.79788).epsilon(1e-5));
  auto sparse = make(LossKind::SparseQuad, 2.0, 0.5);
  sparse.sparsity_pnz = 0.25;
  CHECK(expected_loss(sparse, std::vector<double>{1.0}) == doctest::Approx(0.25 * 2.0 * 1.5));
  const auto tc = default_two_cluster_problem();
  CHECK(expected_loss(tc, std::vector<double>{1.0, 1.0}) == doctest::Approx(1.0));
  CHECK(expected_loss(tc, std::vector<double>{1.0, 0.0}) == doctest::Approx(0.8));
}

TEST_CASE("expected_loss matches Monte-Carlo at random points") {
  std::mt19937_64 pick(11);
  std::uniform_real_distribution<double> unif(-3.0, 3.0);
  Rng rng(12);
  for (auto kind : kGridKinds) {
    for (int k = 0; k < 25; ++k) {
      const auto p = make(kind, std::pow(10.0, unif(pick) / 3.0), std::pow(10.0, unif(pick) / 3.0));
      const std::vector<double> th{unif(pick)};
      const auto mc = oracle::monte_carlo(100000, [&] { return sample_loss(p, th, draw_sample(p, rng)); });
      CAPTURE(to_string(kind));
      CAPTURE(th[0]);
      if (mc.se > 0.0) {
        CHECK(std::abs(mc.mean - expected_loss(p, th)) <= 3.0 * mc.se);
      } else {
        // No draw reached the tail: its mass is below the rule-of-three bound 3/N.
        CHECK(std::abs(mc.mean - expected_loss(p, th)) <= 3.0 / 100000 * p.curvature);
      }
    }
  }
}

TEST_CASE("expected_loss is minimized at zero") {
  for (auto kind : {LossKind::Quad, LossKind::Abs, LossKind::Gauss}) {
    for (double var : {0.01, 0.1, 1.0, 10.0}) {
      const auto p = make(kind, 1.0, var);
      const double at_zero = expected_loss(p, std::vector<double>{0.0});
      for (int k = -300; k <= 300; ++k) {
        if (k == 0) continue;
        CHECK(expected_loss(p, std::vector<double>{k / 100.0}) > at_zero);
      }
    }
  }
}

TEST_CASE("rectified linear expected loss is increasing") {
  // Its sample losses are one-sided, so the expectation has no interior minimum.
  for (double var : {0.1, 1.0, 10.0}) {
    const auto p = make(LossKind::RectLin, 1.0, var);
    double prev = expected_loss(p, std::vector<double>{-3.0});
    for (int k = -299; k <= 300; ++k) {
      const double cur = expected_loss(p, std::vector<double>{k / 100.0});
      CHECK(cur > prev);
      prev = cur;
    }
  }
}

TEST_CASE("config round-trip") {
  auto p = make(LossKind::SparseQuad, 0.1, 10.0);
  p.dim = 3;
  p.sparsity_pnz = 0.01;
  p.optimum = {1.0, -2.0, 0.5};
  CHECK(parse_problem_config(to_config(p)) == p);
  const auto tc = default_two_cluster_problem();
  CHECK(parse_problem_config(to_config(tc)) == tc);
  CHECK_THROWS_AS(parse_problem_config("kind=quad\ncolour=red\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_problem_config("kind=quad\ncurvature=-1\n"), std::invalid_argument);
}
