#include <doctest.h>

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "vsgdfd/heatmap.hpp"

using namespace vsgdfd;

namespace {

GridResult tiny_result() {
  ExperimentGrid g;
  g.functions = {LossKind::Quad};
  g.curvatures = {1.0};
  g.noise_vars = {0.1, 1.0};
  OptimizerConfig sgd;
  sgd.algorithm = Algorithm::Sgd;
  g.algorithms = {sgd, OptimizerConfig{}};
  g.trials = 4;
  g.updates = 8;
  g.workers = 1;
  return run_grid(g);
}

}  // namespace

TEST_CASE("encode_square sorts every column") {
  const auto sq = encode_square({{1.0, 0.5, 0.1}, {1.0, 2.0, 0.01}, {1.0, 0.1, 1.0}});
  CHECK(sq.initial_loss == 1.0);
  CHECK(sq.sorted_losses[0] == std::vector<double>{1.0, 1.0, 1.0});
  CHECK(sq.sorted_losses[1] == std::vector<double>{0.1, 0.5, 2.0});
  CHECK(sq.sorted_losses[2] == std::vector<double>{0.01, 0.1, 1.0});
  CHECK(sq.values[0] == std::vector<double>{0.0, 0.0, 0.0});
  CHECK(sq.values[2][0] == doctest::Approx(-2.0));
  CHECK(sq.values[2][2] == 0.0);
  CHECK(sq.values[1][2] == doctest::Approx(std::log10(2.0)));
  for (const auto& col : sq.values) {
    for (std::size_t k = 1; k < col.size(); ++k) CHECK(col[k - 1] <= col[k]);
  }
  CHECK_THROWS_AS(encode_square({}), std::invalid_argument);
  CHECK_THROWS_AS(encode_square({{1.0, 2.0}, {1.0}}), std::invalid_argument);
}

TEST_CASE("constant input is white and decreasing input is blue") {
  const auto flat = encode_square({{2.0, 2.0, 2.0}, {2.0, 2.0, 2.0}});
  for (const auto& col : flat.values) {
    for (double v : col) CHECK(heat_color(v, {0.0, 0.0}) == Rgb{});
  }
  const auto down = encode_square({{1.0, 0.1, 0.01}});
  const ColorBounds b{-2.0, 0.0};
  CHECK(heat_color(down.values[0][0], b) == Rgb{});
  const auto mid = heat_color(down.values[1][0], b);
  const auto end = heat_color(down.values[2][0], b);
  CHECK(mid.b == 255);
  CHECK(end == Rgb{0, 0, 255});
  CHECK(mid.r > end.r);
}

TEST_CASE("heat_color") {
  const ColorBounds b{-4.0, 2.0};
  CHECK(heat_color(0.0, b) == Rgb{255, 255, 255});
  CHECK(heat_color(-4.0, b) == Rgb{0, 0, 255});
  CHECK(heat_color(-40.0, b) == Rgb{0, 0, 255});
  CHECK(heat_color(2.0, b) == Rgb{255, 0, 0});
  CHECK(heat_color(1.0, b) == Rgb{255, 128, 128});
  CHECK(heat_color(-2.0, b) == Rgb{128, 128, 255});
}

TEST_CASE("heatmap_encode") {
  const auto r = tiny_result();
  const auto heat = heatmap_encode(r);
  CHECK(heat.squares.size() == 4);
  CHECK(heat.checkpoints == r.checkpoints);
  const auto& b = heat.bounds.at(LossKind::Quad);
  CHECK(b.min <= 0.0);
  CHECK(b.max >= 0.0);
  for (const auto& sq : heat.squares) {
    for (double v : sq.values.front()) CHECK(v == 0.0);
  }
  CHECK(heat.square(1, 1, 2).case_index == 1);
  CHECK(heat.square(1, 1, 2).row_index == 1);

  auto broken = r;
  broken.records.pop_back();
  CHECK_THROWS_AS(heatmap_encode(broken), std::invalid_argument);
  auto shuffled = r;
  std::swap(shuffled.records[0], shuffled.records[1]);
  CHECK_THROWS_AS(heatmap_encode(shuffled), std::invalid_argument);
}

TEST_CASE("image and CSV output") {
  const auto r = tiny_result();
  const auto heat = heatmap_encode(r);
  CHECK(heatmap_filename(LossKind::Quad, r.grid.algorithms[1], ImageFormat::Svg) == "quad_vsgd-fd-n1.svg");
  CHECK(heatmap_filename(LossKind::Abs, r.grid.algorithms[0], ImageFormat::Ppm) == "abs_sgd-eta0.1-g0-n1.ppm");

  std::ostringstream svg;
  write_function_svg(svg, r, heat, LossKind::Quad, 1);
  CHECK(svg.str().rfind("<svg", 0) == 0);
  CHECK(svg.str().find("quad-A1-v0.1") != std::string::npos);
  CHECK(svg.str().find("</svg>") != std::string::npos);

  std::ostringstream ppm;
  write_function_ppm(ppm, r, heat, LossKind::Quad, 0);
  // Two squares of 5 checkpoints x 10 px plus three 4 px gutters; one row of 100 px plus two gutters.
  const std::string header = "P6\n112 108\n255\n";
  CHECK(ppm.str().rfind(header, 0) == 0);
  CHECK(ppm.str().size() == header.size() + 112 * 108 * 3);
  CHECK_THROWS_AS(write_function_ppm(ppm, r, heat, LossKind::Gauss, 0), std::invalid_argument);

  std::ostringstream csv;
  write_heatmap_csv(csv, r, heat);
  CHECK(csv.str().rfind("case_id,algo_id,checkpoint_iter,rank,loss,value\n", 0) == 0);
  std::size_t lines = 0;
  for (char ch : csv.str()) lines += ch == '\n';
  CHECK(lines == 1 + 4 * 5 * 4);
}
