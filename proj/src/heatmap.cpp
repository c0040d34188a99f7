#include "vsgdfd/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "vsgdfd/text.hpp"

namespace vsgdfd {

namespace {

constexpr int kCellWidth = 10;
constexpr int kSquareHeight = 100;
constexpr int kGutter = 4;
constexpr Rgb kGutterColor{160, 160, 160};

double log_ratio(double loss, double initial) {
  if (loss == initial) return 0.0;
  const double tiny = std::numeric_limits<double>::min();
  return std::log10(std::max(loss, tiny) / std::max(initial, tiny));
}

std::uint8_t channel(double s) { return static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - s))); }

// Cases of one function laid out by (curvature, noise) position.
struct Layout {
  std::size_t grid_rows = 0;
  std::size_t grid_cols = 0;
  std::vector<std::size_t> case_at;  // grid_rows * grid_cols case indices
};

Layout layout_for(const GridResult& result, LossKind function) {
  Layout l;
  l.grid_rows = result.grid.curvatures.size();
  l.grid_cols = result.grid.noise_vars.size();
  for (std::size_t c = 0; c < result.cases.size(); ++c) {
    if (result.cases[c].kind == function) l.case_at.push_back(c);
  }
  if (l.case_at.size() != l.grid_rows * l.grid_cols) {
    throw std::invalid_argument("heatmap: function not present in grid");
  }
  return l;
}

int square_width(const HeatmapGrid& heat) { return static_cast<int>(heat.checkpoints.size()) * kCellWidth; }

// Row of pixels [y0, y1) within a square holds rank floor(y * trials / height).
template <class Fill>
void paint_square(const HeatmapSquare& sq, const ColorBounds& bounds, Fill fill) {
  const std::size_t trials = sq.values.front().size();
  for (std::size_t k = 0; k < sq.values.size(); ++k) {
    for (int y = 0; y < kSquareHeight; ++y) {
      const std::size_t rank = static_cast<std::size_t>(y) * trials / kSquareHeight;
      fill(static_cast<int>(k), y, heat_color(sq.values[k][rank], bounds));
    }
  }
}

}  // namespace

HeatmapSquare encode_square(const std::vector<std::vector<double>>& trial_losses) {
  if (trial_losses.empty()) throw std::invalid_argument("heatmap: no trials");
  const std::size_t checkpoints = trial_losses.front().size();
  if (checkpoints == 0) throw std::invalid_argument("heatmap: no checkpoints");
  HeatmapSquare sq;
  sq.initial_loss = trial_losses.front().front();
  sq.sorted_losses.assign(checkpoints, std::vector<double>(trial_losses.size()));
  for (std::size_t t = 0; t < trial_losses.size(); ++t) {
    if (trial_losses[t].size() != checkpoints) throw std::invalid_argument("heatmap: ragged checkpoints");
    for (std::size_t k = 0; k < checkpoints; ++k) sq.sorted_losses[k][t] = trial_losses[t][k];
  }
  sq.values = sq.sorted_losses;
  for (std::size_t k = 0; k < checkpoints; ++k) {
    std::sort(sq.sorted_losses[k].begin(), sq.sorted_losses[k].end());
    for (std::size_t t = 0; t < trial_losses.size(); ++t) {
      sq.values[k][t] = log_ratio(sq.sorted_losses[k][t], sq.initial_loss);
    }
  }
  return sq;
}

HeatmapGrid heatmap_encode(const GridResult& result) {
  const std::size_t rows = result.grid.algorithms.size();
  const std::size_t trials = result.grid.trials;
  if (result.records.size() != result.cases.size() * rows * trials) {
    throw std::invalid_argument("heatmap: records incomplete for the grid");
  }
  HeatmapGrid heat;
  heat.checkpoints = result.checkpoints;
  heat.squares.reserve(result.cases.size() * rows);
  for (std::size_t c = 0; c < result.cases.size(); ++c) {
    for (std::size_t r = 0; r < rows; ++r) {
      std::vector<std::vector<double>> losses;
      losses.reserve(trials);
      for (std::size_t t = 0; t < trials; ++t) {
        const auto& rec = result.at(c, r, t);
        if (rec.case_index != c || rec.row_index != r || rec.trial != t ||
            rec.checkpoint_losses.size() != result.checkpoints.size()) {
          throw std::invalid_argument("heatmap: missing record for " + result.cases[c].id() + " / " +
                                      result.grid.algorithms[r].label());
        }
        losses.push_back(rec.checkpoint_losses);
      }
      auto sq = encode_square(losses);
      sq.case_index = c;
      sq.row_index = r;
      auto& b = heat.bounds[result.cases[c].kind];
      for (const auto& col : sq.values) {
        b.min = std::min(b.min, col.front());
        b.max = std::max(b.max, col.back());
      }
      heat.squares.push_back(std::move(sq));
    }
  }
  return heat;
}

Rgb heat_color(double value, const ColorBounds& bounds) {
  if (value < 0.0 && bounds.min < 0.0) {
    const std::uint8_t v = channel(std::min(value / bounds.min, 1.0));
    return {v, v, 255};
  }
  if (value > 0.0 && bounds.max > 0.0) {
    const std::uint8_t v = channel(std::min(value / bounds.max, 1.0));
    return {255, v, v};
  }
  return {};
}

void write_function_svg(std::ostream& os, const GridResult& result, const HeatmapGrid& heat, LossKind function,
                        std::size_t row_index) {
  const auto l = layout_for(result, function);
  const std::size_t rows = result.grid.algorithms.size();
  const int sw = square_width(heat);
  const int width = static_cast<int>(l.grid_cols) * (sw + kGutter) + kGutter;
  const int height = static_cast<int>(l.grid_rows) * (kSquareHeight + kGutter) + kGutter;
  const auto& bounds = heat.bounds.at(function);
  const auto hex = [](Rgb c) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
    return std::string(buf);
  };

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" shape-rendering=\"crispEdges\">\n";
  os << "<title>" << to_string(function) << ' ' << result.grid.algorithms[row_index].label() << "</title>\n";
  os << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"" << hex(kGutterColor) << "\"/>\n";
  for (std::size_t gr = 0; gr < l.grid_rows; ++gr) {
    for (std::size_t gc = 0; gc < l.grid_cols; ++gc) {
      const std::size_t c = l.case_at[gr * l.grid_cols + gc];
      const auto& sq = heat.square(c, row_index, rows);
      const int x0 = kGutter + static_cast<int>(gc) * (sw + kGutter);
      const int y0 = kGutter + static_cast<int>(gr) * (kSquareHeight + kGutter);
      os << "<g><title>" << result.cases[c].id() << "</title>\n";
      // Vertical runs of equal color become one rect.
      for (std::size_t k = 0; k < sq.values.size(); ++k) {
        int run_start = 0;
        Rgb run_color;
        paint_square(sq, bounds, [&](int col, int y, Rgb color) {
          if (col != static_cast<int>(k)) return;
          if (y == 0) {
            run_color = color;
            run_start = 0;
          } else if (!(color == run_color)) {
            os << "<rect x=\"" << x0 + col * kCellWidth << "\" y=\"" << y0 + run_start << "\" width=\""
               << kCellWidth << "\" height=\"" << y - run_start << "\" fill=\"" << hex(run_color) << "\"/>\n";
            run_color = color;
            run_start = y;
          }
          if (y == kSquareHeight - 1) {
            os << "<rect x=\"" << x0 + col * kCellWidth << "\" y=\"" << y0 + run_start << "\" width=\""
               << kCellWidth << "\" height=\"" << kSquareHeight - run_start << "\" fill=\"" << hex(run_color)
               << "\"/>\n";
          }
        });
      }
      os << "</g>\n";
    }
  }
  os << "</svg>\n";
}

void write_function_ppm(std::ostream& os, const GridResult& result, const HeatmapGrid& heat, LossKind function,
                        std::size_t row_index) {
  const auto l = layout_for(result, function);
  const std::size_t rows = result.grid.algorithms.size();
  const int sw = square_width(heat);
  const int width = static_cast<int>(l.grid_cols) * (sw + kGutter) + kGutter;
  const int height = static_cast<int>(l.grid_rows) * (kSquareHeight + kGutter) + kGutter;
  const auto& bounds = heat.bounds.at(function);

  std::vector<Rgb> pixels(static_cast<std::size_t>(width) * height, kGutterColor);
  for (std::size_t gr = 0; gr < l.grid_rows; ++gr) {
    for (std::size_t gc = 0; gc < l.grid_cols; ++gc) {
      const auto& sq = heat.square(l.case_at[gr * l.grid_cols + gc], row_index, rows);
      const int x0 = kGutter + static_cast<int>(gc) * (sw + kGutter);
      const int y0 = kGutter + static_cast<int>(gr) * (kSquareHeight + kGutter);
      paint_square(sq, bounds, [&](int col, int y, Rgb color) {
        for (int dx = 0; dx < kCellWidth; ++dx) {
          pixels[static_cast<std::size_t>(y0 + y) * width + x0 + col * kCellWidth + dx] = color;
        }
      });
    }
  }
  os << "P6\n" << width << ' ' << height << "\n255\n";
  for (const auto& p : pixels) {
    const char rgb[3] = {static_cast<char>(p.r), static_cast<char>(p.g), static_cast<char>(p.b)};
    os.write(rgb, 3);
  }
}

void write_heatmap_csv(std::ostream& os, const GridResult& result, const HeatmapGrid& heat) {
  os << "case_id,algo_id,checkpoint_iter,rank,loss,value\n";
  for (const auto& sq : heat.squares) {
    const auto case_id = result.cases[sq.case_index].id();
    const auto algo_id = result.grid.algorithms[sq.row_index].label();
    for (std::size_t k = 0; k < sq.sorted_losses.size(); ++k) {
      for (std::size_t t = 0; t < sq.sorted_losses[k].size(); ++t) {
        os << case_id << ',' << algo_id << ',' << heat.checkpoints[k] << ',' << t << ','
           << text::format_double(sq.sorted_losses[k][t]) << ',' << text::format_double(sq.values[k][t]) << '\n';
      }
    }
  }
}

std::string heatmap_filename(LossKind function, const OptimizerConfig& row, ImageFormat format) {
  return std::string(to_string(function)) + "_" + row.label() + (format == ImageFormat::Svg ? ".svg" : ".ppm");
}

}  // namespace vsgdfd
