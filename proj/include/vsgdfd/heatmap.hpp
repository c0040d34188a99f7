#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "vsgdfd/harness.hpp"

namespace vsgdfd {

/// Trial losses of one (test case, algorithm row) cell, each checkpoint
/// column sorted ascending, and their log10 ratio to the initial loss.
struct HeatmapSquare {
  std::size_t case_index = 0;
  std::size_t row_index = 0;
  double initial_loss = 0.0;
  /// [checkpoint][rank]
  std::vector<std::vector<double>> sorted_losses;
  /// log10(loss / initial_loss), same shape as sorted_losses.
  std::vector<std::vector<double>> values;
};

/// Shared color range of all squares of one function: min <= 0 <= max.
struct ColorBounds {
  double min = 0.0;
  double max = 0.0;
};

struct HeatmapGrid {
  std::vector<std::size_t> checkpoints;
  /// Ordered by (case, row).
  std::vector<HeatmapSquare> squares;
  std::map<LossKind, ColorBounds> bounds;

  const HeatmapSquare& square(std::size_t case_index, std::size_t row_index, std::size_t rows) const {
    return squares.at(case_index * rows + row_index);
  }
};

/// Encodes one cell from its trials' checkpoint losses (one vector per
/// trial, all of equal length, first entry the initial loss).
HeatmapSquare encode_square(const std::vector<std::vector<double>>& trial_losses);

/// Throws std::invalid_argument if any (case, row) cell is missing trials
/// or checkpoints.
HeatmapGrid heatmap_encode(const GridResult& result);

struct Rgb {
  std::uint8_t r = 255, g = 255, b = 255;
  bool operator==(const Rgb&) const = default;
};

/// White at 0, blue below (saturating at bounds.min), red above
/// (saturating at bounds.max).
Rgb heat_color(double value, const ColorBounds& bounds);

enum class ImageFormat { Svg, Ppm };

/// One image per (function, algorithm row): a curvature-by-noise grid of
/// squares, iterations left to right, trial rank top to bottom.
void write_function_svg(std::ostream& os, const GridResult& result, const HeatmapGrid& heat, LossKind function,
                        std::size_t row_index);
void write_function_ppm(std::ostream& os, const GridResult& result, const HeatmapGrid& heat, LossKind function,
                        std::size_t row_index);

/// Columns: case_id,algo_id,checkpoint_iter,rank,loss,value.
void write_heatmap_csv(std::ostream& os, const GridResult& result, const HeatmapGrid& heat);

/// "{function}_{algo}.{ext}"
std::string heatmap_filename(LossKind function, const OptimizerConfig& row, ImageFormat format);

}  // namespace vsgdfd
