#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace lrsense::image {

void write_png(const std::filesystem::path& path, int width, int height, int channels,
               const std::vector<std::uint8_t>& pixels);

/// Grayscale heatmap, one block of cell_px pixels per matrix entry, row 0 at
/// the top. Lower values render whiter.
void write_heatmap_png(const std::filesystem::path& path, const Eigen::MatrixXd& values, int cell_px = 24);

struct Series {
  std::vector<double> x;
  std::vector<double> y;
  std::array<std::uint8_t, 3> color{0, 0, 0};
};

/// Line plot on a log10 y-axis; non-positive y values are skipped.
void write_log_curves_png(const std::filesystem::path& path, const std::vector<Series>& series, int width = 800,
                          int height = 500);

}  // namespace lrsense::image
