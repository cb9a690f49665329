#include "lrsense/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>

#include <png.h>

#include "lrsense/error.hpp"

namespace lrsense::image {

void write_png(const std::filesystem::path& path, int width, int height, int channels,
               const std::vector<std::uint8_t>& pixels) {
  if (width < 1 || height < 1 || (channels != 1 && channels != 3) ||
      pixels.size() != static_cast<std::size_t>(width) * height * channels) {
    throw Error(ErrorCode::InvalidDimension, "bad image buffer for " + path.string());
  }
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw Error(ErrorCode::Io, "cannot open " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::Io, "libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::Io, "libpng failed writing " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, width, height, 8, channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(width) * channels;
  for (int row = 0; row < height; ++row) {
    png_write_row(png, const_cast<png_bytep>(pixels.data() + row * stride));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_heatmap_png(const std::filesystem::path& path, const Eigen::MatrixXd& values, int cell_px) {
  const int rows = static_cast<int>(values.rows());
  const int cols = static_cast<int>(values.cols());
  if (rows < 1 || cols < 1) throw Error(ErrorCode::InvalidDimension, "empty heatmap");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      if (std::isfinite(values(i, j))) {
        lo = std::min(lo, values(i, j));
        hi = std::max(hi, values(i, j));
      }
    }
  }
  const int w = cols * cell_px;
  const int h = rows * cell_px;
  std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * h, 0);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      const double v = values(i, j);
      std::uint8_t shade = 0;  // non-finite cells render black
      if (std::isfinite(v)) {
        const double frac = hi > lo ? (v - lo) / (hi - lo) : 0.0;
        shade = static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - frac)));
      }
      for (int y = i * cell_px; y < (i + 1) * cell_px; ++y) {
        std::fill_n(px.begin() + static_cast<std::ptrdiff_t>(y) * w + j * cell_px, cell_px, shade);
      }
    }
  }
  write_png(path, w, h, 1, px);
}

void write_log_curves_png(const std::filesystem::path& path, const std::vector<Series>& series, int width,
                          int height) {
  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
  double y_lo = x_lo, y_hi = -x_lo;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!(s.y[i] > 0.0) || !std::isfinite(s.y[i])) continue;
      x_lo = std::min(x_lo, s.x[i]);
      x_hi = std::max(x_hi, s.x[i]);
      y_lo = std::min(y_lo, std::log10(s.y[i]));
      y_hi = std::max(y_hi, std::log10(s.y[i]));
    }
  }
  std::vector<std::uint8_t> px(static_cast<std::size_t>(width) * height * 3, 255);
  if (!std::isfinite(x_lo)) {
    write_png(path, width, height, 3, px);
    return;
  }
  if (x_hi == x_lo) x_hi = x_lo + 1.0;
  if (y_hi == y_lo) y_hi = y_lo + 1.0;
  const int margin = 20;
  auto to_px = [&](double x, double y) {
    const double fx = (x - x_lo) / (x_hi - x_lo);
    const double fy = (std::log10(y) - y_lo) / (y_hi - y_lo);
    return std::pair<double, double>{margin + fx * (width - 2 * margin),
                                     height - margin - fy * (height - 2 * margin)};
  };
  auto plot = [&](int x, int y, const std::array<std::uint8_t, 3>& c) {
    if (x < 0 || y < 0 || x >= width || y >= height) return;
    auto* p = &px[(static_cast<std::size_t>(y) * width + x) * 3];
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  };
  const std::array<std::uint8_t, 3> axis{160, 160, 160};
  for (int x = margin; x < width - margin; ++x) plot(x, height - margin, axis);
  for (int y = margin; y < height - margin; ++y) plot(margin, y, axis);

  for (const auto& s : series) {
    bool have_prev = false;
    std::pair<double, double> prev{};
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!(s.y[i] > 0.0) || !std::isfinite(s.y[i])) {
        have_prev = false;
        continue;
      }
      const auto cur = to_px(s.x[i], s.y[i]);
      if (have_prev) {
        const int steps = static_cast<int>(std::ceil(std::max(std::abs(cur.first - prev.first),
                                                              std::abs(cur.second - prev.second)))) + 1;
        for (int k = 0; k <= steps; ++k) {
          const double f = static_cast<double>(k) / steps;
          const int x = static_cast<int>(std::lround(prev.first + f * (cur.first - prev.first)));
          const int y = static_cast<int>(std::lround(prev.second + f * (cur.second - prev.second)));
          plot(x, y, s.color);
          plot(x, y + 1, s.color);
        }
      }
      prev = cur;
      have_prev = true;
    }
  }
  write_png(path, width, height, 3, px);
}

}  // namespace lrsense::image
