#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "stnet/localize.hpp"
#include "stnet/netpbm.hpp"
#include "stnet/rf_geometry.hpp"

namespace stnet {

// Class Hypothesis map over input pixels.
struct CHMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;  // row-major

  double at(std::size_t y, std::size_t x) const { return values[y * width + x]; }
  double& at(std::size_t y, std::size_t x) { return values[y * width + x]; }
};

// +1 over the rf_size x rf_size box around every anchor, clipped. For even
// sizes the box spans [p - rf/2, p + rf/2 - 1].
CHMap ch_accumulate(std::span<const Point> anchors, const RFGeometry& geom, ImageDims image);

// Sampled Gaussian truncated at radius ceil(3 sigma), normalized to sum 1.
std::vector<double> gaussian_kernel(double sigma);

// Separable Gaussian blur with mirror (reflect-101) borders.
CHMap gaussian_smooth(const CHMap& map, double sigma = 6.0);

// Min-max normalized 8-bit grayscale; a flat map renders as 128.
NetpbmImage to_grayscale(const CHMap& map);

// Heat colouring blended 50/50 over an RGB or gray source image of the same size.
NetpbmImage heat_overlay(const CHMap& map, const NetpbmImage& source);

void render(const CHMap& map, const std::filesystem::path& path);
void render_overlay(const CHMap& map, const NetpbmImage& source, const std::filesystem::path& path);

}  // namespace stnet
