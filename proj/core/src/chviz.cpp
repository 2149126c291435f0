#include "stnet/chviz.hpp"

#include <algorithm>
#include <cmath>

namespace stnet {

CHMap ch_accumulate(std::span<const Point> anchors, const RFGeometry& geom, ImageDims image) {
  if (geom.rf_size < 1) throw ShapeError("receptive field size must be positive");
  CHMap map{image.height, image.width, std::vector<double>(image.height * image.width, 0.0)};
  const long before = geom.rf_size / 2;
  const long after = geom.rf_size - 1 - before;
  const long max_x = static_cast<long>(image.width) - 1;
  const long max_y = static_cast<long>(image.height) - 1;
  for (const auto& p : anchors) {
    const long y0 = std::max(p.y - before, 0L);
    const long y1 = std::min(p.y + after, max_y);
    const long x0 = std::max(p.x - before, 0L);
    const long x1 = std::min(p.x + after, max_x);
    for (long y = y0; y <= y1; ++y) {
      for (long x = x0; x <= x1; ++x) map.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) += 1.0;
    }
  }
  return map;
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("gaussian sigma must be positive");
  const auto radius = static_cast<long>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (long i = -radius; i <= radius; ++i) {
    const double v = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    total += v;
  }
  for (double& v : k) v /= total;
  return k;
}

namespace {

// Mirror index without repeating the edge sample: -1 -> 1, n -> n - 2.
std::size_t reflect(long i, std::size_t n) {
  if (n == 1) return 0;
  const long period = 2 * (static_cast<long>(n) - 1);
  i = std::abs(i) % period;
  if (i >= static_cast<long>(n)) i = period - i;
  return static_cast<std::size_t>(i);
}

}  // namespace

CHMap gaussian_smooth(const CHMap& map, double sigma) {
  const auto kernel = gaussian_kernel(sigma);
  const long radius = static_cast<long>(kernel.size() / 2);
  if (map.values.empty()) return map;

  CHMap rows = map;
  for (std::size_t y = 0; y < map.height; ++y) {
    for (std::size_t x = 0; x < map.width; ++x) {
      double acc = 0.0;
      for (long d = -radius; d <= radius; ++d) {
        acc += kernel[static_cast<std::size_t>(d + radius)] *
               map.at(y, reflect(static_cast<long>(x) + d, map.width));
      }
      rows.at(y, x) = acc;
    }
  }
  CHMap out = rows;
  for (std::size_t y = 0; y < map.height; ++y) {
    for (std::size_t x = 0; x < map.width; ++x) {
      double acc = 0.0;
      for (long d = -radius; d <= radius; ++d) {
        acc += kernel[static_cast<std::size_t>(d + radius)] *
               rows.at(reflect(static_cast<long>(y) + d, map.height), x);
      }
      out.at(y, x) = acc;
    }
  }
  return out;
}

NetpbmImage to_grayscale(const CHMap& map) {
  if (map.values.empty()) throw ShapeError("cannot render an empty CH map");
  const auto [lo_it, hi_it] = std::minmax_element(map.values.begin(), map.values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  NetpbmImage img{map.width, map.height, 1, std::vector<std::uint8_t>(map.values.size(), 128)};
  if (hi > lo) {
    for (std::size_t i = 0; i < map.values.size(); ++i) {
      const double t = (map.values[i] - lo) / (hi - lo);
      img.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(t, 0.0, 1.0) * 255.0));
    }
  }
  return img;
}

NetpbmImage heat_overlay(const CHMap& map, const NetpbmImage& source) {
  if (source.width != map.width || source.height != map.height) {
    throw ShapeError("overlay source size does not match the CH map");
  }
  const NetpbmImage gray = to_grayscale(map);
  NetpbmImage out{map.width, map.height, 3, std::vector<std::uint8_t>(map.values.size() * 3)};
  const auto ramp = [](double v) { return std::clamp(1.5 - std::abs(v), 0.0, 1.0); };
  for (std::size_t i = 0; i < gray.pixels.size(); ++i) {
    const double t = gray.pixels[i] / 255.0;
    const double heat[3] = {ramp(4.0 * t - 3.0), ramp(4.0 * t - 2.0), ramp(4.0 * t - 1.0)};
    for (std::size_t ch = 0; ch < 3; ++ch) {
      const std::uint8_t base =
          source.channels == 3 ? source.pixels[i * 3 + ch] : source.pixels[i];
      out.pixels[i * 3 + ch] =
          static_cast<std::uint8_t>(std::lround(0.5 * base + 0.5 * heat[ch] * 255.0));
    }
  }
  return out;
}

void render(const CHMap& map, const std::filesystem::path& path) {
  write_netpbm(to_grayscale(map), path);
}

void render_overlay(const CHMap& map, const NetpbmImage& source, const std::filesystem::path& path) {
  write_netpbm(heat_overlay(map, source), path);
}

}  // namespace stnet
