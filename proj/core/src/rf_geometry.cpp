#include "stnet/rf_geometry.hpp"

#include <algorithm>

namespace stnet {

RFGeometry rf_geometry(std::span<const LayerSpec> layers) {
  RFGeometry g;
  for (const auto& layer : layers) {
    if (is_elementwise(layer.kind)) continue;
    if (!is_windowed(layer.kind)) {
      throw ShapeError("geometry undefined past bridge (layer '" + layer.name + "')");
    }
    const auto k = static_cast<long>(layer.kernel);
    const auto p = static_cast<long>(layer.padding);
    g.offset += (static_cast<double>(k - 1) / 2.0 - static_cast<double>(p)) *
                static_cast<double>(g.jump);
    g.rf_size += (k - 1) * g.jump;
    g.jump *= static_cast<long>(layer.stride);
  }
  return g;
}

Window rf_window(const LayerSpec& layer, const Shape3& lower, std::size_t top_h,
                 std::size_t top_w) {
  if (!is_windowed(layer.kind)) {
    throw ShapeError("layer '" + layer.name + "' has no spatial receptive field");
  }
  const Shape3 top = output_shape(layer, lower);
  if (top_h >= top.height || top_w >= top.width) {
    throw ShapeError("top position (" + std::to_string(top_h) + ", " + std::to_string(top_w) +
                     ") outside " + to_string(top) + " output of layer '" + layer.name + "'");
  }
  const auto axis = [&](std::size_t pos, std::size_t extent) {
    // Signed start in lower coordinates; negative means padding.
    const long start = static_cast<long>(pos * layer.stride) - static_cast<long>(layer.padding);
    const long stop = start + static_cast<long>(layer.kernel);
    const long lo = std::max(start, 0L);
    const long hi = std::min(stop, static_cast<long>(extent));
    return std::pair<std::size_t, std::size_t>(static_cast<std::size_t>(lo),
                                               static_cast<std::size_t>(hi));
  };
  const auto [h0, h1] = axis(top_h, lower.height);
  const auto [w0, w1] = axis(top_w, lower.width);
  return {h0, h1, w0, w1};
}

}  // namespace stnet
