#pragma once

#include <cstddef>
#include <span>

#include "stnet/layer.hpp"
#include "stnet/volume.hpp"

namespace stnet {

// Accumulated receptive field of a node at some depth, in input pixels.
// Node i along an axis is centered at offset + i * jump and covers rf_size
// pixels. Offsets stay fractional until pixel projection.
struct RFGeometry {
  long rf_size = 1;
  long jump = 1;
  double offset = 0.0;

  double center(std::size_t i) const noexcept {
    return offset + static_cast<double>(i) * static_cast<double>(jump);
  }

  friend bool operator==(const RFGeometry&, const RFGeometry&) = default;
};

// Composes the geometry of the given layers in bottom-up order. Elementwise
// layers (relu, softmax) are identities; flatten and fc throw ShapeError.
RFGeometry rf_geometry(std::span<const LayerSpec> layers);

// Half-open index ranges [h_begin, h_end) x [w_begin, w_end) of the lower
// volume feeding one top node, clipped to valid (unpadded) positions.
struct Window {
  std::size_t h_begin = 0;
  std::size_t h_end = 0;
  std::size_t w_begin = 0;
  std::size_t w_end = 0;

  std::size_t rows() const noexcept { return h_end - h_begin; }
  std::size_t cols() const noexcept { return w_end - w_begin; }
  std::size_t area() const noexcept { return rows() * cols(); }
  friend bool operator==(const Window&, const Window&) = default;
};

// Window of the lower volume seen by the top node at (top_h, top_w) of a
// conv or pooling layer. Covers all lower channels for conv; pooling reads
// only the matching channel, which the caller selects.
Window rf_window(const LayerSpec& layer, const Shape3& lower, std::size_t top_h,
                 std::size_t top_w);

}  // namespace stnet
