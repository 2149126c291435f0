#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stnet/volume.hpp"

namespace stnet {

enum class LayerKind { conv, maxpool, avgpool, relu, fc, softmax, flatten };

std::string_view to_string(LayerKind kind);
std::optional<LayerKind> parse_layer_kind(std::string_view name);

// Layers that carry a spatial window (conv and pooling).
constexpr bool is_windowed(LayerKind kind) noexcept {
  return kind == LayerKind::conv || kind == LayerKind::maxpool || kind == LayerKind::avgpool;
}

// Layers the TD pass copies gating straight through.
constexpr bool is_elementwise(LayerKind kind) noexcept {
  return kind == LayerKind::relu || kind == LayerKind::softmax;
}

// One layer of a sequential network.
//
// conv weights are out x in x k x k, fc weights are out x in. Pooling and
// elementwise layers carry no weights. `flatten` is the bridge: it turns an
// H x W x C volume into a 1 x 1 x (C*H*W) vector in storage order.
struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::relu;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t out_channels = 0;
  Tensor weights;
  std::vector<float> bias;

  static LayerSpec conv(std::string name, std::size_t kernel, std::size_t stride,
                        std::size_t padding, Tensor weights, std::vector<float> bias);
  static LayerSpec maxpool(std::string name, std::size_t kernel, std::size_t stride,
                           std::size_t padding = 0);
  static LayerSpec avgpool(std::string name, std::size_t kernel, std::size_t stride,
                           std::size_t padding = 0);
  static LayerSpec relu(std::string name);
  static LayerSpec softmax(std::string name);
  static LayerSpec flatten(std::string name);
  static LayerSpec fc(std::string name, Tensor weights, std::vector<float> bias);

  std::size_t in_channels() const noexcept;
};

// Output shape for a given input shape; throws ShapeError when the layer
// cannot consume it.
Shape3 output_shape(const LayerSpec& layer, const Shape3& input);

// Internal consistency of a layer's own fields (weights vs. declared sizes).
void validate_layer(const LayerSpec& layer);

}  // namespace stnet
