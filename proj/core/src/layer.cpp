#include "stnet/layer.hpp"

#include <array>
#include <utility>

namespace stnet {
namespace {

constexpr std::array<std::pair<LayerKind, std::string_view>, 7> kKindNames{{
    {LayerKind::conv, "conv"},
    {LayerKind::maxpool, "maxpool"},
    {LayerKind::avgpool, "avgpool"},
    {LayerKind::relu, "relu"},
    {LayerKind::fc, "fc"},
    {LayerKind::softmax, "softmax"},
    {LayerKind::flatten, "flatten"},
}};

std::size_t windowed_extent(std::size_t in, const LayerSpec& layer) {
  const std::size_t padded = in + 2 * layer.padding;
  if (padded < layer.kernel) {
    throw ShapeError("layer '" + layer.name + "': kernel " + std::to_string(layer.kernel) +
                     " larger than padded input " + std::to_string(padded));
  }
  return (padded - layer.kernel) / layer.stride + 1;
}

}  // namespace

std::string_view to_string(LayerKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

std::optional<LayerKind> parse_layer_kind(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  return std::nullopt;
}

LayerSpec LayerSpec::conv(std::string name, std::size_t kernel, std::size_t stride,
                          std::size_t padding, Tensor weights, std::vector<float> bias) {
  LayerSpec l;
  l.name = std::move(name);
  l.kind = LayerKind::conv;
  l.kernel = kernel;
  l.stride = stride;
  l.padding = padding;
  l.out_channels = weights.dims.empty() ? 0 : weights.dims[0];
  l.weights = std::move(weights);
  l.bias = std::move(bias);
  validate_layer(l);
  return l;
}

LayerSpec LayerSpec::maxpool(std::string name, std::size_t kernel, std::size_t stride,
                             std::size_t padding) {
  LayerSpec l;
  l.name = std::move(name);
  l.kind = LayerKind::maxpool;
  l.kernel = kernel;
  l.stride = stride;
  l.padding = padding;
  validate_layer(l);
  return l;
}

LayerSpec LayerSpec::avgpool(std::string name, std::size_t kernel, std::size_t stride,
                             std::size_t padding) {
  LayerSpec l = maxpool(std::move(name), kernel, stride, padding);
  l.kind = LayerKind::avgpool;
  return l;
}

LayerSpec LayerSpec::relu(std::string name) {
  LayerSpec l;
  l.name = std::move(name);
  l.kind = LayerKind::relu;
  return l;
}

LayerSpec LayerSpec::softmax(std::string name) {
  LayerSpec l;
  l.name = std::move(name);
  l.kind = LayerKind::softmax;
  return l;
}

LayerSpec LayerSpec::flatten(std::string name) {
  LayerSpec l;
  l.name = std::move(name);
  l.kind = LayerKind::flatten;
  return l;
}

LayerSpec LayerSpec::fc(std::string name, Tensor weights, std::vector<float> bias) {
  LayerSpec l;
  l.name = std::move(name);
  l.kind = LayerKind::fc;
  l.out_channels = weights.dims.empty() ? 0 : weights.dims[0];
  l.weights = std::move(weights);
  l.bias = std::move(bias);
  validate_layer(l);
  return l;
}

std::size_t LayerSpec::in_channels() const noexcept {
  return weights.rank() >= 2 ? weights.dims[1] : 0;
}

void validate_layer(const LayerSpec& layer) {
  const std::string where = "layer '" + layer.name + "'";
  switch (layer.kind) {
    case LayerKind::conv: {
      const auto& d = layer.weights.dims;
      if (d.size() != 4 || d[2] != layer.kernel || d[3] != layer.kernel) {
        throw ShapeError(where + ": conv weights must be out x in x k x k with k = " +
                         std::to_string(layer.kernel));
      }
      if (d[0] != layer.out_channels || d[1] == 0 || d[0] == 0) {
        throw ShapeError(where + ": conv weight channel counts inconsistent");
      }
      if (layer.bias.size() != layer.out_channels) {
        throw ShapeError(where + ": bias length " + std::to_string(layer.bias.size()) +
                         " != out_channels " + std::to_string(layer.out_channels));
      }
      [[fallthrough]];
    }
    case LayerKind::maxpool:
    case LayerKind::avgpool:
      if (layer.kernel == 0 || layer.stride == 0) {
        throw ShapeError(where + ": kernel and stride must be positive");
      }
      if (layer.padding >= layer.kernel) {
        throw ShapeError(where + ": padding must be smaller than the kernel");
      }
      break;
    case LayerKind::fc: {
      const auto& d = layer.weights.dims;
      if (d.size() != 2 || d[0] == 0 || d[1] == 0 || d[0] != layer.out_channels) {
        throw ShapeError(where + ": fc weights must be out x in");
      }
      if (layer.bias.size() != layer.out_channels) {
        throw ShapeError(where + ": bias length " + std::to_string(layer.bias.size()) +
                         " != out_channels " + std::to_string(layer.out_channels));
      }
      break;
    }
    case LayerKind::relu:
    case LayerKind::softmax:
    case LayerKind::flatten:
      break;
  }
}

Shape3 output_shape(const LayerSpec& layer, const Shape3& input) {
  switch (layer.kind) {
    case LayerKind::conv:
      if (input.channels != layer.in_channels()) {
        throw ShapeError("layer '" + layer.name + "': expects " +
                         std::to_string(layer.in_channels()) + " input channels, got " +
                         std::to_string(input.channels));
      }
      return {windowed_extent(input.height, layer), windowed_extent(input.width, layer),
              layer.out_channels};
    case LayerKind::maxpool:
    case LayerKind::avgpool:
      return {windowed_extent(input.height, layer), windowed_extent(input.width, layer),
              input.channels};
    case LayerKind::relu:
    case LayerKind::softmax:
      return input;
    case LayerKind::flatten:
      return {1, 1, input.size()};
    case LayerKind::fc:
      if (input.height != 1 || input.width != 1 || input.channels != layer.in_channels()) {
        throw ShapeError("layer '" + layer.name + "': fc expects a flattened 1x1x" +
                         std::to_string(layer.in_channels()) + " input, got " + to_string(input));
      }
      return {1, 1, layer.out_channels};
  }
  return input;
}

}  // namespace stnet
