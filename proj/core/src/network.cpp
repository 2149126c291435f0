#include "stnet/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "parallel.hpp"

namespace stnet {

Network::Network(Shape3 input, std::vector<LayerSpec> layers)
    : input_(input), layers_(std::move(layers)) {
  if (input_.size() == 0) throw ShapeError("network input shape must be nonempty");
  shapes_.reserve(layers_.size() + 1);
  shapes_.push_back(input_);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& layer = layers_[i];
    validate_layer(layer);
    if (layer.kind == LayerKind::flatten) {
      if (bridge_) throw ShapeError("network has more than one flatten (bridge) layer");
      bridge_ = i;
    } else if (layer.kind == LayerKind::fc && !bridge_) {
      throw ShapeError("fc layer '" + layer.name + "' before flatten");
    } else if (is_windowed(layer.kind) && bridge_) {
      throw ShapeError("spatial layer '" + layer.name + "' after the bridge");
    }
    shapes_.push_back(output_shape(layer, shapes_.back()));
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    for (std::size_t j = i + 1; j < layers_.size(); ++j) {
      if (layers_[i].name == layers_[j].name) {
        throw ConfigError("duplicate layer name '" + layers_[i].name + "'");
      }
    }
    if (layers_[i].name == "input") throw ConfigError("layer name 'input' is reserved");
  }
}

std::size_t Network::trace_index_of(std::string_view layer_name) const {
  if (layer_name == "input") return 0;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].name == layer_name) return i + 1;
  }
  throw ConfigError("unknown layer '" + std::string(layer_name) + "'");
}

RFGeometry Network::geometry_at(std::size_t trace_index) const {
  if (trace_index > layers_.size()) throw ShapeError("trace index out of range");
  return rf_geometry(std::span<const LayerSpec>(layers_).first(trace_index));
}

FeatureVolume conv_forward(const FeatureVolume& input, const LayerSpec& layer,
                           const ExecOptions& exec) {
  if (layer.kind != LayerKind::conv) throw ShapeError("conv_forward on non-conv layer");
  const Shape3 out_shape = output_shape(layer, input.shape());
  FeatureVolume out(out_shape);
  const std::size_t k = layer.kernel;
  const std::size_t in_c = input.channels();
  const long H = static_cast<long>(input.height());
  const long W = static_cast<long>(input.width());
  const float* w = layer.weights.data.data();

  detail::parallel_for(out_shape.channels, exec.threads, [&](std::size_t oc) {
    const float* kernel_oc = w + oc * in_c * k * k;
    for (std::size_t oh = 0; oh < out_shape.height; ++oh) {
      const long h0 = static_cast<long>(oh * layer.stride) - static_cast<long>(layer.padding);
      for (std::size_t ow = 0; ow < out_shape.width; ++ow) {
        const long w0 = static_cast<long>(ow * layer.stride) - static_cast<long>(layer.padding);
        double acc = layer.bias[oc];
        for (std::size_t ic = 0; ic < in_c; ++ic) {
          const float* kern = kernel_oc + ic * k * k;
          for (std::size_t kh = 0; kh < k; ++kh) {
            const long ih = h0 + static_cast<long>(kh);
            if (ih < 0 || ih >= H) continue;
            for (std::size_t kw = 0; kw < k; ++kw) {
              const long iw = w0 + static_cast<long>(kw);
              if (iw < 0 || iw >= W) continue;
              acc += static_cast<double>(input.at(ih, iw, ic)) * kern[kh * k + kw];
            }
          }
        }
        out.at(oh, ow, oc) = static_cast<float>(acc);
      }
    }
  });
  return out;
}

namespace {

template <typename Reduce>
FeatureVolume pool_forward(const FeatureVolume& input, const LayerSpec& layer, Reduce reduce) {
  const Shape3 out_shape = output_shape(layer, input.shape());
  FeatureVolume out(out_shape);
  for (std::size_t c = 0; c < out_shape.channels; ++c) {
    for (std::size_t oh = 0; oh < out_shape.height; ++oh) {
      for (std::size_t ow = 0; ow < out_shape.width; ++ow) {
        const Window win = rf_window(layer, input.shape(), oh, ow);
        out.at(oh, ow, c) = reduce(input, win, c);
      }
    }
  }
  return out;
}

}  // namespace

FeatureVolume maxpool_forward(const FeatureVolume& input, const LayerSpec& layer) {
  if (layer.kind != LayerKind::maxpool) throw ShapeError("maxpool_forward on non-maxpool layer");
  return pool_forward(input, layer, [](const FeatureVolume& in, const Window& win, std::size_t c) {
    float best = -std::numeric_limits<float>::infinity();
    for (std::size_t h = win.h_begin; h < win.h_end; ++h) {
      for (std::size_t w = win.w_begin; w < win.w_end; ++w) best = std::max(best, in.at(h, w, c));
    }
    return best;
  });
}

FeatureVolume avgpool_forward(const FeatureVolume& input, const LayerSpec& layer) {
  if (layer.kind != LayerKind::avgpool) throw ShapeError("avgpool_forward on non-avgpool layer");
  // Padded positions count as zeros: the divisor is always k^2.
  const double inv_area = 1.0 / static_cast<double>(layer.kernel * layer.kernel);
  return pool_forward(input, layer, [&](const FeatureVolume& in, const Window& win, std::size_t c) {
    double acc = 0.0;
    for (std::size_t h = win.h_begin; h < win.h_end; ++h) {
      for (std::size_t w = win.w_begin; w < win.w_end; ++w) acc += in.at(h, w, c);
    }
    return static_cast<float>(acc * inv_area);
  });
}

FeatureVolume relu_forward(const FeatureVolume& input) {
  FeatureVolume out = input;
  for (float& x : out.data()) x = std::max(x, 0.0f);
  return out;
}

FeatureVolume softmax_forward(const FeatureVolume& input) {
  FeatureVolume out = input;
  if (out.empty()) return out;
  const auto values = out.data();
  const float peak = *std::max_element(values.begin(), values.end());
  double total = 0.0;
  for (float x : values) total += std::exp(static_cast<double>(x) - peak);
  for (float& x : values) x = static_cast<float>(std::exp(static_cast<double>(x) - peak) / total);
  return out;
}

FeatureVolume flatten_forward(const FeatureVolume& input) {
  return input.reshaped({1, 1, input.size()});
}

FeatureVolume fc_forward(const FeatureVolume& input, const LayerSpec& layer,
                         const ExecOptions& exec) {
  if (layer.kind != LayerKind::fc) throw ShapeError("fc_forward on non-fc layer");
  const Shape3 out_shape = output_shape(layer, input.shape());
  FeatureVolume out(out_shape);
  const std::size_t n_in = layer.in_channels();
  const auto x = input.data();
  detail::parallel_for(out_shape.channels, exec.threads, [&](std::size_t o) {
    const float* row = layer.weights.data.data() + o * n_in;
    double acc = layer.bias[o];
    for (std::size_t i = 0; i < n_in; ++i) acc += static_cast<double>(x[i]) * row[i];
    out[o] = static_cast<float>(acc);
  });
  return out;
}

FeatureVolume layer_forward(const FeatureVolume& input, const LayerSpec& layer,
                            const ExecOptions& exec) {
  switch (layer.kind) {
    case LayerKind::conv:
      return conv_forward(input, layer, exec);
    case LayerKind::maxpool:
      return maxpool_forward(input, layer);
    case LayerKind::avgpool:
      return avgpool_forward(input, layer);
    case LayerKind::relu:
      return relu_forward(input);
    case LayerKind::softmax:
      return softmax_forward(input);
    case LayerKind::flatten:
      return flatten_forward(input);
    case LayerKind::fc:
      return fc_forward(input, layer, exec);
  }
  throw ShapeError("unknown layer kind");
}

FeatureVolume preprocess_image(const Network& net, const FeatureVolume& image) {
  if (image.shape() != net.input_shape()) {
    throw ShapeError("image shape " + to_string(image.shape()) + " does not match network input " +
                     to_string(net.input_shape()));
  }
  const auto& pre = net.preprocess;
  if (pre.mean.empty() && pre.scale == 1.0f) return image;
  if (!pre.mean.empty() && pre.mean.size() != image.channels()) {
    throw ConfigError("preprocess mean has " + std::to_string(pre.mean.size()) +
                      " entries for a " + std::to_string(image.channels()) + "-channel input");
  }
  FeatureVolume out = image;
  for (std::size_t c = 0; c < out.channels(); ++c) {
    const float mean = pre.mean.empty() ? 0.0f : pre.mean[c];
    for (std::size_t h = 0; h < out.height(); ++h) {
      for (std::size_t w = 0; w < out.width(); ++w) {
        out.at(h, w, c) = (out.at(h, w, c) - mean) * pre.scale;
      }
    }
  }
  return out;
}

ActivationTrace network_forward(const Network& net, const FeatureVolume& image,
                                const ExecOptions& exec) {
  ActivationTrace trace;
  trace.volumes.reserve(net.depth() + 1);
  trace.volumes.push_back(preprocess_image(net, image));
  for (const auto& layer : net.layers()) {
    trace.volumes.push_back(layer_forward(trace.volumes.back(), layer, exec));
  }
  return trace;
}

}  // namespace stnet
