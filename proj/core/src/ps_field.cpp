#include "stnet/attention.hpp"

namespace stnet {

PSField ps_activities(const FeatureVolume& lower, const LayerSpec& layer, std::size_t top_h,
                      std::size_t top_w, std::size_t top_c) {
  const Shape3 top = output_shape(layer, lower.shape());
  if (top_h >= top.height || top_w >= top.width || top_c >= top.channels) {
    throw ShapeError("top index outside layer '" + layer.name + "'");
  }

  PSField ps;
  switch (layer.kind) {
    case LayerKind::fc: {
      const std::size_t n = layer.in_channels();
      const float* row = layer.weights.data.data() + top_c * n;
      ps.window = {0, 1, 0, 1};
      ps.channels = n;
      ps.values.resize(n);
      ps.source_indices.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        ps.values[i] = static_cast<double>(lower[i]) * row[i];
        ps.source_indices[i] = i;
      }
      return ps;
    }
    case LayerKind::conv: {
      ps.spatial = true;
      ps.window = rf_window(layer, lower.shape(), top_h, top_w);
      ps.channels = lower.channels();
      const std::size_t k = layer.kernel;
      const long h_origin = static_cast<long>(top_h * layer.stride) - static_cast<long>(layer.padding);
      const long w_origin = static_cast<long>(top_w * layer.stride) - static_cast<long>(layer.padding);
      const float* kernel_c = layer.weights.data.data() + top_c * ps.channels * k * k;
      ps.values.reserve(ps.channels * ps.window.area());
      ps.source_indices.reserve(ps.channels * ps.window.area());
      for (std::size_t ic = 0; ic < ps.channels; ++ic) {
        for (std::size_t h = ps.window.h_begin; h < ps.window.h_end; ++h) {
          const auto kh = static_cast<std::size_t>(static_cast<long>(h) - h_origin);
          for (std::size_t w = ps.window.w_begin; w < ps.window.w_end; ++w) {
            const auto kw = static_cast<std::size_t>(static_cast<long>(w) - w_origin);
            const double weight = kernel_c[(ic * k + kh) * k + kw];
            ps.values.push_back(static_cast<double>(lower.at(h, w, ic)) * weight);
            ps.source_indices.push_back(lower.index(h, w, ic));
          }
        }
      }
      return ps;
    }
    case LayerKind::maxpool:
    case LayerKind::avgpool: {
      ps.spatial = true;
      ps.window = rf_window(layer, lower.shape(), top_h, top_w);
      ps.channels = 1;
      const double inv_area = 1.0 / static_cast<double>(layer.kernel * layer.kernel);
      std::size_t best = 0;
      for (std::size_t h = ps.window.h_begin; h < ps.window.h_end; ++h) {
        for (std::size_t w = ps.window.w_begin; w < ps.window.w_end; ++w) {
          const float a = lower.at(h, w, top_c);
          if (layer.kind == LayerKind::maxpool) {
            // First maximum in scan order takes the whole activity.
            if (ps.values.empty() || a > ps.values[best]) best = ps.values.size();
            ps.values.push_back(a);
          } else {
            ps.values.push_back(static_cast<double>(a) * inv_area);
          }
          ps.source_indices.push_back(lower.index(h, w, top_c));
        }
      }
      if (layer.kind == LayerKind::maxpool) {
        for (std::size_t i = 0; i < ps.values.size(); ++i) {
          if (i != best) ps.values[i] = 0.0;
        }
      }
      return ps;
    }
    case LayerKind::relu:
    case LayerKind::softmax:
    case LayerKind::flatten:
      break;
  }
  throw Error("layer '" + layer.name + "' (" + std::string(to_string(layer.kind)) +
              ") has no PS field");
}

}  // namespace stnet
