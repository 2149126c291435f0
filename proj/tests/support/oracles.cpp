#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <set>

namespace stnet::testing {

FeatureVolume naive_conv(const FeatureVolume& input, const LayerSpec& layer) {
  const std::size_t k = layer.kernel, s = layer.stride, p = layer.padding;
  const std::size_t H = input.height(), W = input.width(), C = input.channels();
  const std::size_t PH = H + 2 * p, PW = W + 2 * p;
  std::vector<double> padded(PH * PW * C, 0.0);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t w = 0; w < W; ++w) padded[(c * PH + h + p) * PW + w + p] = input.at(h, w, c);

  const std::size_t OH = (PH - k) / s + 1, OW = (PW - k) / s + 1, OC = layer.out_channels;
  FeatureVolume out({OH, OW, OC});
  for (std::size_t oc = 0; oc < OC; ++oc)
    for (std::size_t oh = 0; oh < OH; ++oh)
      for (std::size_t ow = 0; ow < OW; ++ow) {
        double acc = layer.bias[oc];
        for (std::size_t ic = 0; ic < C; ++ic)
          for (std::size_t kh = 0; kh < k; ++kh)
            for (std::size_t kw = 0; kw < k; ++kw)
              acc += padded[(ic * PH + oh * s + kh) * PW + ow * s + kw] *
                     static_cast<double>(layer.weights.data[((oc * C + ic) * k + kh) * k + kw]);
        out.at(oh, ow, oc) = static_cast<float>(acc);
      }
  return out;
}

FeatureVolume naive_fc(const FeatureVolume& input, const LayerSpec& layer) {
  const std::size_t n_in = input.size();
  FeatureVolume out({1, 1, layer.out_channels});
  for (std::size_t o = 0; o < layer.out_channels; ++o) {
    double acc = layer.bias[o];
    for (std::size_t i = 0; i < n_in; ++i) {
      acc += static_cast<double>(input.data()[i]) * layer.weights.data[o * n_in + i];
    }
    out[o] = static_cast<float>(acc);
  }
  return out;
}

std::optional<RFGeometry> footprint_geometry(std::span<const LayerSpec> layers,
                                             std::size_t input_size, std::size_t channels) {
  // Positive weights and zero bias: a +1 anywhere in the footprint strictly
  // raises the node.
  std::vector<LayerSpec> positive(layers.begin(), layers.end());
  for (auto& l : positive) {
    std::fill(l.weights.data.begin(), l.weights.data.end(), 1.0f);
    std::fill(l.bias.begin(), l.bias.end(), 0.0f);
  }
  const Network net({input_size, input_size, channels}, positive);
  const FeatureVolume zero(net.input_shape());
  const FeatureVolume base = network_forward(net, zero).output();
  const std::size_t top_rows = base.height();

  // rows_of[t] = input rows whose perturbation changes top row t.
  std::vector<std::vector<long>> rows_of(top_rows);
  const std::size_t col = input_size / 2;
  for (std::size_t r = 0; r < input_size; ++r) {
    FeatureVolume probe = zero;
    probe.at(r, col, 0) = 1.0f;
    const FeatureVolume top = network_forward(net, probe).output();
    for (std::size_t t = 0; t < top_rows; ++t) {
      bool changed = false;
      for (std::size_t c = 0; c < top.channels() && !changed; ++c)
        for (std::size_t w = 0; w < top.width() && !changed; ++w)
          changed = top.at(t, w, c) != base.at(t, w, c);
      if (changed) rows_of[t].push_back(static_cast<long>(r));
    }
  }

  long rf = 0;
  for (const auto& rows : rows_of) {
    if (!rows.empty()) rf = std::max(rf, rows.back() - rows.front() + 1);
  }
  // Unclipped nodes see the full footprint and do not touch the image edge.
  std::vector<std::pair<std::size_t, double>> centers;
  for (std::size_t t = 0; t < top_rows; ++t) {
    const auto& rows = rows_of[t];
    if (rows.empty() || rows.back() - rows.front() + 1 != rf) continue;
    if (rows.front() == 0 || rows.back() == static_cast<long>(input_size) - 1) continue;
    centers.emplace_back(t, (rows.front() + rows.back()) / 2.0);
  }
  if (centers.size() < 2) return std::nullopt;
  const auto& [t0, c0] = centers[0];
  const auto& [t1, c1] = centers[1];
  RFGeometry g;
  g.rf_size = rf;
  g.jump = static_cast<long>((c1 - c0) / static_cast<double>(t1 - t0));
  g.offset = c0 - static_cast<double>(t0) * static_cast<double>(g.jump);
  return g;
}

bool has_positive_ps(const FeatureVolume& lower, const LayerSpec& layer, std::size_t h,
                     std::size_t w, std::size_t c) {
  if (layer.kind == LayerKind::fc) {
    const std::size_t n = lower.size();
    for (std::size_t i = 0; i < n; ++i) {
      if (static_cast<double>(lower[i]) * layer.weights.data[c * n + i] > 0.0) return true;
    }
    return false;
  }
  const long k = static_cast<long>(layer.kernel);
  const long H = static_cast<long>(lower.height()), W = static_cast<long>(lower.width());
  bool any_positive = false;
  bool seen = false;
  float best = 0.0f;
  for (long kh = 0; kh < k; ++kh) {
    for (long kw = 0; kw < k; ++kw) {
      const long y = static_cast<long>(h * layer.stride) - static_cast<long>(layer.padding) + kh;
      const long x = static_cast<long>(w * layer.stride) - static_cast<long>(layer.padding) + kw;
      if (y < 0 || x < 0 || y >= H || x >= W) continue;
      const auto uy = static_cast<std::size_t>(y), ux = static_cast<std::size_t>(x);
      if (layer.kind == LayerKind::conv) {
        for (std::size_t ic = 0; ic < lower.channels(); ++ic) {
          const float wt = layer.weights.data[((c * lower.channels() + ic) * layer.kernel +
                                               static_cast<std::size_t>(kh)) *
                                                  layer.kernel +
                                              static_cast<std::size_t>(kw)];
          if (static_cast<double>(lower.at(uy, ux, ic)) * wt > 0.0) any_positive = true;
        }
      } else {
        const float a = lower.at(uy, ux, c);
        if (!seen || a > best) best = a;
        seen = true;
      }
    }
  }
  return layer.kind == LayerKind::conv ? any_positive : seen && best > 0.0f;
}

double conservation_error(const Network& net, const ActivationTrace& trace, std::size_t class_k,
                          const SelectionConfig& config) {
  const TdResult td = td_pass(trace, net, class_k, config);
  const auto bridge = net.bridge_index();

  double bridge_removed = 0.0;
  if (bridge && config.offset_bridge && td.stop_index <= *bridge + 1) {
    SelectionConfig unpruned = config;
    unpruned.offset_bridge.reset();
    unpruned.stop_layer = net.layers()[*bridge].name;
    const TdResult raw = td_pass(trace, net, class_k, unpruned);
    const GatingVolume& before = raw.gating[*bridge + 1];
    const GatingVolume& after = td.gating[*bridge + 1];
    for (std::size_t i = 0; i < before.size(); ++i) {
      if (after[i] != 0.0 && after[i] != before[i]) return std::numeric_limits<double>::infinity();
      if (after[i] == 0.0) bridge_removed += before[i];
    }
  }

  double worst = 0.0;
  for (std::size_t i = td.stop_index; i < net.depth(); ++i) {
    const LayerSpec& layer = net.layers()[i];
    const GatingVolume& upper = td.gating[i + 1];
    double expected = sum(upper);
    if (is_windowed(layer.kind) || layer.kind == LayerKind::fc) {
      const Shape3& s = upper.shape();
      for (std::size_t c = 0; c < s.channels; ++c)
        for (std::size_t h = 0; h < s.height; ++h)
          for (std::size_t w = 0; w < s.width; ++w) {
            const double g = upper.at(h, w, c);
            if (g != 0.0 && !has_positive_ps(trace.volumes[i], layer, h, w, c)) expected -= g;
          }
    }
    if (bridge && i == *bridge + 1) expected -= bridge_removed;
    worst = std::max(worst, std::abs(sum(td.gating[i]) - expected));
  }
  return worst;
}

std::optional<double> brute_force_ap(std::span<const double> ps, double epsilon) {
  double neg = 0.0;
  std::vector<double> pos;
  for (double s : ps) (s > 0.0 ? pos.push_back(s) : void(neg += s));
  if (pos.empty()) return std::nullopt;
  std::sort(pos.begin(), pos.end(), std::greater<>());
  for (std::size_t m = 1; m <= pos.size(); ++m) {
    double total = neg;
    for (std::size_t i = 0; i < m; ++i) total += pos[i];
    if (total >= epsilon) return pos[m - 1];
  }
  return pos.back();
}

namespace {

void flood(const std::vector<char>& occupied, std::vector<long>& label, std::size_t rows,
           std::size_t cols, long r, long c, long id) {
  if (r < 0 || c < 0 || r >= static_cast<long>(rows) || c >= static_cast<long>(cols)) return;
  const auto cell = static_cast<std::size_t>(r) * cols + static_cast<std::size_t>(c);
  if (!occupied[cell] || label[cell] >= 0) return;
  label[cell] = id;
  for (long dr = -1; dr <= 1; ++dr)
    for (long dc = -1; dc <= 1; ++dc)
      if (dr != 0 || dc != 0) flood(occupied, label, rows, cols, r + dr, c + dc, id);
}

}  // namespace

std::vector<FloodRegion> flood_fill_regions(const std::vector<char>& occupied,
                                            const std::vector<double>& projected,
                                            std::size_t rows, std::size_t cols) {
  std::vector<long> label(rows * cols, -1);
  long next = 0;
  for (std::size_t cell = 0; cell < rows * cols; ++cell) {
    if (occupied[cell] && label[cell] < 0) {
      flood(occupied, label, rows, cols, static_cast<long>(cell / cols),
            static_cast<long>(cell % cols), next++);
    }
  }
  std::vector<FloodRegion> regions(static_cast<std::size_t>(next));
  for (std::size_t cell = 0; cell < rows * cols; ++cell) {
    if (label[cell] >= 0) {
      auto& r = regions[static_cast<std::size_t>(label[cell])];
      r.cells.push_back(cell);
      r.ps_sum += projected[cell];
    }
  }
  return regions;
}

std::size_t exhaustive_best_region(const std::vector<FloodRegion>& regions, double alpha) {
  std::vector<std::size_t> order(regions.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto score = [&](std::size_t i) {
    return alpha * regions[i].ps_sum + (1.0 - alpha) * static_cast<double>(regions[i].cells.size());
  };
  // Stable sort keeps first-cell order as the final tie-break.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (score(a) != score(b)) return score(a) > score(b);
    return regions[a].ps_sum > regions[b].ps_sum;
  });
  return order.front();
}

FeatureVolume random_volume(std::mt19937& rng, const Shape3& shape, float lo, float hi) {
  std::uniform_real_distribution<float> dist(lo, hi);
  FeatureVolume v(shape);
  for (float& x : v.data()) x = dist(rng);
  return v;
}

Network random_network(std::mt19937& rng, const RandomNetOptions& options) {
  std::uniform_real_distribution<float> weight(-1.0f, 1.0f);
  const auto pick = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  const auto random_tensor = [&](std::vector<std::size_t> dims) {
    Tensor t(std::move(dims));
    for (float& x : t.data) x = weight(rng);
    return t;
  };

  for (;;) {
    const std::size_t size = pick(options.min_input, options.max_input);
    Shape3 shape{size, size, pick(1, 3)};
    const Shape3 input = shape;
    std::vector<LayerSpec> layers;
    const std::size_t spatial = pick(1, options.max_spatial);
    bool ok = true;
    for (std::size_t i = 0; i < spatial && ok; ++i) {
      const std::string id = std::to_string(i);
      LayerSpec layer;
      const std::size_t kind = pick(0, 2);
      const std::size_t k = pick(1, 3);
      const std::size_t s = pick(1, 2);
      const std::size_t p = pick(0, k - 1);
      if (kind == 0) {
        const std::size_t out = pick(1, 3);
        std::vector<float> bias(out);
        for (float& b : bias) b = weight(rng) * 0.2f;
        layer = LayerSpec::conv("conv" + id, k, s, p, random_tensor({out, shape.channels, k, k}),
                                std::move(bias));
      } else if (kind == 1) {
        layer = LayerSpec::maxpool("maxpool" + id, k, s, p);
      } else {
        layer = LayerSpec::avgpool("avgpool" + id, k, s, p);
      }
      try {
        shape = output_shape(layer, shape);
      } catch (const ShapeError&) {
        ok = false;
        break;
      }
      layers.push_back(std::move(layer));
      if (pick(0, 1) == 1) layers.push_back(LayerSpec::relu("relu" + id));
    }
    if (!ok) continue;
    if (options.with_head) {
      layers.push_back(LayerSpec::flatten("flatten"));
      const std::size_t classes = pick(2, 5);
      std::vector<float> bias(classes);
      for (float& b : bias) b = weight(rng) * 0.2f;
      layers.push_back(LayerSpec::fc("fc", random_tensor({classes, shape.size()}), std::move(bias)));
      if (options.allow_softmax && pick(0, 1) == 1) layers.push_back(LayerSpec::softmax("prob"));
    }
    return Network(input, std::move(layers));
  }
}

}  // namespace stnet::testing
