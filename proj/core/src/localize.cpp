#include "stnet/localize.hpp"

#include <algorithm>
#include <cmath>

namespace stnet {

double AttentionMap::sum() const {
  double total = 0.0;
  for (double v : values) total += v;
  return total;
}

std::size_t AttentionMap::nonzero() const {
  return static_cast<std::size_t>(std::count_if(values.begin(), values.end(),
                                                [](double v) { return v != 0.0; }));
}

AttentionMap attention_map(const GatingVolume& gating, std::string layer, std::size_t class_k) {
  AttentionMap map;
  map.height = gating.height();
  map.width = gating.width();
  map.layer = std::move(layer);
  map.class_k = class_k;
  map.values.assign(gating.shape().plane(), 0.0);
  for (std::size_t c = 0; c < gating.channels(); ++c) {
    const auto sheet = gating.channel(c);
    for (std::size_t i = 0; i < sheet.size(); ++i) map.values[i] += sheet[i];
  }
  return map;
}

AttentionMap threshold_map(const AttentionMap& map, ThresholdMode mode) {
  if (map.values.empty()) throw ShapeError("cannot threshold an empty attention map");
  double total = 0.0;
  std::size_t count = 0;
  for (double v : map.values) {
    if (mode == ThresholdMode::mean_all || v != 0.0) {
      total += v;
      ++count;
    }
  }
  if (count == 0) return map;
  const double mean = total / static_cast<double>(count);
  AttentionMap out = map;
  for (double& v : out.values) {
    if (v < mean) v = 0.0;
  }
  return out;
}

std::vector<Point> map_to_input(const AttentionMap& map, const RFGeometry& geom, ImageDims image) {
  const auto project = [&](std::size_t i, std::size_t extent) {
    const long p = static_cast<long>(std::floor(geom.center(i) + 0.5));
    return std::clamp(p, 0L, static_cast<long>(extent) - 1);
  };
  std::vector<Point> points;
  for (std::size_t h = 0; h < map.height; ++h) {
    for (std::size_t w = 0; w < map.width; ++w) {
      if (map.at(h, w) != 0.0) points.push_back({project(w, image.width), project(h, image.height)});
    }
  }
  return points;
}

BBox propose_bbox(std::span<const Point> points, const RFGeometry& geom, ImageDims image) {
  if (points.empty()) throw NoAttendedRegion();
  BBox box{points[0].x, points[0].y, points[0].x, points[0].y};
  for (const auto& p : points) {
    box.x_min = std::min(box.x_min, p.x);
    box.y_min = std::min(box.y_min, p.y);
    box.x_max = std::max(box.x_max, p.x);
    box.y_max = std::max(box.y_max, p.y);
  }
  const long pad = geom.rf_size / 2;
  const long max_x = static_cast<long>(image.width) - 1;
  const long max_y = static_cast<long>(image.height) - 1;
  box.x_min = std::clamp(box.x_min - pad, 0L, max_x);
  box.y_min = std::clamp(box.y_min - pad, 0L, max_y);
  box.x_max = std::clamp(box.x_max + pad, 0L, max_x);
  box.y_max = std::clamp(box.y_max + pad, 0L, max_y);
  return box;
}

double iou(const BBox& a, const BBox& b) {
  const long iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min) + 1;
  const long ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min) + 1;
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = static_cast<double>(iw) * static_cast<double>(ih);
  const double uni = static_cast<double>(a.area()) + static_cast<double>(b.area()) - inter;
  return inter / uni;
}

Localization localize(const Network& net, const FeatureVolume& image, std::size_t class_k,
                      const LocalizeConfig& config, const ExecOptions& exec) {
  const ActivationTrace trace = network_forward(net, image, exec);
  Localization loc;
  loc.td = td_pass(trace, net, class_k, config.selection, exec);
  const std::size_t stop = loc.td.stop_index;
  try {
    loc.geometry = net.geometry_at(stop);
  } catch (const ShapeError&) {
    throw ConfigError("stop layer '" + config.selection.stop_layer +
                      "' lies past the bridge; attention maps need a spatial layer");
  }
  loc.map = attention_map(loc.td.at_stop(), config.selection.stop_layer, class_k);
  loc.thresholded = threshold_map(loc.map, config.threshold);
  const ImageDims dims{net.input_shape().height, net.input_shape().width};
  loc.points = map_to_input(loc.thresholded, loc.geometry, dims);
  loc.box = propose_bbox(loc.points, loc.geometry, dims);
  return loc;
}

}  // namespace stnet
