#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stnet/attention.hpp"
#include "stnet/network.hpp"
#include "stnet/rf_geometry.hpp"
#include "stnet/volume.hpp"

namespace stnet {

struct ImageDims {
  std::size_t height = 0;
  std::size_t width = 0;
};

// Channel-collapsed gating volume A = sum_c g[.,.,c].
struct AttentionMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;  // row-major
  std::string layer;
  std::size_t class_k = 0;

  double at(std::size_t h, std::size_t w) const { return values[h * width + w]; }
  double sum() const;
  std::size_t nonzero() const;
};

AttentionMap attention_map(const GatingVolume& gating, std::string layer = {},
                           std::size_t class_k = 0);

enum class ThresholdMode {
  mean_all,      // mean over every cell, zeros included
  mean_nonzero,  // mean over nonzero cells only
};

// Zeroes every entry strictly below the map mean.
AttentionMap threshold_map(const AttentionMap& map, ThresholdMode mode = ThresholdMode::mean_all);

// Input-pixel coordinates; x is the column, y the row.
struct Point {
  long x = 0;
  long y = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

// Projects every nonzero cell to the input pixel at its RF center, rounding
// half up and clipping to the image.
std::vector<Point> map_to_input(const AttentionMap& map, const RFGeometry& geom, ImageDims image);

// Inclusive pixel box.
struct BBox {
  long x_min = 0;
  long y_min = 0;
  long x_max = 0;
  long y_max = 0;

  long width() const noexcept { return x_max - x_min + 1; }
  long height() const noexcept { return y_max - y_min + 1; }
  long area() const noexcept { return width() * height(); }
  bool contains(const Point& p) const noexcept {
    return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
  }
  friend bool operator==(const BBox&, const BBox&) = default;
};

// Tight box around the points padded by floor(rf_size / 2) on every side and
// clipped to the image. Throws NoAttendedRegion for an empty point set.
BBox propose_bbox(std::span<const Point> points, const RFGeometry& geom, ImageDims image);

double iou(const BBox& a, const BBox& b);

struct LocalizeConfig {
  SelectionConfig selection;
  ThresholdMode threshold = ThresholdMode::mean_all;
};

struct Localization {
  TdResult td;
  RFGeometry geometry;
  AttentionMap map;
  AttentionMap thresholded;
  std::vector<Point> points;
  BBox box;
};

// Forward pass, TD pass from class_k, and box proposal at the stop layer.
Localization localize(const Network& net, const FeatureVolume& image, std::size_t class_k,
                      const LocalizeConfig& config, const ExecOptions& exec = {});

struct Sample {
  std::string path;
  FeatureVolume image;  // raw pixels in [0, 1]
  std::size_t label = 0;
  std::vector<BBox> boxes;
};

// JSON-lines manifest: {"path": ..., "label_index": k, "boxes": [[x0,y0,x1,y1], ...]}
// per line. Relative image paths resolve against the manifest's directory.
std::vector<Sample> load_manifest(const std::filesystem::path& manifest);

struct ImageResult {
  std::string path;
  std::size_t label = 0;
  std::optional<BBox> box;
  double best_iou = 0.0;
  bool correct = false;
  std::string error;
  double active_fraction = 0.0;
};

struct LocalizationReport {
  std::size_t total = 0;
  std::size_t correct = 0;
  double error_rate = 0.0;
  double mean_active_fraction = 0.0;
  double max_active_fraction = 0.0;
  double mean_box_area = 0.0;  // over images that produced a box
  std::vector<ImageResult> images;
};

// Localization protocol: TD initialised from the ground-truth label, correct
// when IoU > 0.5 with any ground-truth box. Per-image failures count as
// incorrect.
LocalizationReport evaluate(std::span<const Sample> dataset, const Network& net,
                            const LocalizeConfig& config, const ExecOptions& exec = {});

nlohmann::json to_json(const BBox& box);
nlohmann::json to_json(const LocalizationReport& report);
std::string format_table(const LocalizationReport& report);

}  // namespace stnet
