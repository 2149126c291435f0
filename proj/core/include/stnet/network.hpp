#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stnet/layer.hpp"
#include "stnet/rf_geometry.hpp"
#include "stnet/volume.hpp"

namespace stnet {

struct ExecOptions {
  // Worker threads for per-channel / per-node parallel loops. Results are
  // bit-identical for every value.
  unsigned threads = 1;
};

// Per-channel affine preprocessing applied to images before the first layer:
// x' = (x - mean[c]) * scale.
struct Preprocess {
  std::vector<float> mean;
  float scale = 1.0f;
};

// Attention hyperparameters carried with a model; CLI flags override them.
struct AttentionDefaults {
  std::optional<std::string> stop_layer;
  std::optional<int> offset_fc;
  std::optional<int> offset_bridge;  // negative disables bridge pruning
  std::optional<double> sc_alpha;
};

// Sequential network. Trace index i holds the input of layer i; trace index
// layers.size() holds the network output.
class Network {
 public:
  Network() = default;
  Network(Shape3 input, std::vector<LayerSpec> layers);

  const Shape3& input_shape() const noexcept { return input_; }
  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  std::size_t depth() const noexcept { return layers_.size(); }

  // Shape of trace volume i, 0 <= i <= depth().
  const Shape3& volume_shape(std::size_t i) const { return shapes_.at(i); }
  const std::vector<Shape3>& volume_shapes() const noexcept { return shapes_; }

  // Index of the flatten layer, if any.
  std::optional<std::size_t> bridge_index() const noexcept { return bridge_; }

  // Trace index of the volume produced by the named layer ("input" is 0).
  std::size_t trace_index_of(std::string_view layer_name) const;

  // Geometry of trace volume i; throws for volumes past the bridge.
  RFGeometry geometry_at(std::size_t trace_index) const;

  std::size_t class_count() const noexcept { return shapes_.back().size(); }

  Preprocess preprocess;
  std::vector<std::string> class_names;
  AttentionDefaults attention;
  std::string name;

 private:
  Shape3 input_{};
  std::vector<LayerSpec> layers_;
  std::vector<Shape3> shapes_;
  std::optional<std::size_t> bridge_;
};

// z^0 .. z^L for one image.
struct ActivationTrace {
  std::vector<FeatureVolume> volumes;

  const FeatureVolume& input() const { return volumes.front(); }
  const FeatureVolume& output() const { return volumes.back(); }
};

FeatureVolume conv_forward(const FeatureVolume& input, const LayerSpec& layer,
                           const ExecOptions& exec = {});
FeatureVolume maxpool_forward(const FeatureVolume& input, const LayerSpec& layer);
FeatureVolume avgpool_forward(const FeatureVolume& input, const LayerSpec& layer);
FeatureVolume relu_forward(const FeatureVolume& input);
FeatureVolume softmax_forward(const FeatureVolume& input);
FeatureVolume flatten_forward(const FeatureVolume& input);
FeatureVolume fc_forward(const FeatureVolume& input, const LayerSpec& layer,
                         const ExecOptions& exec = {});

FeatureVolume layer_forward(const FeatureVolume& input, const LayerSpec& layer,
                            const ExecOptions& exec = {});

// Applies the network's preprocessing to a raw [0,1] image.
FeatureVolume preprocess_image(const Network& net, const FeatureVolume& image);

// Preprocesses the image (trace volume 0) and runs every layer on it.
ActivationTrace network_forward(const Network& net, const FeatureVolume& image,
                                const ExecOptions& exec = {});

}  // namespace stnet
