#include "stnet/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "stnet/netpbm.hpp"

namespace stnet {

void TensorTable::add(std::string name, Tensor tensor) {
  if (index_.contains(name)) throw ConfigError("duplicate tensor name '" + name + "'");
  if (tensor.data.size() != tensor.element_count()) {
    throw ShapeError("tensor '" + name + "' data length does not match its dimensions");
  }
  index_.emplace(name, entries_.size());
  entries_.emplace_back(std::move(name), std::move(tensor));
}

const Tensor* TensorTable::find(const std::string& name) const {
  const auto it = index_.find(name);
  return it == index_.end() ? nullptr : &entries_[it->second].second;
}

const Tensor& TensorTable::at(const std::string& name) const {
  const Tensor* t = find(name);
  if (!t) throw ConfigError("missing tensor '" + name + "'");
  return *t;
}

namespace {

constexpr char kMagic[4] = {'S', 'T', 'N', 'T'};

class ByteWriter {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename T>
  void le(T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      out_.push_back(static_cast<std::uint8_t>((value >> (8 * i)) & 0xFF));
    }
  }
  void f32(float v) { le(std::bit_cast<std::uint32_t>(v)); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void need(std::size_t n, const std::string& what) const {
    if (bytes_.size() - pos_ < n) throw FormatError("truncated " + what, pos_);
  }
  template <typename T>
  T le(const std::string& what) {
    need(sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v = static_cast<T>(v | (static_cast<T>(bytes_[pos_ + i]) << (8 * i)));
    }
    pos_ += sizeof(T);
    return v;
  }
  std::span<const std::uint8_t> take(std::size_t n, const std::string& what) {
    need(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_weights(const TensorTable& table) {
  ByteWriter w;
  w.bytes(kMagic, 4);
  w.le<std::uint16_t>(kWeightFormatVersion);
  w.le<std::uint32_t>(static_cast<std::uint32_t>(table.size()));
  for (const auto& [name, tensor] : table.entries()) {
    if (name.size() > 0xFFFF) throw ConfigError("tensor name too long: '" + name + "'");
    if (tensor.rank() > 0xFF) throw ConfigError("tensor '" + name + "' rank too large");
    w.le<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.le<std::uint8_t>(static_cast<std::uint8_t>(tensor.rank()));
    for (std::size_t d : tensor.dims) {
      if (d > 0xFFFFFFFFu) throw ConfigError("tensor '" + name + "' dimension too large");
      w.le<std::uint32_t>(static_cast<std::uint32_t>(d));
    }
    for (float v : tensor.data) w.f32(v);
  }
  return w.take();
}

TensorTable decode_weights(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  const auto magic = r.take(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw FormatError("bad magic (expected STNT)", 0);
  const auto version_at = r.pos();
  const auto version = r.le<std::uint16_t>("version");
  if (version != kWeightFormatVersion) {
    throw FormatError("unsupported STNT version " + std::to_string(version), version_at);
  }
  const auto count = r.le<std::uint32_t>("tensor count");

  TensorTable table;
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::size_t entry_at = r.pos();
    const auto name_len = r.le<std::uint16_t>("tensor name length");
    const auto raw_name = r.take(name_len, "tensor name");
    std::string name(raw_name.begin(), raw_name.end());
    const std::string label = "tensor '" + name + "'";
    const auto rank = r.le<std::uint8_t>(label + " rank");
    std::vector<std::size_t> dims(rank);
    std::size_t elements = 1;
    for (auto& d : dims) {
      d = r.le<std::uint32_t>(label + " dims");
      if (d != 0 && elements > r.remaining() / d) {
        throw FormatError("truncated " + label + " payload", r.pos());
      }
      elements *= d;
    }
    if (elements > r.remaining() / 4) throw FormatError("truncated " + label + " payload", r.pos());
    const auto payload = r.take(elements * 4, label + " payload");
    std::vector<float> data(elements);
    for (std::size_t i = 0; i < elements; ++i) {
      std::uint32_t bits = 0;
      for (std::size_t b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(payload[i * 4 + b]) << (8 * b);
      data[i] = std::bit_cast<float>(bits);
    }
    if (table.find(name)) throw FormatError("duplicate " + label, entry_at);
    table.add(std::move(name), Tensor(std::move(dims), std::move(data)));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after last tensor", r.pos());
  return table;
}

TensorTable load_weights(const std::filesystem::path& path) {
  try {
    return decode_weights(read_file_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.detail(), e.offset());
  }
}

void save_weights(const TensorTable& table, const std::filesystem::path& path) {
  write_file_bytes(encode_weights(table), path);
}

namespace {

using nlohmann::json;

std::size_t get_count(const json& j, const char* key, std::size_t fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError(std::string("'") + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

Tensor tensor_ref(const json& layer, const char* key, const TensorTable& weights,
                  const std::string& layer_name) {
  if (!layer.contains(key)) {
    throw ConfigError("layer '" + layer_name + "' needs a '" + key + "' tensor name");
  }
  const auto name = layer.at(key).get<std::string>();
  const Tensor* t = weights.find(name);
  if (!t) throw ConfigError("missing tensor '" + name + "' for layer '" + layer_name + "'");
  return *t;
}

}  // namespace

Network network_from_json(const json& config, const TensorTable& weights) {
  try {
    const auto& in = config.at("input");
    const Shape3 input{get_count(in, "height", 0), get_count(in, "width", 0),
                       get_count(in, "channels", 0)};

    std::vector<LayerSpec> layers;
    for (const auto& lj : config.at("layers")) {
      const auto name = lj.at("name").get<std::string>();
      const auto type = lj.at("type").get<std::string>();
      const auto kind = parse_layer_kind(type);
      if (!kind) throw ConfigError("layer '" + name + "': unknown type '" + type + "'");
      const std::size_t kernel = get_count(lj, "kernel", 1);
      const std::size_t stride = get_count(lj, "stride", 1);
      const std::size_t padding = get_count(lj, "padding", 0);

      LayerSpec layer;
      switch (*kind) {
        case LayerKind::conv:
        case LayerKind::fc: {
          Tensor w = tensor_ref(lj, "weights", weights, name);
          Tensor b = tensor_ref(lj, "bias", weights, name);
          if (b.rank() != 1) throw ShapeError("layer '" + name + "': bias must be a vector");
          layer = *kind == LayerKind::conv
                      ? LayerSpec::conv(name, kernel, stride, padding, std::move(w), std::move(b.data))
                      : LayerSpec::fc(name, std::move(w), std::move(b.data));
          if (lj.contains("out_channels") &&
              get_count(lj, "out_channels", 0) != layer.out_channels) {
            throw ShapeError("layer '" + name + "': out_channels does not match weight shape");
          }
          break;
        }
        case LayerKind::maxpool:
          layer = LayerSpec::maxpool(name, kernel, stride, padding);
          break;
        case LayerKind::avgpool:
          layer = LayerSpec::avgpool(name, kernel, stride, padding);
          break;
        case LayerKind::relu:
          layer = LayerSpec::relu(name);
          break;
        case LayerKind::softmax:
          layer = LayerSpec::softmax(name);
          break;
        case LayerKind::flatten:
          layer = LayerSpec::flatten(name);
          break;
      }
      layers.push_back(std::move(layer));
    }

    Network net(input, std::move(layers));
    net.name = config.value("name", std::string{});
    if (config.contains("preprocess")) {
      const auto& pre = config.at("preprocess");
      net.preprocess.mean = pre.value("mean", std::vector<float>{});
      net.preprocess.scale = pre.value("scale", 1.0f);
    }
    if (config.contains("classes")) {
      net.class_names = config.at("classes").get<std::vector<std::string>>();
      if (net.class_names.size() != net.class_count()) {
        throw ConfigError("'classes' lists " + std::to_string(net.class_names.size()) +
                          " names for " + std::to_string(net.class_count()) + " outputs");
      }
    }
    if (config.contains("attention")) {
      const auto& a = config.at("attention");
      if (a.contains("stop_layer")) net.attention.stop_layer = a.at("stop_layer").get<std::string>();
      if (a.contains("offset_fc")) net.attention.offset_fc = a.at("offset_fc").get<int>();
      if (a.contains("offset_bridge")) {
        // null disables bridge pruning; represented as -1.
        net.attention.offset_bridge =
            a.at("offset_bridge").is_null() ? -1 : a.at("offset_bridge").get<int>();
      }
      if (a.contains("sc_alpha")) net.attention.sc_alpha = a.at("sc_alpha").get<double>();
      if (net.attention.stop_layer) net.trace_index_of(*net.attention.stop_layer);
    }
    return net;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("network config: ") + e.what());
  }
}

Network load_network(const std::filesystem::path& config_path, const TensorTable& weights) {
  std::ifstream in(config_path);
  if (!in) throw ConfigError("cannot open network config '" + config_path.string() + "'");
  json config;
  try {
    config = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(config_path.string() + ": " + e.what());
  }
  return network_from_json(config, weights);
}

SerializedNetwork network_to_json(const Network& net) {
  SerializedNetwork out;
  json& c = out.config;
  if (!net.name.empty()) c["name"] = net.name;
  c["input"] = {{"height", net.input_shape().height},
                {"width", net.input_shape().width},
                {"channels", net.input_shape().channels}};
  if (!net.preprocess.mean.empty() || net.preprocess.scale != 1.0f) {
    c["preprocess"] = {{"mean", net.preprocess.mean}, {"scale", net.preprocess.scale}};
  }
  if (!net.class_names.empty()) c["classes"] = net.class_names;
  json attention = json::object();
  if (net.attention.stop_layer) attention["stop_layer"] = *net.attention.stop_layer;
  if (net.attention.offset_fc) attention["offset_fc"] = *net.attention.offset_fc;
  if (net.attention.offset_bridge) {
    attention["offset_bridge"] =
        *net.attention.offset_bridge < 0 ? json(nullptr) : json(*net.attention.offset_bridge);
  }
  if (net.attention.sc_alpha) attention["sc_alpha"] = *net.attention.sc_alpha;
  if (!attention.empty()) c["attention"] = std::move(attention);

  json layers = json::array();
  for (const auto& l : net.layers()) {
    json lj{{"name", l.name}, {"type", std::string(to_string(l.kind))}};
    if (is_windowed(l.kind)) {
      lj["kernel"] = l.kernel;
      lj["stride"] = l.stride;
      lj["padding"] = l.padding;
    }
    if (l.kind == LayerKind::conv || l.kind == LayerKind::fc) {
      lj["out_channels"] = l.out_channels;
      lj["weights"] = l.name + ".weight";
      lj["bias"] = l.name + ".bias";
      out.weights.add(l.name + ".weight", l.weights);
      out.weights.add(l.name + ".bias", Tensor({l.bias.size()}, l.bias));
    }
    layers.push_back(std::move(lj));
  }
  c["layers"] = std::move(layers);
  return out;
}

void save_network(const Network& net, const std::filesystem::path& config_path,
                  const std::filesystem::path& weights_path) {
  const auto s = network_to_json(net);
  std::ofstream out(config_path);
  if (!out) throw ConfigError("cannot write '" + config_path.string() + "'");
  out << s.config.dump(2) << '\n';
  save_weights(s.weights, weights_path);
}

}  // namespace stnet
