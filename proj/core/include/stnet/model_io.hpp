#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "stnet/network.hpp"
#include "stnet/volume.hpp"

namespace stnet {

// Named tensors in file order.
class TensorTable {
 public:
  // Throws ConfigError on a duplicate name.
  void add(std::string name, Tensor tensor);

  const Tensor* find(const std::string& name) const;
  const Tensor& at(const std::string& name) const;

  std::size_t size() const noexcept { return entries_.size(); }
  const std::vector<std::pair<std::string, Tensor>>& entries() const noexcept { return entries_; }

  friend bool operator==(const TensorTable& a, const TensorTable& b) { return a.entries_ == b.entries_; }

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// STNT layout, all integers little-endian:
//   "STNT" | u16 version | u32 count |
//   count x ( u16 name_len | name | u8 rank | u32 dims[rank] | f32 payload[prod(dims)] )
inline constexpr std::uint16_t kWeightFormatVersion = 1;

std::vector<std::uint8_t> encode_weights(const TensorTable& table);
TensorTable decode_weights(std::span<const std::uint8_t> bytes);

TensorTable load_weights(const std::filesystem::path& path);
void save_weights(const TensorTable& table, const std::filesystem::path& path);

// Builds a Network from its JSON config, resolving tensors by name.
Network network_from_json(const nlohmann::json& config, const TensorTable& weights);
Network load_network(const std::filesystem::path& config_path, const TensorTable& weights);

struct SerializedNetwork {
  nlohmann::json config;
  TensorTable weights;
};

// Inverse of network_from_json; tensors are named "<layer>.weight" and
// "<layer>.bias".
SerializedNetwork network_to_json(const Network& net);
void save_network(const Network& net, const std::filesystem::path& config_path,
                  const std::filesystem::path& weights_path);

}  // namespace stnet
