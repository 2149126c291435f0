#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "stnet/volume.hpp"

namespace stnet {

// Binary Netpbm image, maxval 255. channels == 1 is P5, 3 is P6. Pixels are
// interleaved row-major exactly as stored in the file.
struct NetpbmImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;
  std::vector<std::uint8_t> pixels;

  friend bool operator==(const NetpbmImage&, const NetpbmImage&) = default;
};

// Throws FormatError for ASCII variants, maxval != 255, malformed headers or
// short payloads.
NetpbmImage decode_netpbm(std::span<const std::uint8_t> bytes);
// Canonical header "P5\n<w> <h>\n255\n" followed by the payload.
std::vector<std::uint8_t> encode_netpbm(const NetpbmImage& image);

NetpbmImage read_netpbm(const std::filesystem::path& path);
void write_netpbm(const NetpbmImage& image, const std::filesystem::path& path);

// Pixel values scaled to [0, 1].
FeatureVolume to_volume(const NetpbmImage& image);
// Inverse of to_volume: clamps to [0, 1] and rounds to the nearest level.
NetpbmImage from_volume(const FeatureVolume& volume);

FeatureVolume read_image(const std::filesystem::path& path);
void write_image(const FeatureVolume& volume, const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(std::span<const std::uint8_t> bytes, const std::filesystem::path& path);

}  // namespace stnet
