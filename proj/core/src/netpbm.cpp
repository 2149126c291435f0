#include "stnet/netpbm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

namespace stnet {
namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t number(const char* field) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    std::size_t value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      if (value > (std::numeric_limits<std::uint32_t>::max() - 9) / 10) {
        throw FormatError(std::string("netpbm ") + field + " too large", start);
      }
      value = value * 10 + static_cast<std::size_t>(bytes_[pos_] - '0');
      ++pos_;
    }
    if (pos_ == start) throw FormatError(std::string("netpbm header: expected ") + field, pos_);
    return value;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  void single_whitespace() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw FormatError("netpbm header: missing whitespace before raster", pos_);
    }
    ++pos_;
  }

  std::size_t pos() const noexcept { return pos_; }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 2;
};

}  // namespace

NetpbmImage decode_netpbm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P') throw FormatError("not a Netpbm file", 0);
  NetpbmImage img;
  switch (bytes[1]) {
    case '5':
      img.channels = 1;
      break;
    case '6':
      img.channels = 3;
      break;
    case '1':
    case '2':
    case '3':
    case '4':
      throw FormatError("unsupported variant P" + std::string(1, static_cast<char>(bytes[1])) +
                            " (only binary P5/P6)",
                        1);
    default:
      throw FormatError("not a Netpbm file", 1);
  }
  HeaderReader header(bytes);
  img.width = header.number("width");
  img.height = header.number("height");
  const std::size_t maxval_at = header.pos();
  const std::size_t maxval = header.number("maxval");
  if (maxval != 255) throw FormatError("unsupported maxval " + std::to_string(maxval), maxval_at);
  header.single_whitespace();
  if (img.width == 0 || img.height == 0) throw FormatError("zero image dimension", 0);

  const std::size_t start = header.pos();
  const std::size_t available = bytes.size() - start;
  if (available / img.channels / img.width < img.height) {
    throw FormatError("truncated raster", bytes.size());
  }
  const std::size_t payload = img.width * img.height * img.channels;
  if (available != payload) throw FormatError("trailing bytes after raster", start + payload);
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(start), bytes.end());
  return img;
}

std::vector<std::uint8_t> encode_netpbm(const NetpbmImage& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw ShapeError("Netpbm images have 1 or 3 channels");
  }
  if (image.pixels.size() != image.width * image.height * image.channels) {
    throw ShapeError("Netpbm pixel buffer does not match its dimensions");
  }
  const std::string header = std::string(image.channels == 1 ? "P5" : "P6") + "\n" +
                             std::to_string(image.width) + " " + std::to_string(image.height) +
                             "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(std::span<const std::uint8_t> bytes, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ConfigError("short write to '" + path.string() + "'");
}

NetpbmImage read_netpbm(const std::filesystem::path& path) {
  return decode_netpbm(read_file_bytes(path));
}

void write_netpbm(const NetpbmImage& image, const std::filesystem::path& path) {
  write_file_bytes(encode_netpbm(image), path);
}

FeatureVolume to_volume(const NetpbmImage& image) {
  FeatureVolume v({image.height, image.width, image.channels});
  for (std::size_t y = 0; y < image.height; ++y) {
    for (std::size_t x = 0; x < image.width; ++x) {
      for (std::size_t c = 0; c < image.channels; ++c) {
        v.at(y, x, c) =
            static_cast<float>(image.pixels[(y * image.width + x) * image.channels + c]) / 255.0f;
      }
    }
  }
  return v;
}

NetpbmImage from_volume(const FeatureVolume& volume) {
  if (volume.channels() != 1 && volume.channels() != 3) {
    throw ShapeError("only 1- or 3-channel volumes convert to images");
  }
  NetpbmImage img{volume.width(), volume.height(), volume.channels(),
                  std::vector<std::uint8_t>(volume.size())};
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      for (std::size_t c = 0; c < img.channels; ++c) {
        const float v = std::clamp(volume.at(y, x, c), 0.0f, 1.0f);
        img.pixels[(y * img.width + x) * img.channels + c] =
            static_cast<std::uint8_t>(std::lround(v * 255.0f));
      }
    }
  }
  return img;
}

FeatureVolume read_image(const std::filesystem::path& path) { return to_volume(read_netpbm(path)); }

void write_image(const FeatureVolume& volume, const std::filesystem::path& path) {
  write_netpbm(from_volume(volume), path);
}

}  // namespace stnet
