#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "stnet/errors.hpp"

namespace stnet {

struct Shape3 {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;

  constexpr std::size_t size() const noexcept { return height * width * channels; }
  constexpr std::size_t plane() const noexcept { return height * width; }
  friend constexpr bool operator==(const Shape3&, const Shape3&) = default;
};

std::string to_string(const Shape3& shape);

// Dense H x W x C volume stored channel-outermost: element (h, w, c) lives at
// (c * H + h) * W + w, so every 2D spatial slice is contiguous.
template <typename T>
class Volume {
 public:
  using value_type = T;

  Volume() = default;

  explicit Volume(Shape3 shape, T fill = T{}) : shape_(shape), data_(shape.size(), fill) {}

  Volume(Shape3 shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.size()) {
      throw ShapeError("volume data length " + std::to_string(data_.size()) +
                       " does not match shape " + to_string(shape_));
    }
  }

  const Shape3& shape() const noexcept { return shape_; }
  std::size_t height() const noexcept { return shape_.height; }
  std::size_t width() const noexcept { return shape_.width; }
  std::size_t channels() const noexcept { return shape_.channels; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t index(std::size_t h, std::size_t w, std::size_t c) const noexcept {
    return (c * shape_.height + h) * shape_.width + w;
  }

  T& at(std::size_t h, std::size_t w, std::size_t c) noexcept { return data_[index(h, w, c)]; }
  const T& at(std::size_t h, std::size_t w, std::size_t c) const noexcept {
    return data_[index(h, w, c)];
  }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }

  std::span<const T> channel(std::size_t c) const noexcept {
    return std::span<const T>(data_).subspan(c * shape_.plane(), shape_.plane());
  }

  // Same data, new shape of equal size.
  Volume reshaped(Shape3 shape) const { return Volume(shape, data_); }

  friend bool operator==(const Volume&, const Volume&) = default;

 private:
  Shape3 shape_{};
  std::vector<T> data_;
};

// Hidden-node activities z^l.
using FeatureVolume = Volume<float>;
// Gating activities g^l; double so conservation holds to 1e-5 through deep stacks.
using GatingVolume = Volume<double>;

double sum(const FeatureVolume& v);
double sum(const GatingVolume& v);
bool all_finite(const FeatureVolume& v);
std::size_t count_nonzero(const GatingVolume& v);

// Dense row-major tensor of arbitrary rank, used for weights.
struct Tensor {
  std::vector<std::size_t> dims;
  std::vector<float> data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> dims_, std::vector<float> data_);
  explicit Tensor(std::vector<std::size_t> dims_);

  std::size_t rank() const noexcept { return dims.size(); }
  std::size_t element_count() const noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

}  // namespace stnet
