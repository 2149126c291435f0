#include "stnet/volume.hpp"

#include <cmath>
#include <functional>
#include <numeric>

namespace stnet {

std::string to_string(const Shape3& shape) {
  return std::to_string(shape.height) + "x" + std::to_string(shape.width) + "x" +
         std::to_string(shape.channels);
}

double sum(const FeatureVolume& v) {
  double total = 0.0;
  for (float x : v.data()) total += x;
  return total;
}

double sum(const GatingVolume& v) {
  double total = 0.0;
  for (double x : v.data()) total += x;
  return total;
}

bool all_finite(const FeatureVolume& v) {
  for (float x : v.data()) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

std::size_t count_nonzero(const GatingVolume& v) {
  std::size_t n = 0;
  for (double x : v.data()) n += (x != 0.0);
  return n;
}

Tensor::Tensor(std::vector<std::size_t> dims_, std::vector<float> data_)
    : dims(std::move(dims_)), data(std::move(data_)) {
  if (data.size() != element_count()) {
    throw ShapeError("tensor data length " + std::to_string(data.size()) +
                     " does not match its dimensions");
  }
}

Tensor::Tensor(std::vector<std::size_t> dims_) : dims(std::move(dims_)), data(element_count(), 0.0f) {}

std::size_t Tensor::element_count() const noexcept {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace stnet
