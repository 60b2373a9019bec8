#include "seqtag/array.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "seqtag/error.hpp"

namespace seqtag {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Array::Array(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(shape_product(shape_), fill) {
  for (auto extent : shape_) require(extent > 0, "array extents must be positive");
}

Array::Array(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto extent : shape_) require(extent > 0, "array extents must be positive");
  require(shape_product(shape_) == data_.size(),
          "array data length does not match shape " + shape_string(shape_));
}

Array Array::matrix(std::size_t rows, std::size_t cols, double fill) {
  return Array({rows, cols}, fill);
}

Array Array::matrix(std::size_t rows, std::size_t cols,
                    std::initializer_list<double> values) {
  return Array({rows, cols}, std::vector<double>(values));
}

Array Array::vector(std::initializer_list<double> values) {
  return Array({values.size()}, std::vector<double>(values));
}

Array Array::scalar(double value) { return Array({1, 1}, std::vector<double>{value}); }

std::size_t Array::cols() const {
  if (shape_.size() < 2) return 1;
  return data_.size() / shape_[0];
}

Array Array::reshaped(std::vector<std::size_t> shape) const {
  return Array(std::move(shape), data_);
}

bool Array::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Array::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

}  // namespace seqtag
