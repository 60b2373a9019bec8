#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace seqtag {

/// Dense n-dimensional array of doubles in row-major order.
///
/// Two-dimensional arrays are the common case; `rows()` is the leading
/// extent and `cols()` the product of the remaining extents.
class Array {
 public:
  Array() = default;
  explicit Array(std::vector<std::size_t> shape, double fill = 0.0);
  Array(std::vector<std::size_t> shape, std::vector<double> data);

  static Array matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  static Array matrix(std::size_t rows, std::size_t cols,
                      std::initializer_list<double> values);
  static Array vector(std::initializer_list<double> values);
  static Array scalar(double value);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  std::size_t rows() const { return shape_.empty() ? 1 : shape_[0]; }
  std::size_t cols() const;

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols(), cols()};
  }

  Array reshaped(std::vector<std::size_t> shape) const;
  bool all_finite() const;
  bool same_shape(const Array& other) const { return shape_ == other.shape_; }
  void fill(double value);

  friend bool operator==(const Array&, const Array&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::string shape_string(const std::vector<std::size_t>& shape);
std::size_t shape_product(const std::vector<std::size_t>& shape);

}  // namespace seqtag
