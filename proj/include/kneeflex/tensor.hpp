#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "kneeflex/error.hpp"

namespace kneeflex {

/// Dense row-major float32 tensor.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, float fill = 0.0f) : shape_(std::move(shape)) {
    for (int d : shape_)
      if (d <= 0) throw ShapeError("tensor dimensions must be positive");
    data_.assign(count(shape_), fill);
  }
  Tensor(std::vector<int> shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
    for (int d : shape_)
      if (d <= 0) throw ShapeError("tensor dimensions must be positive");
    if (data_.size() != count(shape_)) throw ShapeError("tensor data length does not match shape");
  }

  static std::size_t count(const std::vector<int>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           [](std::size_t a, int d) { return a * static_cast<std::size_t>(d); });
  }

  const std::vector<int>& shape() const { return shape_; }
  int dim(std::size_t i) const { return shape_.at(i); }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  /// Same data, new shape with identical element count.
  void reshape(std::vector<int> shape) {
    if (count(shape) != data_.size()) throw ShapeError("reshape changes element count");
    shape_ = std::move(shape);
  }

  void fill(float v) { std::fill(data_.begin(), data_.end(), v); }

  std::string shape_string() const {
    std::string s = "(";
    for (std::size_t i = 0; i < shape_.size(); ++i) s += (i ? ", " : "") + std::to_string(shape_[i]);
    return s + ")";
  }

  bool operator==(const Tensor&) const = default;

 private:
  std::vector<int> shape_;
  std::vector<float> data_;
};

}  // namespace kneeflex
