#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pgn {

// Dense N-dimensional float32 array, row-major. Scalars have an empty shape
// and one element. Reductions accumulate in double before narrowing back.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);
  Tensor(std::vector<int> shape, std::vector<float> data);

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, float value);
  static Tensor scalar(float value) { return Tensor({}, {value}); }

  const std::vector<int>& shape() const { return shape_; }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  float& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  float operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  // Element access for 4-d (NCHW) and 2-d tensors; used by slow paths and tests.
  float& at4(int n, int c, int h, int w);
  float at4(int n, int c, int h, int w) const;
  float& at2(int r, int c);
  float at2(int r, int c) const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

  double sum64() const;  // double-accumulated sum
  float item() const;    // value of a one-element tensor

  std::string shape_str() const;

 private:
  std::vector<int> shape_;
  std::vector<float> data_;
};

std::int64_t shape_numel(const std::vector<int>& shape);
std::string shape_to_string(const std::vector<int>& shape);

}  // namespace pgn
