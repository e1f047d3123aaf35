#include "pgn/tensor.hpp"

#include <cmath>
#include <sstream>

#include "pgn/errors.hpp"

namespace pgn {

std::int64_t shape_numel(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw DimensionError("diffcore", "non-positive dimension in shape " + shape_to_string(shape));
    n *= d;
  }
  return n;
}

std::string shape_to_string(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
  data_.assign(static_cast<std::size_t>(shape_numel(shape_)), 0.0f);
}

Tensor::Tensor(std::vector<int> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_numel(shape_) != static_cast<std::int64_t>(data_.size())) {
    throw DimensionError("diffcore", "data length " + std::to_string(data_.size()) +
                                         " does not match shape " + shape_to_string(shape_));
  }
}

Tensor Tensor::full(std::vector<int> shape, float value) {
  Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = value;
  return t;
}

float& Tensor::at4(int n, int c, int h, int w) {
  return data_[static_cast<std::size_t>(((static_cast<std::int64_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
}

float Tensor::at4(int n, int c, int h, int w) const {
  return data_[static_cast<std::size_t>(((static_cast<std::int64_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
}

float& Tensor::at2(int r, int c) {
  return data_[static_cast<std::size_t>(static_cast<std::int64_t>(r) * shape_[1] + c)];
}

float Tensor::at2(int r, int c) const {
  return data_[static_cast<std::size_t>(static_cast<std::int64_t>(r) * shape_[1] + c)];
}

bool Tensor::all_finite() const {
  for (float v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double Tensor::sum64() const {
  double acc = 0.0;
  for (float v : data_) acc += static_cast<double>(v);
  return acc;
}

float Tensor::item() const {
  if (numel() != 1) {
    throw ContractError("diffcore", "item() requires a one-element tensor, got shape " + shape_str());
  }
  return data_[0];
}

std::string Tensor::shape_str() const { return shape_to_string(shape_); }

}  // namespace pgn
