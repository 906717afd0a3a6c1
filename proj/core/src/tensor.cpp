#include "fusegan/tensor.hpp"

#include <cmath>
#include <sstream>

#include "fusegan/errors.hpp"

namespace fusegan {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ",";
    os << s[i];
  }
  os << "]";
  return os.str();
}

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  numel_ = shape_numel(shape_);
  if (numel_ < 0) throw ShapeError("negative dimension in " + shape_str(shape_));
  data_ = std::make_shared<std::vector<float>>(static_cast<size_t>(numel_), 0.0f);
}

Tensor::Tensor(Shape shape, float fill) : Tensor(std::move(shape)) {
  std::fill(data_->begin(), data_->end(), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> values) : shape_(std::move(shape)) {
  numel_ = shape_numel(shape_);
  if (numel_ != static_cast<int64_t>(values.size()))
    throw ShapeError("value count " + std::to_string(values.size()) +
                     " does not match shape " + shape_str(shape_));
  data_ = std::make_shared<std::vector<float>>(std::move(values));
}

int64_t Tensor::dim(int64_t i) const {
  if (i < 0) i += ndim();
  if (i < 0 || i >= ndim()) throw ShapeError("dim index out of range");
  return shape_[static_cast<size_t>(i)];
}

float Tensor::item() const {
  if (numel_ != 1) throw ShapeError("item() on tensor with numel " + std::to_string(numel_));
  return (*data_)[0];
}

Tensor Tensor::clone() const {
  Tensor out;
  out.shape_ = shape_;
  out.numel_ = numel_;
  out.data_ = std::make_shared<std::vector<float>>(*data_);
  return out;
}

Tensor Tensor::reshape(Shape new_shape) const {
  if (shape_numel(new_shape) != numel_)
    throw ShapeError("reshape " + shape_str(shape_) + " -> " + shape_str(new_shape));
  Tensor out;
  out.shape_ = std::move(new_shape);
  out.numel_ = numel_;
  out.data_ = data_;
  return out;
}

bool Tensor::all_finite() const {
  for (float v : *data_)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string Tensor::str() const {
  std::ostringstream os;
  os << "Tensor" << shape_str(shape_) << " [";
  int64_t n = std::min<int64_t>(numel_, 8);
  for (int64_t i = 0; i < n; ++i) {
    if (i) os << ", ";
    os << (*data_)[i];
  }
  if (numel_ > n) os << ", ...";
  os << "]";
  return os.str();
}

}  // namespace fusegan
