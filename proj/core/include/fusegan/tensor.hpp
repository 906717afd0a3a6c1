#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace fusegan {

using Shape = std::vector<int64_t>;

std::string shape_str(const Shape& s);
int64_t shape_numel(const Shape& s);

/// Dense row-major float32 tensor. Copies are shallow (shared storage);
/// clone() makes them deep. reshape() shares storage.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, float fill);
  Tensor(Shape shape, std::vector<float> values);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, float v) { return Tensor(std::move(shape), v); }
  static Tensor scalar(float v) { return Tensor(Shape{}, std::vector<float>{v}); }

  const Shape& shape() const { return shape_; }
  int64_t ndim() const { return static_cast<int64_t>(shape_.size()); }
  int64_t dim(int64_t i) const;
  int64_t numel() const { return numel_; }
  bool defined() const { return data_ != nullptr; }

  float* data() { return data_->data(); }
  const float* data() const { return data_->data(); }
  float& at(int64_t i) { return (*data_)[i]; }
  float at(int64_t i) const { return (*data_)[i]; }
  float item() const;

  Tensor clone() const;
  Tensor reshape(Shape new_shape) const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

  std::string str() const;

 private:
  std::shared_ptr<std::vector<float>> data_;
  Shape shape_;
  int64_t numel_ = 0;
};

}  // namespace fusegan
