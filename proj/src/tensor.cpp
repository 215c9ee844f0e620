#include "dcm/tensor.hpp"

#include <utility>

#include "dcm/errors.hpp"

namespace dcm {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t extent : shape) n *= extent;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += " x ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  values_.assign(shape_size(shape_), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (shape_size(shape_) != values_.size()) {
    throw DimensionError("tensor shape " + shape_str(shape_) + " does not match " +
                         std::to_string(values_.size()) + " values");
  }
}

Tensor Tensor::scalar(double v) { return Tensor(Shape{}, {v}); }

Tensor Tensor::zeros(Shape shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(Shape shape, double v) {
  Tensor t(std::move(shape));
  for (double& x : t.values_) x = v;
  return t;
}

Tensor Tensor::randn(Shape shape, std::mt19937_64& rng, double stddev) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& x : t.values_) x = dist(rng);
  return t;
}

double Tensor::item() const {
  if (values_.size() != 1) {
    throw DimensionError("item() on tensor of shape " + shape_str(shape_));
  }
  return values_[0];
}

void Tensor::enable_grad() {
  grad_enabled_ = true;
  grad_.assign(values_.size(), 0.0);
}

std::vector<double>& Tensor::grad() {
  if (!grad_enabled_) throw UsageError("gradient not enabled on this tensor");
  return grad_;
}

const std::vector<double>& Tensor::grad() const {
  if (!grad_enabled_) throw UsageError("gradient not enabled on this tensor");
  return grad_;
}

void Tensor::zero_grad() {
  if (grad_enabled_) grad_.assign(values_.size(), 0.0);
}

Parameter::Parameter(std::string name_, Tensor value_)
    : name(std::move(name_)), value(std::move(value_)) {
  value.enable_grad();
}

}  // namespace dcm
