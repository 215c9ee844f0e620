#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

namespace dcm {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense n-dimensional array of 64-bit floats in row-major order, with an
/// optional same-shape gradient buffer.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double v);
  static Tensor randn(Shape shape, std::mt19937_64& rng, double stddev = 1.0);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  /// Scalar extraction; DimensionError unless size() == 1.
  double item() const;

  bool grad_enabled() const { return grad_enabled_; }
  void enable_grad();
  std::vector<double>& grad();
  const std::vector<double>& grad() const;
  void zero_grad();

 private:
  Shape shape_;
  std::vector<double> values_;
  std::vector<double> grad_;
  bool grad_enabled_ = false;
};

/// Named learnable tensor. Frozen parameters still receive gradients but are
/// skipped by the optimizer.
struct Parameter {
  std::string name;
  Tensor value;
  bool frozen = false;

  Parameter() = default;
  Parameter(std::string name_, Tensor value_);
};

}  // namespace dcm
