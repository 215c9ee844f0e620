#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <vector>

#include "dcm/tensor.hpp"

namespace dcm {

class Tape;

/// Handle to a value recorded on a Tape. Valid while its tape is alive.
class Var {
 public:
  Var() = default;

  const Shape& shape() const;
  std::size_t size() const;
  const std::vector<double>& values() const;
  double item() const;
  /// Copy of the recorded value.
  Tensor tensor() const;
  /// Gradient of the last backward() pass w.r.t. this node. UsageError if
  /// backward has not run on the tape.
  const std::vector<double>& grad() const;

  Tape* tape() const { return tape_; }
  std::size_t index() const { return index_; }

 private:
  friend class Tape;
  friend struct OpAccess;
  Var(Tape* tape, std::size_t index) : tape_(tape), index_(index) {}
  Tape* tape_ = nullptr;
  std::size_t index_ = 0;
};

namespace detail {
struct Node;
}

/// Reverse-mode differentiation tape. Records every operation in execution
/// order (which is topological by construction), runs one backward pass, and
/// can replay its forward computation for verification.
///
/// A tape and the Vars on it form a single-threaded unit of work; distinct
/// tapes never share state and may run on different threads.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that does not require a gradient.
  Var constant(Tensor value);
  /// Differentiable leaf; gradient readable via Var::grad() after backward().
  Var watch(Tensor value);
  /// Differentiable leaf bound to a parameter: backward() accumulates into
  /// p.value.grad(). The recorded value is a snapshot of p.value.
  Var param(Parameter& p);

  /// Backpropagates from a scalar loss into every differentiable leaf, then
  /// marks the tape consumed. A consumed tape rejects further use.
  void backward(const Var& loss);
  bool consumed() const { return consumed_; }

  std::size_t node_count() const;
  /// Re-executes every recorded operation from the recorded leaf values and
  /// compares against the recorded outputs bit for bit.
  bool replay_matches() const;

 private:
  friend class Var;
  friend struct OpAccess;
  std::deque<detail::Node>& nodes();
  const std::deque<detail::Node>& nodes() const;

  std::deque<detail::Node>* nodes_;
  bool consumed_ = false;
};

// Operations. Every operand must live on the same tape; results are recorded
// on it. Elementwise binary ops accept equal shapes, a scalar against any
// shape, or a length-N row against an [M x N] matrix.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var exp(const Var& a);
Var log(const Var& a);
Var square(const Var& a);
Var relu(const Var& a);
Var matmul(const Var& a, const Var& b);
/// Valid (unpadded) convolution, input [B x Cin x H x W] with kernel
/// [Cout x Cin x KH x KW].
Var conv2d(const Var& input, const Var& kernel, std::size_t stride);
Var reshape(const Var& a, Shape shape);
Var reduce_sum(const Var& a);
Var reduce_sum(const Var& a, int axis);
Var reduce_mean(const Var& a);
Var reduce_mean(const Var& a, int axis);
Var reduce_max(const Var& a);
Var reduce_max(const Var& a, int axis);
/// Stable log-sum-exp along an axis (max-shifted).
Var logsumexp(const Var& a, int axis);
/// Pairwise squared Euclidean distances between row vectors:
/// out[i][j] = sum_d (a[i][d] - b[j][d])^2 for a [M x D], b [J x D].
Var pairwise_sqdist(const Var& a, const Var& b);
/// Weighted variant: out[i][j] = sum_d w[j][d] * (a[i][d] - b[j][d])^2.
Var pairwise_sqdist(const Var& a, const Var& b, const Var& w);
Var slice_cols(const Var& a, std::size_t start, std::size_t count);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t coordinates = 0;
  bool pass = false;
};

/// Scalar-valued function of a single input, built on a caller-provided tape.
using ScalarFn = std::function<Var(Tape&, const Var&)>;

/// Compares the analytic gradient of f at x against central finite
/// differences (f(x+h) - f(x-h)) / 2h per coordinate. Relative error uses
/// denominator max(1, |analytic|, |numeric|).
GradCheckReport grad_check(const ScalarFn& f, const Tensor& x, double step,
                           double tolerance);

}  // namespace dcm
