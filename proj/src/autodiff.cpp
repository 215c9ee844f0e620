#include "dcm/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <utility>

#include "dcm/errors.hpp"

namespace dcm {
namespace detail {

enum class Op : std::uint8_t {
  Leaf,
  Add,
  Sub,
  Mul,
  Scale,
  Exp,
  Log,
  Square,
  Relu,
  MatMul,
  Conv2d,
  Reshape,
  ReduceSum,
  ReduceMean,
  ReduceMax,
  LogSumExp,
  SqDist,
  SqDistW,
  SliceCols,
  ConcatCols,
  ConcatRows,
};

constexpr int kAllAxes = -1;

struct Node {
  Op op = Op::Leaf;
  std::vector<std::uint32_t> inputs;
  Tensor value;
  std::vector<double> grad;  // allocated during backward
  double factor = 0.0;       // Scale
  int axis = kAllAxes;       // reductions, logsumexp
  std::size_t stride = 1;    // Conv2d
  std::size_t slice_start = 0;
  Parameter* bound = nullptr;  // param leaves
  bool needs_grad = false;
};

// How a binary elementwise operand relates to the output shape.
enum class Bcast { Same, Scalar, Row };

Bcast classify_operand(const Shape& operand, const Shape& out) {
  if (operand == out) return Bcast::Same;
  if (shape_size(operand) == 1) return Bcast::Scalar;
  if (out.size() == 2) {
    bool row1 = operand.size() == 1 && operand[0] == out[1];
    bool row2 = operand.size() == 2 && operand[0] == 1 && operand[1] == out[1];
    if (row1 || row2) return Bcast::Row;
  }
  throw DimensionError("shapes " + shape_str(operand) + " and " + shape_str(out) +
                       " are not broadcastable");
}

// Output shape of a binary elementwise op, or throws.
Shape broadcast_shape(const Shape& a, const Shape& b) {
  if (a == b) return a;
  if (shape_size(b) == 1) return a;
  if (shape_size(a) == 1) return b;
  // row against matrix, either side
  classify_operand(b.size() > a.size() || shape_size(b) > shape_size(a) ? a : b,
                   b.size() > a.size() || shape_size(b) > shape_size(a) ? b : a);
  return shape_size(a) >= shape_size(b) ? a : b;
}

// Maps a flat output index to the operand's flat index under broadcasting.
struct OperandIndex {
  Bcast mode;
  std::size_t cols;  // of the output, for Row mode
  std::size_t operator()(std::size_t out_idx) const {
    switch (mode) {
      case Bcast::Same: return out_idx;
      case Bcast::Scalar: return 0;
      case Bcast::Row: return out_idx % cols;
    }
    return 0;
  }
};

OperandIndex operand_index(const Shape& operand, const Shape& out) {
  Bcast mode = classify_operand(operand, out);
  std::size_t cols = out.size() == 2 ? out[1] : 1;
  return OperandIndex{mode, cols};
}

void check_axis(const Shape& shape, int axis, const char* what) {
  if (axis < 0 || static_cast<std::size_t>(axis) >= shape.size()) {
    throw DimensionError(std::string(what) + ": axis " + std::to_string(axis) +
                         " out of range for shape " + shape_str(shape));
  }
}

// Splits a shape around an axis into [outer, n, inner] extents.
struct AxisView {
  std::size_t outer = 1, n = 1, inner = 1;
};

AxisView axis_view(const Shape& shape, int axis) {
  AxisView v;
  for (int i = 0; i < axis; ++i) v.outer *= shape[i];
  v.n = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

Shape drop_axis(const Shape& shape, int axis) {
  Shape out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (static_cast<int>(i) != axis) out.push_back(shape[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Forward kernels. Shared between recording and replay; every kernel is a
// deterministic sequential loop so replays are bit-identical.
// ---------------------------------------------------------------------------

Tensor forward_elementwise(Op op, const Tensor& a, const Tensor& b) {
  Shape out_shape = broadcast_shape(a.shape(), b.shape());
  OperandIndex ia = operand_index(a.shape(), out_shape);
  OperandIndex ib = operand_index(b.shape(), out_shape);
  Tensor out(out_shape);
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) {
    double x = a[ia(i)], y = b[ib(i)];
    switch (op) {
      case Op::Add: out[i] = x + y; break;
      case Op::Sub: out[i] = x - y; break;
      case Op::Mul: out[i] = x * y; break;
      default: throw UsageError("not an elementwise op");
    }
  }
  return out;
}

Tensor forward_unary(Op op, const Tensor& a, double factor) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) {
    double x = a[i];
    switch (op) {
      case Op::Scale: out[i] = factor * x; break;
      case Op::Exp: out[i] = std::exp(x); break;
      case Op::Log:
        if (!(x > 0.0)) {
          throw DomainError("log of non-positive value " + std::to_string(x));
        }
        out[i] = std::log(x);
        break;
      case Op::Square: out[i] = x * x; break;
      case Op::Relu: out[i] = x > 0.0 ? x : 0.0; break;
      default: throw UsageError("not a unary op");
    }
  }
  return out;
}

Tensor forward_matmul(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  Tensor out(Shape{m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        out[i * n + j] += av * b[p * n + j];
      }
    }
  }
  return out;
}

struct ConvDims {
  std::size_t batch, cin, h, w, cout, kh, kw, oh, ow;
};

ConvDims conv_dims(const Shape& in, const Shape& kernel, std::size_t stride) {
  ConvDims d;
  d.batch = in[0];
  d.cin = in[1];
  d.h = in[2];
  d.w = in[3];
  d.cout = kernel[0];
  d.kh = kernel[2];
  d.kw = kernel[3];
  d.oh = (d.h - d.kh) / stride + 1;
  d.ow = (d.w - d.kw) / stride + 1;
  return d;
}

Tensor forward_conv2d(const Tensor& in, const Tensor& kernel, std::size_t stride) {
  ConvDims d = conv_dims(in.shape(), kernel.shape(), stride);
  Tensor out(Shape{d.batch, d.cout, d.oh, d.ow});
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (std::size_t oc = 0; oc < d.cout; ++oc) {
      for (std::size_t oy = 0; oy < d.oh; ++oy) {
        for (std::size_t ox = 0; ox < d.ow; ++ox) {
          double acc = 0.0;
          for (std::size_t ic = 0; ic < d.cin; ++ic) {
            for (std::size_t ky = 0; ky < d.kh; ++ky) {
              const std::size_t iy = oy * stride + ky;
              const double* in_row = in.values().data() +
                                     ((b * d.cin + ic) * d.h + iy) * d.w + ox * stride;
              const double* k_row = kernel.values().data() +
                                    ((oc * d.cin + ic) * d.kh + ky) * d.kw;
              for (std::size_t kx = 0; kx < d.kw; ++kx) {
                acc += in_row[kx] * k_row[kx];
              }
            }
          }
          out[((b * d.cout + oc) * d.oh + oy) * d.ow + ox] = acc;
        }
      }
    }
  }
  return out;
}

Tensor forward_reduce(Op op, const Tensor& a, int axis) {
  if (axis == kAllAxes) {
    if (a.size() == 0) {
      if (op == Op::ReduceSum) return Tensor::scalar(0.0);
      throw DimensionError("reduction over an empty tensor");
    }
    double acc;
    if (op == Op::ReduceMax) {
      acc = a[0];
      for (std::size_t i = 1; i < a.size(); ++i) acc = a[i] > acc ? a[i] : acc;
    } else {
      acc = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) acc += a[i];
      if (op == Op::ReduceMean) acc /= static_cast<double>(a.size());
    }
    return Tensor::scalar(acc);
  }
  AxisView v = axis_view(a.shape(), axis);
  if (v.n == 0) throw DimensionError("reduction over an empty axis");
  Tensor out(drop_axis(a.shape(), axis));
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t in = 0; in < v.inner; ++in) {
      double acc;
      if (op == Op::ReduceMax) {
        acc = a[(o * v.n) * v.inner + in];
        for (std::size_t k = 1; k < v.n; ++k) {
          double x = a[(o * v.n + k) * v.inner + in];
          acc = x > acc ? x : acc;
        }
      } else {
        acc = 0.0;
        for (std::size_t k = 0; k < v.n; ++k) acc += a[(o * v.n + k) * v.inner + in];
        if (op == Op::ReduceMean) acc /= static_cast<double>(v.n);
      }
      out[o * v.inner + in] = acc;
    }
  }
  return out;
}

Tensor forward_logsumexp(const Tensor& a, int axis) {
  AxisView v = axis_view(a.shape(), axis);
  if (v.n == 0) throw DimensionError("logsumexp over an empty axis");
  Tensor out(drop_axis(a.shape(), axis));
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t in = 0; in < v.inner; ++in) {
      double m = a[(o * v.n) * v.inner + in];
      for (std::size_t k = 1; k < v.n; ++k) {
        double x = a[(o * v.n + k) * v.inner + in];
        m = x > m ? x : m;
      }
      double acc = 0.0;
      for (std::size_t k = 0; k < v.n; ++k) {
        acc += std::exp(a[(o * v.n + k) * v.inner + in] - m);
      }
      out[o * v.inner + in] = m + std::log(acc);
    }
  }
  return out;
}

Tensor forward_sqdist(const Tensor& a, const Tensor& b, const Tensor* w) {
  const std::size_t m = a.shape()[0], d = a.shape()[1], j = b.shape()[0];
  Tensor out(Shape{m, j});
  for (std::size_t i = 0; i < m; ++i) {
    const double* ar = a.values().data() + i * d;
    for (std::size_t c = 0; c < j; ++c) {
      const double* br = b.values().data() + c * d;
      const double* wr = w ? w->values().data() + c * d : nullptr;
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        double diff = ar[k] - br[k];
        acc += wr ? wr[k] * diff * diff : diff * diff;
      }
      out[i * j + c] = acc;
    }
  }
  return out;
}

Tensor forward_slice_cols(const Tensor& a, std::size_t start, std::size_t count) {
  const std::size_t rows = a.shape()[0], cols = a.shape()[1];
  Tensor out(Shape{rows, count});
  for (std::size_t r = 0; r < rows; ++r) {
    std::memcpy(out.values().data() + r * count, a.values().data() + r * cols + start,
                count * sizeof(double));
  }
  return out;
}

Tensor forward_concat_cols(const std::vector<const Tensor*>& parts) {
  const std::size_t rows = parts[0]->shape()[0];
  std::size_t cols = 0;
  for (const Tensor* p : parts) cols += p->shape()[1];
  Tensor out(Shape{rows, cols});
  std::size_t at = 0;
  for (const Tensor* p : parts) {
    const std::size_t pc = p->shape()[1];
    for (std::size_t r = 0; r < rows; ++r) {
      std::memcpy(out.values().data() + r * cols + at, p->values().data() + r * pc,
                  pc * sizeof(double));
    }
    at += pc;
  }
  return out;
}

Tensor forward_concat_rows(const std::vector<const Tensor*>& parts) {
  const std::size_t cols = parts[0]->shape()[1];
  std::size_t rows = 0;
  for (const Tensor* p : parts) rows += p->shape()[0];
  Tensor out(Shape{rows, cols});
  std::size_t at = 0;
  for (const Tensor* p : parts) {
    std::memcpy(out.values().data() + at, p->values().data(),
                p->size() * sizeof(double));
    at += p->size();
  }
  return out;
}

Tensor eval_node(const Node& node, const std::vector<const Tensor*>& in) {
  switch (node.op) {
    case Op::Leaf: throw UsageError("cannot evaluate a leaf");
    case Op::Add:
    case Op::Sub:
    case Op::Mul: return forward_elementwise(node.op, *in[0], *in[1]);
    case Op::Scale:
    case Op::Exp:
    case Op::Log:
    case Op::Square:
    case Op::Relu: return forward_unary(node.op, *in[0], node.factor);
    case Op::MatMul: return forward_matmul(*in[0], *in[1]);
    case Op::Conv2d: return forward_conv2d(*in[0], *in[1], node.stride);
    case Op::Reshape: {
      Tensor out = *in[0];
      return Tensor(node.value.shape(), std::move(out.values()));
    }
    case Op::ReduceSum:
    case Op::ReduceMean:
    case Op::ReduceMax: return forward_reduce(node.op, *in[0], node.axis);
    case Op::LogSumExp: return forward_logsumexp(*in[0], node.axis);
    case Op::SqDist: return forward_sqdist(*in[0], *in[1], nullptr);
    case Op::SqDistW: return forward_sqdist(*in[0], *in[1], in[2]);
    case Op::SliceCols:
      return forward_slice_cols(*in[0], node.slice_start, node.value.shape()[1]);
    case Op::ConcatCols: return forward_concat_cols(in);
    case Op::ConcatRows: return forward_concat_rows(in);
  }
  throw UsageError("unknown op");
}

}  // namespace detail

using detail::Node;
using detail::Op;

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

Tape::Tape() : nodes_(new std::deque<Node>()) {}

Tape::~Tape() { delete nodes_; }

std::deque<Node>& Tape::nodes() { return *nodes_; }
const std::deque<Node>& Tape::nodes() const { return *nodes_; }

std::size_t Tape::node_count() const { return nodes_->size(); }

struct OpAccess {
  static std::deque<Node>& nodes(Tape& t) { return t.nodes(); }
  static const std::deque<Node>& nodes(const Tape& t) { return t.nodes(); }

  static Var push_leaf(Tape& t, Tensor value, bool needs_grad, Parameter* bound) {
    if (t.consumed()) throw UsageError("tape already consumed by backward()");
    Node node;
    node.op = Op::Leaf;
    node.value = std::move(value);
    node.needs_grad = needs_grad;
    node.bound = bound;
    t.nodes().push_back(std::move(node));
    return Var(&t, t.nodes().size() - 1);
  }

  static Var push(Tape& t, Node node) {
    if (t.consumed()) throw UsageError("tape already consumed by backward()");
    for (std::uint32_t in : node.inputs) {
      if (t.nodes()[in].needs_grad) {
        node.needs_grad = true;
        break;
      }
    }
    t.nodes().push_back(std::move(node));
    return Var(&t, t.nodes().size() - 1);
  }

  static Tape* common_tape(std::initializer_list<const Var*> vars) {
    Tape* tape = nullptr;
    for (const Var* v : vars) {
      if (v->tape() == nullptr) throw UsageError("operation on an empty Var");
      if (tape == nullptr) tape = v->tape();
      if (v->tape() != tape) throw UsageError("operands belong to different tapes");
    }
    return tape;
  }

  static const Node& node_of(const Var& v) { return nodes(*v.tape())[v.index()]; }
};

Var Tape::constant(Tensor value) {
  return OpAccess::push_leaf(*this, std::move(value), false, nullptr);
}

Var Tape::watch(Tensor value) {
  return OpAccess::push_leaf(*this, std::move(value), true, nullptr);
}

Var Tape::param(Parameter& p) {
  if (!p.value.grad_enabled()) p.value.enable_grad();
  return OpAccess::push_leaf(*this, p.value, true, &p);
}

bool Tape::replay_matches() const {
  const std::deque<Node>& ns = *nodes_;
  for (const Node& node : ns) {
    if (node.op == Op::Leaf) continue;
    std::vector<const Tensor*> in;
    in.reserve(node.inputs.size());
    for (std::uint32_t i : node.inputs) in.push_back(&ns[i].value);
    Tensor redo = detail::eval_node(node, in);
    if (redo.shape() != node.value.shape()) return false;
    if (std::memcmp(redo.values().data(), node.value.values().data(),
                    redo.size() * sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Var accessors
// ---------------------------------------------------------------------------

const Shape& Var::shape() const { return OpAccess::node_of(*this).value.shape(); }
std::size_t Var::size() const { return OpAccess::node_of(*this).value.size(); }
const std::vector<double>& Var::values() const {
  return OpAccess::node_of(*this).value.values();
}
double Var::item() const { return OpAccess::node_of(*this).value.item(); }
Tensor Var::tensor() const { return OpAccess::node_of(*this).value; }

const std::vector<double>& Var::grad() const {
  if (!tape_->consumed()) throw UsageError("grad() before backward()");
  Node& node = OpAccess::nodes(*tape_)[index_];
  if (node.grad.empty()) node.grad.assign(node.value.size(), 0.0);
  return node.grad;
}

// ---------------------------------------------------------------------------
// Op builders
// ---------------------------------------------------------------------------

namespace {

Var emit_binary(Op op, const Var& a, const Var& b) {
  Tape* tape = OpAccess::common_tape({&a, &b});
  Node node;
  node.op = op;
  node.inputs = {static_cast<std::uint32_t>(a.index()), static_cast<std::uint32_t>(b.index())};
  node.value = detail::forward_elementwise(op, OpAccess::node_of(a).value,
                                           OpAccess::node_of(b).value);
  return OpAccess::push(*tape, std::move(node));
}

Var emit_unary(Op op, const Var& a, double factor = 0.0) {
  Tape* tape = OpAccess::common_tape({&a});
  Node node;
  node.op = op;
  node.factor = factor;
  node.inputs = {static_cast<std::uint32_t>(a.index())};
  node.value = detail::forward_unary(op, OpAccess::node_of(a).value, factor);
  return OpAccess::push(*tape, std::move(node));
}

Var emit_reduce(Op op, const Var& a, int axis) {
  Tape* tape = OpAccess::common_tape({&a});
  if (axis != detail::kAllAxes) detail::check_axis(a.shape(), axis, "reduce");
  Node node;
  node.op = op;
  node.axis = axis;
  node.inputs = {static_cast<std::uint32_t>(a.index())};
  node.value = detail::forward_reduce(op, OpAccess::node_of(a).value, axis);
  return OpAccess::push(*tape, std::move(node));
}

void require_rank2(const Var& v, const char* what) {
  if (v.shape().size() != 2) {
    throw DimensionError(std::string(what) + " requires a rank-2 tensor, got " +
                         shape_str(v.shape()));
  }
}

}  // namespace

Var add(const Var& a, const Var& b) { return emit_binary(Op::Add, a, b); }
Var sub(const Var& a, const Var& b) { return emit_binary(Op::Sub, a, b); }
Var mul(const Var& a, const Var& b) { return emit_binary(Op::Mul, a, b); }
Var scale(const Var& a, double factor) { return emit_unary(Op::Scale, a, factor); }
Var exp(const Var& a) { return emit_unary(Op::Exp, a); }
Var log(const Var& a) { return emit_unary(Op::Log, a); }
Var square(const Var& a) { return emit_unary(Op::Square, a); }
Var relu(const Var& a) { return emit_unary(Op::Relu, a); }

Var matmul(const Var& a, const Var& b) {
  Tape* tape = OpAccess::common_tape({&a, &b});
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  if (a.shape()[1] != b.shape()[0]) {
    throw DimensionError("matmul: inner dimensions disagree: " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
  Node node;
  node.op = Op::MatMul;
  node.inputs = {static_cast<std::uint32_t>(a.index()), static_cast<std::uint32_t>(b.index())};
  node.value = detail::forward_matmul(OpAccess::node_of(a).value, OpAccess::node_of(b).value);
  return OpAccess::push(*tape, std::move(node));
}

Var conv2d(const Var& input, const Var& kernel, std::size_t stride) {
  Tape* tape = OpAccess::common_tape({&input, &kernel});
  if (input.shape().size() != 4 || kernel.shape().size() != 4) {
    throw DimensionError("conv2d expects rank-4 input and kernel, got " +
                         shape_str(input.shape()) + " and " + shape_str(kernel.shape()));
  }
  if (stride == 0) throw DomainError("conv2d: stride must be positive");
  if (input.shape()[1] != kernel.shape()[1]) {
    throw DimensionError("conv2d: channel mismatch: input " + shape_str(input.shape()) +
                         " vs kernel " + shape_str(kernel.shape()));
  }
  if (kernel.shape()[2] > input.shape()[2] || kernel.shape()[3] > input.shape()[3]) {
    throw DimensionError("conv2d: kernel " + shape_str(kernel.shape()) +
                         " larger than input " + shape_str(input.shape()));
  }
  Node node;
  node.op = Op::Conv2d;
  node.stride = stride;
  node.inputs = {static_cast<std::uint32_t>(input.index()),
                 static_cast<std::uint32_t>(kernel.index())};
  node.value = detail::forward_conv2d(OpAccess::node_of(input).value,
                                      OpAccess::node_of(kernel).value, stride);
  return OpAccess::push(*tape, std::move(node));
}

Var reshape(const Var& a, Shape shape) {
  Tape* tape = OpAccess::common_tape({&a});
  if (shape_size(shape) != a.size()) {
    throw DimensionError("reshape " + shape_str(a.shape()) + " -> " + shape_str(shape) +
                         " changes element count");
  }
  Node node;
  node.op = Op::Reshape;
  node.inputs = {static_cast<std::uint32_t>(a.index())};
  node.value = Tensor(std::move(shape), OpAccess::node_of(a).value.values());
  return OpAccess::push(*tape, std::move(node));
}

Var reduce_sum(const Var& a) { return emit_reduce(Op::ReduceSum, a, detail::kAllAxes); }
Var reduce_sum(const Var& a, int axis) { return emit_reduce(Op::ReduceSum, a, axis); }
Var reduce_mean(const Var& a) { return emit_reduce(Op::ReduceMean, a, detail::kAllAxes); }
Var reduce_mean(const Var& a, int axis) { return emit_reduce(Op::ReduceMean, a, axis); }
Var reduce_max(const Var& a) { return emit_reduce(Op::ReduceMax, a, detail::kAllAxes); }
Var reduce_max(const Var& a, int axis) { return emit_reduce(Op::ReduceMax, a, axis); }

Var logsumexp(const Var& a, int axis) {
  Tape* tape = OpAccess::common_tape({&a});
  detail::check_axis(a.shape(), axis, "logsumexp");
  Node node;
  node.op = Op::LogSumExp;
  node.axis = axis;
  node.inputs = {static_cast<std::uint32_t>(a.index())};
  node.value = detail::forward_logsumexp(OpAccess::node_of(a).value, axis);
  return OpAccess::push(*tape, std::move(node));
}

namespace {

Var emit_sqdist(const Var& a, const Var& b, const Var* w) {
  require_rank2(a, "pairwise_sqdist");
  require_rank2(b, "pairwise_sqdist");
  if (a.shape()[1] != b.shape()[1]) {
    throw DimensionError("pairwise_sqdist: feature widths disagree: " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  Tape* tape = w ? OpAccess::common_tape({&a, &b, w}) : OpAccess::common_tape({&a, &b});
  if (w) {
    require_rank2(*w, "pairwise_sqdist weights");
    if (w->shape() != b.shape()) {
      throw DimensionError("pairwise_sqdist: weights " + shape_str(w->shape()) +
                           " must match centers " + shape_str(b.shape()));
    }
  }
  Node node;
  node.op = w ? Op::SqDistW : Op::SqDist;
  node.inputs = {static_cast<std::uint32_t>(a.index()), static_cast<std::uint32_t>(b.index())};
  if (w) node.inputs.push_back(static_cast<std::uint32_t>(w->index()));
  node.value = detail::forward_sqdist(OpAccess::node_of(a).value, OpAccess::node_of(b).value,
                                      w ? &OpAccess::node_of(*w).value : nullptr);
  return OpAccess::push(*tape, std::move(node));
}

}  // namespace

Var pairwise_sqdist(const Var& a, const Var& b) { return emit_sqdist(a, b, nullptr); }
Var pairwise_sqdist(const Var& a, const Var& b, const Var& w) {
  return emit_sqdist(a, b, &w);
}

Var slice_cols(const Var& a, std::size_t start, std::size_t count) {
  Tape* tape = OpAccess::common_tape({&a});
  require_rank2(a, "slice_cols");
  if (count == 0 || start + count > a.shape()[1]) {
    throw DimensionError("slice_cols [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") out of range for " +
                         shape_str(a.shape()));
  }
  Node node;
  node.op = Op::SliceCols;
  node.slice_start = start;
  node.inputs = {static_cast<std::uint32_t>(a.index())};
  node.value = detail::forward_slice_cols(OpAccess::node_of(a).value, start, count);
  return OpAccess::push(*tape, std::move(node));
}

namespace {

Var emit_concat(Op op, const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat of zero tensors");
  std::vector<const Var*> ptrs;
  for (const Var& v : parts) ptrs.push_back(&v);
  Tape* tape = nullptr;
  for (const Var* v : ptrs) {
    Tape* t = OpAccess::common_tape({v});
    if (tape == nullptr) tape = t;
    if (t != tape) throw UsageError("operands belong to different tapes");
  }
  std::vector<const Tensor*> tensors;
  Node node;
  node.op = op;
  for (const Var& v : parts) {
    require_rank2(v, "concat");
    const std::size_t fixed = op == Op::ConcatCols ? 0 : 1;
    if (v.shape()[fixed] != parts[0].shape()[fixed]) {
      throw DimensionError("concat: incompatible shapes " + shape_str(parts[0].shape()) +
                           " and " + shape_str(v.shape()));
    }
    node.inputs.push_back(static_cast<std::uint32_t>(v.index()));
    tensors.push_back(&OpAccess::node_of(v).value);
  }
  node.value = op == Op::ConcatCols ? detail::forward_concat_cols(tensors)
                                    : detail::forward_concat_rows(tensors);
  return OpAccess::push(*tape, std::move(node));
}

}  // namespace

Var concat_cols(const std::vector<Var>& parts) { return emit_concat(Op::ConcatCols, parts); }
Var concat_rows(const std::vector<Var>& parts) { return emit_concat(Op::ConcatRows, parts); }

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

namespace {

std::vector<double>& grad_buf(std::deque<Node>& nodes, std::uint32_t idx) {
  Node& n = nodes[idx];
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

void backward_elementwise(std::deque<Node>& nodes, Node& node) {
  const Tensor& a = nodes[node.inputs[0]].value;
  const Tensor& b = nodes[node.inputs[1]].value;
  const Shape& out_shape = node.value.shape();
  detail::OperandIndex ia = detail::operand_index(a.shape(), out_shape);
  detail::OperandIndex ib = detail::operand_index(b.shape(), out_shape);
  const std::vector<double>& g = node.grad;
  if (nodes[node.inputs[0]].needs_grad) {
    std::vector<double>& da = grad_buf(nodes, node.inputs[0]);
    for (std::size_t i = 0; i < g.size(); ++i) {
      switch (node.op) {
        case Op::Add:
        case Op::Sub: da[ia(i)] += g[i]; break;
        case Op::Mul: da[ia(i)] += g[i] * b[ib(i)]; break;
        default: break;
      }
    }
  }
  if (nodes[node.inputs[1]].needs_grad) {
    std::vector<double>& db = grad_buf(nodes, node.inputs[1]);
    for (std::size_t i = 0; i < g.size(); ++i) {
      switch (node.op) {
        case Op::Add: db[ib(i)] += g[i]; break;
        case Op::Sub: db[ib(i)] -= g[i]; break;
        case Op::Mul: db[ib(i)] += g[i] * a[ia(i)]; break;
        default: break;
      }
    }
  }
}

void backward_unary(std::deque<Node>& nodes, Node& node) {
  if (!nodes[node.inputs[0]].needs_grad) return;
  const Tensor& x = nodes[node.inputs[0]].value;
  const std::vector<double>& g = node.grad;
  std::vector<double>& dx = grad_buf(nodes, node.inputs[0]);
  for (std::size_t i = 0; i < g.size(); ++i) {
    switch (node.op) {
      case Op::Scale: dx[i] += node.factor * g[i]; break;
      case Op::Exp: dx[i] += node.value[i] * g[i]; break;
      case Op::Log: dx[i] += g[i] / x[i]; break;
      case Op::Square: dx[i] += 2.0 * x[i] * g[i]; break;
      // subgradient at exactly 0 is 0
      case Op::Relu: dx[i] += x[i] > 0.0 ? g[i] : 0.0; break;
      default: break;
    }
  }
}

void backward_matmul(std::deque<Node>& nodes, Node& node) {
  const Tensor& a = nodes[node.inputs[0]].value;
  const Tensor& b = nodes[node.inputs[1]].value;
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  const std::vector<double>& g = node.grad;
  if (nodes[node.inputs[0]].needs_grad) {
    std::vector<double>& da = grad_buf(nodes, node.inputs[0]);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * b[p * n + j];
        da[i * k + p] += acc;
      }
    }
  }
  if (nodes[node.inputs[1]].needs_grad) {
    std::vector<double>& db = grad_buf(nodes, node.inputs[1]);
    for (std::size_t p = 0; p < k; ++p) {
      for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) acc += a[i * k + p] * g[i * n + j];
        db[p * n + j] += acc;
      }
    }
  }
}

void backward_conv2d(std::deque<Node>& nodes, Node& node) {
  const Tensor& in = nodes[node.inputs[0]].value;
  const Tensor& kernel = nodes[node.inputs[1]].value;
  detail::ConvDims d = detail::conv_dims(in.shape(), kernel.shape(), node.stride);
  const std::vector<double>& g = node.grad;
  const bool want_in = nodes[node.inputs[0]].needs_grad;
  const bool want_k = nodes[node.inputs[1]].needs_grad;
  std::vector<double>* din = want_in ? &grad_buf(nodes, node.inputs[0]) : nullptr;
  std::vector<double>* dk = want_k ? &grad_buf(nodes, node.inputs[1]) : nullptr;
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (std::size_t oc = 0; oc < d.cout; ++oc) {
      for (std::size_t oy = 0; oy < d.oh; ++oy) {
        for (std::size_t ox = 0; ox < d.ow; ++ox) {
          const double go = g[((b * d.cout + oc) * d.oh + oy) * d.ow + ox];
          if (go == 0.0) continue;
          for (std::size_t ic = 0; ic < d.cin; ++ic) {
            for (std::size_t ky = 0; ky < d.kh; ++ky) {
              const std::size_t iy = oy * node.stride + ky;
              const std::size_t in_base = ((b * d.cin + ic) * d.h + iy) * d.w +
                                          ox * node.stride;
              const std::size_t k_base = ((oc * d.cin + ic) * d.kh + ky) * d.kw;
              for (std::size_t kx = 0; kx < d.kw; ++kx) {
                if (want_in) (*din)[in_base + kx] += go * kernel[k_base + kx];
                if (want_k) (*dk)[k_base + kx] += go * in[in_base + kx];
              }
            }
          }
        }
      }
    }
  }
}

void backward_reduce(std::deque<Node>& nodes, Node& node) {
  if (!nodes[node.inputs[0]].needs_grad) return;
  const Tensor& x = nodes[node.inputs[0]].value;
  const std::vector<double>& g = node.grad;
  std::vector<double>& dx = grad_buf(nodes, node.inputs[0]);
  if (node.axis == detail::kAllAxes) {
    const double g0 = g[0];
    switch (node.op) {
      case Op::ReduceSum:
        for (double& v : dx) v += g0;
        break;
      case Op::ReduceMean: {
        const double share = g0 / static_cast<double>(x.size());
        for (double& v : dx) v += share;
        break;
      }
      case Op::ReduceMax: {
        // ties route to the first maximal element
        std::size_t best = 0;
        for (std::size_t i = 1; i < x.size(); ++i) {
          if (x[i] > x[best]) best = i;
        }
        dx[best] += g0;
        break;
      }
      default: break;
    }
    return;
  }
  detail::AxisView v = detail::axis_view(x.shape(), node.axis);
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t in = 0; in < v.inner; ++in) {
      const double go = g[o * v.inner + in];
      switch (node.op) {
        case Op::ReduceSum:
          for (std::size_t k = 0; k < v.n; ++k) dx[(o * v.n + k) * v.inner + in] += go;
          break;
        case Op::ReduceMean: {
          const double share = go / static_cast<double>(v.n);
          for (std::size_t k = 0; k < v.n; ++k) dx[(o * v.n + k) * v.inner + in] += share;
          break;
        }
        case Op::ReduceMax: {
          std::size_t best = 0;
          for (std::size_t k = 1; k < v.n; ++k) {
            if (x[(o * v.n + k) * v.inner + in] > x[(o * v.n + best) * v.inner + in]) {
              best = k;
            }
          }
          dx[(o * v.n + best) * v.inner + in] += go;
          break;
        }
        default: break;
      }
    }
  }
}

void backward_logsumexp(std::deque<Node>& nodes, Node& node) {
  if (!nodes[node.inputs[0]].needs_grad) return;
  const Tensor& x = nodes[node.inputs[0]].value;
  const std::vector<double>& g = node.grad;
  std::vector<double>& dx = grad_buf(nodes, node.inputs[0]);
  detail::AxisView v = detail::axis_view(x.shape(), node.axis);
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t in = 0; in < v.inner; ++in) {
      const double go = g[o * v.inner + in];
      const double y = node.value[o * v.inner + in];
      if (go == 0.0) continue;
      for (std::size_t k = 0; k < v.n; ++k) {
        const std::size_t idx = (o * v.n + k) * v.inner + in;
        dx[idx] += go * std::exp(x[idx] - y);
      }
    }
  }
}

void backward_sqdist(std::deque<Node>& nodes, Node& node) {
  const Tensor& a = nodes[node.inputs[0]].value;
  const Tensor& b = nodes[node.inputs[1]].value;
  const Tensor* w = node.op == Op::SqDistW ? &nodes[node.inputs[2]].value : nullptr;
  const std::size_t m = a.shape()[0], d = a.shape()[1], j = b.shape()[0];
  const std::vector<double>& g = node.grad;
  const bool want_a = nodes[node.inputs[0]].needs_grad;
  const bool want_b = nodes[node.inputs[1]].needs_grad;
  const bool want_w = w && nodes[node.inputs[2]].needs_grad;
  std::vector<double>* da = want_a ? &grad_buf(nodes, node.inputs[0]) : nullptr;
  std::vector<double>* db = want_b ? &grad_buf(nodes, node.inputs[1]) : nullptr;
  std::vector<double>* dw = want_w ? &grad_buf(nodes, node.inputs[2]) : nullptr;
  if (!want_a && !want_b && !want_w) return;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t c = 0; c < j; ++c) {
      const double go = g[i * j + c];
      if (go == 0.0) continue;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = a[i * d + k] - b[c * d + k];
        const double wk = w ? (*w)[c * d + k] : 1.0;
        const double t = 2.0 * wk * diff * go;
        if (want_a) (*da)[i * d + k] += t;
        if (want_b) (*db)[c * d + k] -= t;
        if (want_w) (*dw)[c * d + k] += diff * diff * go;
      }
    }
  }
}

void backward_slice_cols(std::deque<Node>& nodes, Node& node) {
  if (!nodes[node.inputs[0]].needs_grad) return;
  const Tensor& x = nodes[node.inputs[0]].value;
  const std::size_t cols = x.shape()[1];
  const std::size_t count = node.value.shape()[1];
  const std::size_t rows = node.value.shape()[0];
  const std::vector<double>& g = node.grad;
  std::vector<double>& dx = grad_buf(nodes, node.inputs[0]);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < count; ++c) {
      dx[r * cols + node.slice_start + c] += g[r * count + c];
    }
  }
}

void backward_concat(std::deque<Node>& nodes, Node& node) {
  const std::vector<double>& g = node.grad;
  if (node.op == Op::ConcatCols) {
    const std::size_t rows = node.value.shape()[0];
    const std::size_t cols = node.value.shape()[1];
    std::size_t at = 0;
    for (std::uint32_t in : node.inputs) {
      const std::size_t pc = nodes[in].value.shape()[1];
      if (nodes[in].needs_grad) {
        std::vector<double>& dx = grad_buf(nodes, in);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < pc; ++c) dx[r * pc + c] += g[r * cols + at + c];
        }
      }
      at += pc;
    }
  } else {
    std::size_t at = 0;
    for (std::uint32_t in : node.inputs) {
      const std::size_t n = nodes[in].value.size();
      if (nodes[in].needs_grad) {
        std::vector<double>& dx = grad_buf(nodes, in);
        for (std::size_t i = 0; i < n; ++i) dx[i] += g[at + i];
      }
      at += n;
    }
  }
}

void backward_node(std::deque<Node>& nodes, Node& node) {
  switch (node.op) {
    case Op::Leaf: break;
    case Op::Add:
    case Op::Sub:
    case Op::Mul: backward_elementwise(nodes, node); break;
    case Op::Scale:
    case Op::Exp:
    case Op::Log:
    case Op::Square:
    case Op::Relu: backward_unary(nodes, node); break;
    case Op::MatMul: backward_matmul(nodes, node); break;
    case Op::Conv2d: backward_conv2d(nodes, node); break;
    case Op::Reshape:
      if (nodes[node.inputs[0]].needs_grad) {
        std::vector<double>& dx = grad_buf(nodes, node.inputs[0]);
        for (std::size_t i = 0; i < node.grad.size(); ++i) dx[i] += node.grad[i];
      }
      break;
    case Op::ReduceSum:
    case Op::ReduceMean:
    case Op::ReduceMax: backward_reduce(nodes, node); break;
    case Op::LogSumExp: backward_logsumexp(nodes, node); break;
    case Op::SqDist:
    case Op::SqDistW: backward_sqdist(nodes, node); break;
    case Op::SliceCols: backward_slice_cols(nodes, node); break;
    case Op::ConcatCols:
    case Op::ConcatRows: backward_concat(nodes, node); break;
  }
}

}  // namespace

void Tape::backward(const Var& loss) {
  if (loss.tape() != this) throw UsageError("loss does not belong to this tape");
  if (consumed_) throw UsageError("backward() called on a consumed tape");
  if (loss.size() != 1) {
    throw DimensionError("backward requires a scalar loss, got shape " +
                         shape_str(loss.shape()));
  }
  consumed_ = true;
  std::deque<Node>& ns = *nodes_;
  ns[loss.index()].grad.assign(1, 1.0);
  for (std::size_t i = loss.index() + 1; i-- > 0;) {
    Node& node = ns[i];
    if (node.grad.empty() || !node.needs_grad) continue;
    backward_node(ns, node);
  }
  for (Node& node : ns) {
    if (node.op == Op::Leaf && node.bound != nullptr && !node.grad.empty()) {
      std::vector<double>& g = node.bound->value.grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += node.grad[i];
    }
  }
}

// ---------------------------------------------------------------------------
// Gradient check
// ---------------------------------------------------------------------------

GradCheckReport grad_check(const ScalarFn& f, const Tensor& x, double step,
                           double tolerance) {
  if (step <= 0.0) throw DomainError("grad_check: step must be positive");
  std::vector<double> analytic;
  {
    Tape tape;
    Var vx = tape.watch(x);
    Var loss = f(tape, vx);
    if (loss.size() != 1) {
      throw DimensionError("grad_check: function must be scalar-valued, got " +
                           shape_str(loss.shape()));
    }
    if (!std::isfinite(loss.item())) {
      throw DomainError("grad_check: function value is not finite at x");
    }
    tape.backward(loss);
    analytic = vx.grad();
  }
  auto eval = [&f](const Tensor& point) {
    Tape tape;
    Var vx = tape.constant(point);
    return f(tape, vx).item();
  };
  GradCheckReport report;
  report.coordinates = x.size();
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + step;
    const double fp = eval(probe);
    probe[i] = x[i] - step;
    const double fm = eval(probe);
    probe[i] = x[i];
    const double numeric = (fp - fm) / (2.0 * step);
    const double denom = std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
    report.max_rel_err = std::max(report.max_rel_err,
                                  std::abs(analytic[i] - numeric) / denom);
  }
  report.pass = report.max_rel_err <= tolerance;
  return report;
}

}  // namespace dcm
