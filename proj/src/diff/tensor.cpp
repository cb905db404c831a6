#include "qnode/diff/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "qnode/error.hpp"

namespace qnode::diff {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

thread_local Tape* g_active_tape = nullptr;

using NodePtr = std::shared_ptr<Node>;

Tensor finish(const char* op, Shape shape, std::vector<double> value,
              std::vector<NodePtr> inputs, std::function<void(Node&)> rule) {
  for (double v : value) {
    if (!std::isfinite(v)) fail(ErrorKind::NonFinite, std::string(op) + ": non-finite value");
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  Tape* tape = Tape::active();
  const bool tracked =
      tape != nullptr && std::any_of(inputs.begin(), inputs.end(),
                                     [](const NodePtr& n) { return n->tracked; });
  if (tracked) {
    node->tracked = true;
    node->inputs = std::move(inputs);
    node->backward = std::move(rule);
    tape->record(node);
  }
  return Tensor(std::move(node));
}

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) fail(ErrorKind::InvalidArgument, std::string(op) + ": undefined tensor");
}

enum class Broadcast { Same, LeftScalar, RightScalar };

Broadcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
  require_defined(a, op);
  require_defined(b, op);
  if (a.shape() == b.shape()) return Broadcast::Same;
  if (a.size() == 1) return Broadcast::LeftScalar;
  if (b.size() == 1) return Broadcast::RightScalar;
  fail(ErrorKind::ShapeMismatch, std::string(op) + ": shapes " + shape_string(a.shape()) +
                                     " and " + shape_string(b.shape()) + " are incompatible");
}

// Adds `g[i] * factor(i)` into the gradient of a (possibly scalar) input.
template <typename F>
void accumulate(Node& in, std::span<const double> g, F&& factor) {
  if (!in.tracked) return;
  auto& dst = in.grad_buffer();
  if (dst.size() == 1 && g.size() != 1) {
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * factor(i);
    dst[0] += s;
  } else {
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * factor(i);
  }
}

template <typename F>
Tensor binary(const char* op, const Tensor& a, const Tensor& b, F&& f,
              std::function<void(Node&)> rule) {
  const Broadcast kind = broadcast_kind(a, b, op);
  const Shape& shape = kind == Broadcast::LeftScalar ? b.shape() : a.shape();
  const std::size_t n = shape_size(shape);
  std::vector<double> out(n);
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < n; ++i) {
    const double x = kind == Broadcast::LeftScalar ? av[0] : av[i];
    const double y = kind == Broadcast::RightScalar ? bv[0] : bv[i];
    out[i] = f(x, y);
  }
  return finish(op, shape, std::move(out), {a.node_ptr(), b.node_ptr()}, std::move(rule));
}

inline double pick(std::span<const double> v, std::size_t i) { return v.size() == 1 ? v[0] : v[i]; }

template <typename F, typename D>
Tensor unary(const char* op, const Tensor& a, F&& f, D&& derivative) {
  require_defined(a, op);
  std::vector<double> out(a.size());
  const auto av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(av[i]);
  return finish(op, a.shape(), std::move(out), {a.node_ptr()},
                [derivative](Node& self) {
                  Node& in = *self.inputs[0];
                  accumulate(in, self.grad, [&](std::size_t i) {
                    return derivative(in.value[i], self.value[i]);
                  });
                });
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream ss;
  ss << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) ss << (i ? "," : "") << shape[i];
  ss << ')';
  return ss.str();
}

std::vector<double>& Node::grad_buffer() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad;
}

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
  for (auto e : shape) {
    if (e == 0) fail(ErrorKind::ShapeMismatch, "tensor extents must be positive");
  }
  if (shape_size(shape) != values.size()) {
    fail(ErrorKind::ShapeMismatch, "tensor: shape " + shape_string(shape) + " does not hold " +
                                       std::to_string(values.size()) + " values");
  }
  for (double v : values) {
    if (!std::isfinite(v)) fail(ErrorKind::NonFinite, "tensor: non-finite constant");
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape) { return filled(std::move(shape), 0.0); }

Tensor Tensor::filled(Shape shape, double value) {
  const std::size_t n = shape_size(shape);
  return constant(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return constant({}, {value}); }

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  Tensor t = constant(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  t.node_->tracked = true;
  return t;
}

std::size_t Tensor::rows() const {
  if (rank() != 2) fail(ErrorKind::ShapeMismatch, "rows(): tensor is not rank 2");
  return node_->shape[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) fail(ErrorKind::ShapeMismatch, "cols(): tensor is not rank 2");
  return node_->shape[1];
}

double Tensor::item() const {
  if (size() != 1) fail(ErrorKind::ShapeMismatch, "item(): tensor has " + std::to_string(size()) + " elements");
  return node_->value[0];
}

std::vector<double> Tensor::grad() const {
  if (node_->grad.empty()) return std::vector<double>(node_->value.size(), 0.0);
  return node_->grad;
}

Tape::Scope::Scope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
Tape::Scope::~Scope() { g_active_tape = previous_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::record(const std::shared_ptr<Node>& node) {
  node->tape = this;
  node->tape_index = nodes_.size();
  nodes_.push_back(node);
}

void Tape::backward(const Tensor& loss) {
  require_defined(loss, "backward");
  if (loss.size() != 1) fail(ErrorKind::ShapeMismatch, "backward: loss must be a scalar");
  const Node& root = loss.node();
  if (!root.tracked) {
    // No trainable leaf reaches the loss: every gradient is zero.
    return;
  }
  if (root.requires_grad) {
    loss.node().grad_buffer()[0] += 1.0;
    return;
  }
  if (root.tape != this || root.tape_index >= nodes_.size() ||
      nodes_[root.tape_index].get() != &root) {
    fail(ErrorKind::MalformedTape, "backward: loss was not recorded on this tape");
  }
  for (const auto& n : nodes_) n->grad.clear();
  nodes_[root.tape_index]->grad_buffer()[0] = 1.0;
  for (std::size_t i = root.tape_index + 1; i-- > 0;) {
    Node& n = *nodes_[i];
    if (n.grad.empty()) continue;
    for (const auto& in : n.inputs) {
      if (in->tracked && !in->requires_grad && (in->tape != this || in->tape_index >= i)) {
        fail(ErrorKind::MalformedTape, "backward: input recorded after its consumer");
      }
    }
    if (!n.backward) fail(ErrorKind::MalformedTape, "backward: recorded node without a rule");
    n.backward(n);
  }
}

void backward(const Tensor& loss) {
  require_defined(loss, "backward");
  const Tape* tape = loss.node().tape;
  if (tape == nullptr) {
    if (loss.node().tracked && !loss.node().requires_grad) {
      fail(ErrorKind::MalformedTape, "backward: loss has no tape");
    }
    Tape dummy;
    dummy.backward(loss);
    return;
  }
  const_cast<Tape*>(tape)->backward(loss);
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary("add", a, b, [](double x, double y) { return x + y; }, [](Node& self) {
    accumulate(*self.inputs[0], self.grad, [](std::size_t) { return 1.0; });
    accumulate(*self.inputs[1], self.grad, [](std::size_t) { return 1.0; });
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary("sub", a, b, [](double x, double y) { return x - y; }, [](Node& self) {
    accumulate(*self.inputs[0], self.grad, [](std::size_t) { return 1.0; });
    accumulate(*self.inputs[1], self.grad, [](std::size_t) { return -1.0; });
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary("mul", a, b, [](double x, double y) { return x * y; }, [](Node& self) {
    const auto& av = self.inputs[0]->value;
    const auto& bv = self.inputs[1]->value;
    accumulate(*self.inputs[0], self.grad, [&](std::size_t i) { return pick(bv, i); });
    accumulate(*self.inputs[1], self.grad, [&](std::size_t i) { return pick(av, i); });
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    fail(ErrorKind::ShapeMismatch, "matmul: " + shape_string(a.shape()) + " x " +
                                       shape_string(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n);
  MutMap(out.data(), m, n).noalias() =
      ConstMap(a.values().data(), m, k) * ConstMap(b.values().data(), k, n);
  return finish("matmul", {m, n}, std::move(out), {a.node_ptr(), b.node_ptr()},
                [m, k, n](Node& self) {
                  Node& na = *self.inputs[0];
                  Node& nb = *self.inputs[1];
                  ConstMap g(self.grad.data(), m, n);
                  if (na.tracked) {
                    MutMap(na.grad_buffer().data(), m, k).noalias() +=
                        g * ConstMap(nb.value.data(), k, n).transpose();
                  }
                  if (nb.tracked) {
                    MutMap(nb.grad_buffer().data(), k, n).noalias() +=
                        ConstMap(na.value.data(), m, k).transpose() * g;
                  }
                });
}

Tensor scale(const Tensor& a, double factor) {
  return unary("scale", a, [factor](double x) { return factor * x; },
               [factor](double, double) { return factor; });
}

Tensor tanh(const Tensor& a) {
  return unary("tanh", a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary("sigmoid", a,
               [](double x) {
                 return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
               },
               [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& a) {
  return unary("exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary("log", a, [](double x) { return std::log(x); },
               [](double x, double) { return 1.0 / x; });
}

Tensor square(const Tensor& a) {
  return unary("square", a, [](double x) { return x * x; },
               [](double x, double) { return 2.0 * x; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  return unary("clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
               [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Tensor sum(const Tensor& a) {
  require_defined(a, "sum");
  const auto av = a.values();
  const double s = std::accumulate(av.begin(), av.end(), 0.0);
  return finish("sum", {}, {s}, {a.node_ptr()}, [](Node& self) {
    const double g = self.grad[0];
    accumulate(*self.inputs[0], std::vector<double>(self.inputs[0]->value.size(), g),
               [](std::size_t) { return 1.0; });
  });
}

Tensor mean(const Tensor& a) {
  require_defined(a, "mean");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) fail(ErrorKind::ShapeMismatch, "concat: no inputs");
  for (const auto& p : parts) require_defined(p, "concat");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) fail(ErrorKind::ShapeMismatch, "concat: axis out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == axis || s[d] == first[d];
    if (!ok) {
      fail(ErrorKind::ShapeMismatch, "concat: " + shape_string(s) + " vs " + shape_string(first));
    }
    out_shape[axis] += s[axis];
  }
  const AxisSplit total = split_axis(out_shape, axis);
  std::vector<double> out(shape_size(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    const std::size_t chunk = p.shape()[axis] * total.inner;
    const auto pv = p.values();
    for (std::size_t o = 0; o < total.outer; ++o) {
      std::copy_n(pv.data() + o * chunk, chunk,
                  out.data() + o * total.extent * total.inner + offset * total.inner);
    }
    offset += p.shape()[axis];
  }
  std::vector<NodePtr> inputs;
  for (const auto& p : parts) inputs.push_back(p.node_ptr());
  return finish("concat", out_shape, std::move(out), std::move(inputs),
                [total, offsets, axis](Node& self) {
                  for (std::size_t k = 0; k < self.inputs.size(); ++k) {
                    Node& in = *self.inputs[k];
                    if (!in.tracked) continue;
                    auto& dst = in.grad_buffer();
                    const std::size_t chunk = in.shape[axis] * total.inner;
                    for (std::size_t o = 0; o < total.outer; ++o) {
                      const double* src = self.grad.data() + o * total.extent * total.inner +
                                          offsets[k] * total.inner;
                      double* d = dst.data() + o * chunk;
                      for (std::size_t i = 0; i < chunk; ++i) d[i] += src[i];
                    }
                  }
                });
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end) {
  require_defined(a, "slice");
  if (axis >= a.rank() || begin >= end || end > a.shape()[axis]) {
    fail(ErrorKind::ShapeMismatch, "slice: range [" + std::to_string(begin) + "," +
                                       std::to_string(end) + ") invalid for axis " +
                                       std::to_string(axis) + " of " + shape_string(a.shape()));
  }
  const AxisSplit src = split_axis(a.shape(), axis);
  Shape out_shape = a.shape();
  out_shape[axis] = end - begin;
  const std::size_t chunk = (end - begin) * src.inner;
  std::vector<double> out(shape_size(out_shape));
  const auto av = a.values();
  for (std::size_t o = 0; o < src.outer; ++o) {
    std::copy_n(av.data() + o * src.extent * src.inner + begin * src.inner, chunk,
                out.data() + o * chunk);
  }
  return finish("slice", out_shape, std::move(out), {a.node_ptr()},
                [src, begin, chunk](Node& self) {
                  Node& in = *self.inputs[0];
                  if (!in.tracked) return;
                  auto& dst = in.grad_buffer();
                  for (std::size_t o = 0; o < src.outer; ++o) {
                    double* d = dst.data() + o * src.extent * src.inner + begin * src.inner;
                    const double* g = self.grad.data() + o * chunk;
                    for (std::size_t i = 0; i < chunk; ++i) d[i] += g[i];
                  }
                });
}

Tensor repeat_rows(const Tensor& row, std::size_t rows) {
  require_defined(row, "repeat_rows");
  if (row.rank() != 2 || row.rows() != 1 || rows == 0) {
    fail(ErrorKind::ShapeMismatch, "repeat_rows: expected a (1 x n) row, got " +
                                       shape_string(row.shape()));
  }
  const std::size_t n = row.cols();
  std::vector<double> out(rows * n);
  const auto rv = row.values();
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(rv.data(), n, out.data() + r * n);
  return finish("repeat_rows", {rows, n}, std::move(out), {row.node_ptr()},
                [rows, n](Node& self) {
                  Node& in = *self.inputs[0];
                  if (!in.tracked) return;
                  auto& dst = in.grad_buffer();
                  for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t c = 0; c < n; ++c) dst[c] += self.grad[r * n + c];
                  }
                });
}

}  // namespace qnode::diff
