#pragma once

// Dense double-precision tensors with reverse-mode differentiation over a
// dynamically recorded operation graph. Every reduction runs in a fixed
// left-to-right order and nothing is parallelized, so a fixed seed reproduces
// results bit for bit.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "tclsta/error.hpp"

namespace tclsta {

using Shape = std::vector<std::size_t>;

namespace detail {

inline std::size_t shape_size(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

struct TensorNode {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated iff requires_grad
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> inputs;
  std::function<void(TensorNode&)> backward;  // scatters this node's grad into inputs
};

using NodePtr = std::shared_ptr<TensorNode>;

inline NodePtr make_leaf(Shape shape, std::vector<double> value, bool requires_grad) {
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  if (requires_grad) node->grad.assign(node->value.size(), 0.0);
  return node;
}

inline NodePtr make_op(Shape shape, std::vector<double> value, std::vector<NodePtr> inputs,
                       std::function<void(TensorNode&)> backward) {
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->inputs = std::move(inputs);
  for (const auto& in : node->inputs) {
    if (in->requires_grad) {
      node->requires_grad = true;
      break;
    }
  }
  if (node->requires_grad) {
    node->grad.assign(node->value.size(), 0.0);
    node->backward = std::move(backward);
  }
  return node;
}

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(detail::NodePtr node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    std::size_t n = detail::shape_size(shape);
    return Tensor(detail::make_leaf(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
  }

  static Tensor full(Shape shape, double v, bool requires_grad = false) {
    std::size_t n = detail::shape_size(shape);
    return Tensor(detail::make_leaf(std::move(shape), std::vector<double>(n, v), requires_grad));
  }

  static Tensor from_values(Shape shape, std::vector<double> values, bool requires_grad = false) {
    if (values.size() != detail::shape_size(shape))
      fail("shape-mismatch", "value count " + std::to_string(values.size()) +
                                 " does not fill shape " + detail::shape_str(shape));
    return Tensor(detail::make_leaf(std::move(shape), std::move(values), requires_grad));
  }

  static Tensor scalar(double v, bool requires_grad = false) {
    return from_values({1}, {v}, requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }

  double value(std::size_t i) const { return node_->value[i]; }
  const std::vector<double>& values() const { return node_->value; }

  // direct write access; meant for leaves (parameter updates, probes)
  std::vector<double>& mutable_values() { return node_->value; }

  double scalar_value() const {
    if (size() != 1) fail("shape-mismatch", "scalar_value on tensor of size " + std::to_string(size()));
    return node_->value[0];
  }

  const std::vector<double>& grad() const {
    if (!node_->requires_grad) fail("shape-mismatch", "grad requested on non-differentiable tensor");
    return node_->grad;
  }

  // direct write access, e.g. for seeding optimizer tests
  std::vector<double>& mutable_grad() {
    if (!node_->requires_grad) fail("shape-mismatch", "grad requested on non-differentiable tensor");
    return node_->grad;
  }

  void zero_grad() {
    if (node_->requires_grad) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
  }

  // Reverse pass from a scalar output. Gradients accumulate into every
  // differentiable tensor reachable through the recorded graph.
  void backward() const {
    if (size() != 1) fail("shape-mismatch", "backward requires a scalar output");
    if (!node_->requires_grad) return;  // constant function of its inputs

    // iterative DFS post-order; reversed it visits consumers before producers
    std::vector<detail::TensorNode*> order;
    std::unordered_set<detail::TensorNode*> seen;
    struct Frame {
      detail::TensorNode* node;
      std::size_t next;
    };
    std::vector<Frame> stack{{node_.get(), 0}};
    seen.insert(node_.get());
    while (!stack.empty()) {
      Frame& top = stack.back();
      if (top.next < top.node->inputs.size()) {
        detail::TensorNode* in = top.node->inputs[top.next++].get();
        if (in->requires_grad && !seen.count(in)) {
          seen.insert(in);
          stack.push_back({in, 0});
        }
      } else {
        order.push_back(top.node);
        stack.pop_back();
      }
    }
    node_->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      if ((*it)->backward) (*it)->backward(**it);
    }
  }

  detail::TensorNode* node() const { return node_.get(); }
  detail::NodePtr handle() const { return node_; }

 private:
  detail::NodePtr node_;
};

namespace detail {

inline void check_defined(const Tensor& t, const char* op) {
  if (!t.defined()) fail("shape-mismatch", std::string(op) + ": undefined tensor");
}

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  check_defined(a, op);
  check_defined(b, op);
  if (a.shape() != b.shape())
    fail("shape-mismatch", std::string(op) + ": " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

inline void check_vector(const Tensor& t, const char* op) {
  check_defined(t, op);
  if (t.shape().size() != 1) fail("shape-mismatch", std::string(op) + ": expected a vector, got " + shape_str(t.shape()));
}

inline void check_matrix(const Tensor& t, const char* op) {
  check_defined(t, op);
  if (t.shape().size() != 2) fail("shape-mismatch", std::string(op) + ": expected a matrix, got " + shape_str(t.shape()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise ops

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "add");
  std::vector<double> out = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value(i);
  return Tensor(detail::make_op(a.shape(), std::move(out), {a.handle(), b.handle()},
                                [](detail::TensorNode& self) {
                                  for (int p = 0; p < 2; ++p) {
                                    auto& in = *self.inputs[p];
                                    if (!in.requires_grad) continue;
                                    for (std::size_t i = 0; i < self.grad.size(); ++i) in.grad[i] += self.grad[i];
                                  }
                                }));
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "sub");
  std::vector<double> out = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value(i);
  return Tensor(detail::make_op(a.shape(), std::move(out), {a.handle(), b.handle()},
                                [](detail::TensorNode& self) {
                                  auto& a_in = *self.inputs[0];
                                  auto& b_in = *self.inputs[1];
                                  if (a_in.requires_grad)
                                    for (std::size_t i = 0; i < self.grad.size(); ++i) a_in.grad[i] += self.grad[i];
                                  if (b_in.requires_grad)
                                    for (std::size_t i = 0; i < self.grad.size(); ++i) b_in.grad[i] -= self.grad[i];
                                }));
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value(i) * b.value(i);
  return Tensor(detail::make_op(a.shape(), std::move(out), {a.handle(), b.handle()},
                                [](detail::TensorNode& self) {
                                  auto& a_in = *self.inputs[0];
                                  auto& b_in = *self.inputs[1];
                                  if (a_in.requires_grad)
                                    for (std::size_t i = 0; i < self.grad.size(); ++i)
                                      a_in.grad[i] += self.grad[i] * b_in.value[i];
                                  if (b_in.requires_grad)
                                    for (std::size_t i = 0; i < self.grad.size(); ++i)
                                      b_in.grad[i] += self.grad[i] * a_in.value[i];
                                }));
}

inline Tensor add_scalar(const Tensor& a, double c) {
  detail::check_defined(a, "add_scalar");
  std::vector<double> out = a.values();
  for (double& v : out) v += c;
  return Tensor(detail::make_op(a.shape(), std::move(out), {a.handle()},
                                [](detail::TensorNode& self) {
                                  auto& in = *self.inputs[0];
                                  for (std::size_t i = 0; i < self.grad.size(); ++i) in.grad[i] += self.grad[i];
                                }));
}

inline Tensor mul_scalar(const Tensor& a, double c) {
  detail::check_defined(a, "mul_scalar");
  std::vector<double> out = a.values();
  for (double& v : out) v *= c;
  return Tensor(detail::make_op(a.shape(), std::move(out), {a.handle()},
                                [c](detail::TensorNode& self) {
                                  auto& in = *self.inputs[0];
                                  for (std::size_t i = 0; i < self.grad.size(); ++i) in.grad[i] += c * self.grad[i];
                                }));
}

inline Tensor tanh(const Tensor& a) {
  detail::check_defined(a, "tanh");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a.value(i));
  return Tensor(detail::make_op(a.shape(), std::move(out), {a.handle()},
                                [](detail::TensorNode& self) {
                                  auto& in = *self.inputs[0];
                                  for (std::size_t i = 0; i < self.grad.size(); ++i) {
                                    double y = self.value[i];
                                    in.grad[i] += self.grad[i] * (1.0 - y * y);
                                  }
                                }));
}

inline Tensor sigmoid(const Tensor& a) {
  detail::check_defined(a, "sigmoid");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-a.value(i)));
  return Tensor(detail::make_op(a.shape(), std::move(out), {a.handle()},
                                [](detail::TensorNode& self) {
                                  auto& in = *self.inputs[0];
                                  for (std::size_t i = 0; i < self.grad.size(); ++i) {
                                    double y = self.value[i];
                                    in.grad[i] += self.grad[i] * y * (1.0 - y);
                                  }
                                }));
}

inline Tensor exp(const Tensor& a) {
  detail::check_defined(a, "exp");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(a.value(i));
  return Tensor(detail::make_op(a.shape(), std::move(out), {a.handle()},
                                [](detail::TensorNode& self) {
                                  auto& in = *self.inputs[0];
                                  for (std::size_t i = 0; i < self.grad.size(); ++i)
                                    in.grad[i] += self.grad[i] * self.value[i];
                                }));
}

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

// ---------------------------------------------------------------------------
// linear algebra

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  detail::check_matrix(a, "matmul");
  detail::check_matrix(b, "matmul");
  const std::size_t m = a.shape()[0], k = a.shape()[1];
  const std::size_t k2 = b.shape()[0], n = b.shape()[1];
  if (k != k2)
    fail("shape-mismatch", "matmul: " + detail::shape_str(a.shape()) + " x " + detail::shape_str(b.shape()));
  std::vector<double> out(m * n, 0.0);
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) acc += av[i * k + t] * bv[t * n + j];
      out[i * n + j] = acc;
    }
  return Tensor(detail::make_op({m, n}, std::move(out), {a.handle(), b.handle()},
                                [m, k, n](detail::TensorNode& self) {
                                  auto& a_in = *self.inputs[0];
                                  auto& b_in = *self.inputs[1];
                                  if (a_in.requires_grad) {
                                    for (std::size_t i = 0; i < m; ++i)
                                      for (std::size_t t = 0; t < k; ++t) {
                                        double acc = 0.0;
                                        for (std::size_t j = 0; j < n; ++j)
                                          acc += self.grad[i * n + j] * b_in.value[t * n + j];
                                        a_in.grad[i * k + t] += acc;
                                      }
                                  }
                                  if (b_in.requires_grad) {
                                    for (std::size_t t = 0; t < k; ++t)
                                      for (std::size_t j = 0; j < n; ++j) {
                                        double acc = 0.0;
                                        for (std::size_t i = 0; i < m; ++i)
                                          acc += a_in.value[i * k + t] * self.grad[i * n + j];
                                        b_in.grad[t * n + j] += acc;
                                      }
                                  }
                                }));
}

inline Tensor matvec(const Tensor& a, const Tensor& x) {
  detail::check_matrix(a, "matvec");
  detail::check_vector(x, "matvec");
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  if (x.shape()[0] != n)
    fail("shape-mismatch", "matvec: " + detail::shape_str(a.shape()) + " x " + detail::shape_str(x.shape()));
  std::vector<double> out(m, 0.0);
  const auto& av = a.values();
  const auto& xv = x.values();
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += av[i * n + j] * xv[j];
    out[i] = acc;
  }
  return Tensor(detail::make_op({m}, std::move(out), {a.handle(), x.handle()},
                                [m, n](detail::TensorNode& self) {
                                  auto& a_in = *self.inputs[0];
                                  auto& x_in = *self.inputs[1];
                                  if (a_in.requires_grad) {
                                    for (std::size_t i = 0; i < m; ++i)
                                      for (std::size_t j = 0; j < n; ++j)
                                        a_in.grad[i * n + j] += self.grad[i] * x_in.value[j];
                                  }
                                  if (x_in.requires_grad) {
                                    for (std::size_t j = 0; j < n; ++j) {
                                      double acc = 0.0;
                                      for (std::size_t i = 0; i < m; ++i) acc += a_in.value[i * n + j] * self.grad[i];
                                      x_in.grad[j] += acc;
                                    }
                                  }
                                }));
}

inline Tensor transpose(const Tensor& a) {
  detail::check_matrix(a, "transpose");
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a.value(i * n + j);
  return Tensor(detail::make_op({n, m}, std::move(out), {a.handle()},
                                [m, n](detail::TensorNode& self) {
                                  auto& in = *self.inputs[0];
                                  for (std::size_t i = 0; i < m; ++i)
                                    for (std::size_t j = 0; j < n; ++j) in.grad[i * n + j] += self.grad[j * m + i];
                                }));
}

// A + v * 1^T: adds a column vector to every column of a matrix.
inline Tensor add_col_broadcast(const Tensor& a, const Tensor& v) {
  detail::check_matrix(a, "add_col_broadcast");
  detail::check_vector(v, "add_col_broadcast");
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  if (v.shape()[0] != m)
    fail("shape-mismatch", "add_col_broadcast: " + detail::shape_str(a.shape()) + " + " + detail::shape_str(v.shape()));
  std::vector<double> out = a.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += v.value(i);
  return Tensor(detail::make_op({m, n}, std::move(out), {a.handle(), v.handle()},
                                [m, n](detail::TensorNode& self) {
                                  auto& a_in = *self.inputs[0];
                                  auto& v_in = *self.inputs[1];
                                  if (a_in.requires_grad)
                                    for (std::size_t i = 0; i < self.grad.size(); ++i) a_in.grad[i] += self.grad[i];
                                  if (v_in.requires_grad) {
                                    for (std::size_t i = 0; i < m; ++i) {
                                      double acc = 0.0;
                                      for (std::size_t j = 0; j < n; ++j) acc += self.grad[i * n + j];
                                      v_in.grad[i] += acc;
                                    }
                                  }
                                }));
}

// ---------------------------------------------------------------------------
// reductions and reshaping

inline Tensor sum(const Tensor& a) {
  detail::check_defined(a, "sum");
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  return Tensor(detail::make_op({1}, {acc}, {a.handle()},
                                [](detail::TensorNode& self) {
                                  auto& in = *self.inputs[0];
                                  for (std::size_t i = 0; i < in.grad.size(); ++i) in.grad[i] += self.grad[0];
                                }));
}

inline Tensor mean(const Tensor& a) {
  detail::check_defined(a, "mean");
  if (a.size() == 0) fail("empty-vector", "mean of empty tensor");
  const double inv = 1.0 / static_cast<double>(a.size());
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  return Tensor(detail::make_op({1}, {acc * inv}, {a.handle()},
                                [inv](detail::TensorNode& self) {
                                  auto& in = *self.inputs[0];
                                  for (std::size_t i = 0; i < in.grad.size(); ++i) in.grad[i] += self.grad[0] * inv;
                                }));
}

// axis 0 sums rows away (column totals), axis 1 sums columns away (row totals)
inline Tensor sum_axis(const Tensor& a, int axis) {
  detail::check_matrix(a, "sum_axis");
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  if (axis != 0 && axis != 1) fail("bad-config", "sum_axis: axis must be 0 or 1");
  if (axis == 0) {
    std::vector<double> out(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < m; ++i) acc += a.value(i * n + j);
      out[j] = acc;
    }
    return Tensor(detail::make_op({n}, std::move(out), {a.handle()},
                                  [m, n](detail::TensorNode& self) {
                                    auto& in = *self.inputs[0];
                                    for (std::size_t i = 0; i < m; ++i)
                                      for (std::size_t j = 0; j < n; ++j) in.grad[i * n + j] += self.grad[j];
                                  }));
  }
  std::vector<double> out(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += a.value(i * n + j);
    out[i] = acc;
  }
  return Tensor(detail::make_op({m}, std::move(out), {a.handle()},
                                [m, n](detail::TensorNode& self) {
                                  auto& in = *self.inputs[0];
                                  for (std::size_t i = 0; i < m; ++i)
                                    for (std::size_t j = 0; j < n; ++j) in.grad[i * n + j] += self.grad[i];
                                }));
}

inline Tensor reshape(const Tensor& a, Shape shape) {
  detail::check_defined(a, "reshape");
  if (detail::shape_size(shape) != a.size())
    fail("shape-mismatch", "reshape: " + detail::shape_str(a.shape()) + " -> " + detail::shape_str(shape));
  return Tensor(detail::make_op(std::move(shape), a.values(), {a.handle()},
                                [](detail::TensorNode& self) {
                                  auto& in = *self.inputs[0];
                                  for (std::size_t i = 0; i < self.grad.size(); ++i) in.grad[i] += self.grad[i];
                                }));
}

inline Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) fail("empty-vector", "concat of zero tensors");
  std::vector<detail::NodePtr> inputs;
  std::vector<double> out;
  for (const Tensor& t : parts) {
    detail::check_vector(t, "concat");
    inputs.push_back(t.handle());
    out.insert(out.end(), t.values().begin(), t.values().end());
  }
  return Tensor(detail::make_op({out.size()}, std::move(out), std::move(inputs),
                                [](detail::TensorNode& self) {
                                  std::size_t offset = 0;
                                  for (auto& in_ptr : self.inputs) {
                                    auto& in = *in_ptr;
                                    if (in.requires_grad)
                                      for (std::size_t i = 0; i < in.value.size(); ++i)
                                        in.grad[i] += self.grad[offset + i];
                                    offset += in.value.size();
                                  }
                                }));
}

// elementwise sum of same-shaped tensors, accumulated left to right
inline Tensor add_n(const std::vector<Tensor>& parts) {
  if (parts.empty()) fail("empty-vector", "add_n of zero tensors");
  std::vector<detail::NodePtr> inputs;
  inputs.reserve(parts.size());
  for (const Tensor& t : parts) {
    detail::check_same_shape(parts[0], t, "add_n");
    inputs.push_back(t.handle());
  }
  std::vector<double> out(parts[0].size(), 0.0);
  for (const Tensor& t : parts)
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += t.value(i);
  return Tensor(detail::make_op(parts[0].shape(), std::move(out), std::move(inputs),
                                [](detail::TensorNode& self) {
                                  for (auto& in_ptr : self.inputs) {
                                    auto& in = *in_ptr;
                                    if (!in.requires_grad) continue;
                                    for (std::size_t i = 0; i < self.grad.size(); ++i) in.grad[i] += self.grad[i];
                                  }
                                }));
}

// columns stacked into a (m x T) matrix
inline Tensor stack_cols(const std::vector<Tensor>& cols) {
  if (cols.empty()) fail("empty-vector", "stack_cols of zero columns");
  detail::check_vector(cols[0], "stack_cols");
  const std::size_t m = cols[0].shape()[0];
  const std::size_t T = cols.size();
  std::vector<detail::NodePtr> inputs;
  inputs.reserve(T);
  std::vector<double> out(m * T);
  for (std::size_t t = 0; t < T; ++t) {
    detail::check_same_shape(cols[0], cols[t], "stack_cols");
    inputs.push_back(cols[t].handle());
    for (std::size_t i = 0; i < m; ++i) out[i * T + t] = cols[t].value(i);
  }
  return Tensor(detail::make_op({m, T}, std::move(out), std::move(inputs),
                                [m, T](detail::TensorNode& self) {
                                  for (std::size_t t = 0; t < T; ++t) {
                                    auto& in = *self.inputs[t];
                                    if (!in.requires_grad) continue;
                                    for (std::size_t i = 0; i < m; ++i) in.grad[i] += self.grad[i * T + t];
                                  }
                                }));
}

inline Tensor slice_col(const Tensor& a, std::size_t j) {
  detail::check_matrix(a, "slice_col");
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  if (j >= n) fail("shape-mismatch", "slice_col: column " + std::to_string(j) + " of " + detail::shape_str(a.shape()));
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) out[i] = a.value(i * n + j);
  return Tensor(detail::make_op({m}, std::move(out), {a.handle()},
                                [j, n](detail::TensorNode& self) {
                                  auto& in = *self.inputs[0];
                                  for (std::size_t i = 0; i < self.grad.size(); ++i)
                                    in.grad[i * n + j] += self.grad[i];
                                }));
}

inline Tensor element(const Tensor& a, std::size_t i) {
  detail::check_vector(a, "element");
  if (i >= a.size()) fail("shape-mismatch", "element: index " + std::to_string(i) + " of " + detail::shape_str(a.shape()));
  return Tensor(detail::make_op({1}, {a.value(i)}, {a.handle()},
                                [i](detail::TensorNode& self) { self.inputs[0]->grad[i] += self.grad[0]; }));
}

// tensor scaled by a scalar tensor (differentiable in both)
inline Tensor scale(const Tensor& a, const Tensor& s) {
  detail::check_defined(a, "scale");
  if (!s.defined() || s.size() != 1) fail("shape-mismatch", "scale: scale factor must be a scalar tensor");
  const double sv = s.value(0);
  std::vector<double> out = a.values();
  for (double& v : out) v *= sv;
  return Tensor(detail::make_op(a.shape(), std::move(out), {a.handle(), s.handle()},
                                [](detail::TensorNode& self) {
                                  auto& a_in = *self.inputs[0];
                                  auto& s_in = *self.inputs[1];
                                  if (a_in.requires_grad)
                                    for (std::size_t i = 0; i < self.grad.size(); ++i)
                                      a_in.grad[i] += self.grad[i] * s_in.value[0];
                                  if (s_in.requires_grad) {
                                    double acc = 0.0;
                                    for (std::size_t i = 0; i < self.grad.size(); ++i)
                                      acc += self.grad[i] * a_in.value[i];
                                    s_in.grad[0] += acc;
                                  }
                                }));
}

// ---------------------------------------------------------------------------
// classification primitives

// numerically stable softmax over a vector (max subtracted before exp)
inline Tensor softmax(const Tensor& v) {
  detail::check_vector(v, "softmax");
  const std::size_t n = v.size();
  if (n == 0) fail("empty-vector", "softmax of empty vector");
  double mx = v.value(0);
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, v.value(i));
  std::vector<double> out(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::exp(v.value(i) - mx);
    total += out[i];
  }
  for (std::size_t i = 0; i < n; ++i) out[i] /= total;
  return Tensor(detail::make_op({n}, std::move(out), {v.handle()},
                                [n](detail::TensorNode& self) {
                                  auto& in = *self.inputs[0];
                                  double dot = 0.0;
                                  for (std::size_t i = 0; i < n; ++i) dot += self.grad[i] * self.value[i];
                                  for (std::size_t i = 0; i < n; ++i)
                                    in.grad[i] += self.value[i] * (self.grad[i] - dot);
                                }));
}

inline constexpr double kCrossEntropyClip = 1e-12;

// negative log-likelihood of a probability vector; probabilities are clipped
// at 1e-12 before the log so degenerate inputs stay finite
inline Tensor cross_entropy(const Tensor& probs, std::size_t label) {
  detail::check_vector(probs, "cross_entropy");
  if (probs.size() == 0) fail("empty-vector", "cross_entropy of empty vector");
  if (label >= probs.size())
    fail("bad-label", "label " + std::to_string(label) + " outside " + std::to_string(probs.size()) + " classes");
  const double p = probs.value(label);
  const double clipped = std::max(p, kCrossEntropyClip);
  return Tensor(detail::make_op({1}, {-std::log(clipped)}, {probs.handle()},
                                [label](detail::TensorNode& self) {
                                  auto& in = *self.inputs[0];
                                  double p = in.value[label];
                                  // below the clip the loss is constant in p
                                  if (p >= kCrossEntropyClip) in.grad[label] += -self.grad[0] / p;
                                }));
}

// ---------------------------------------------------------------------------
// convolution and pooling over (rows x cols x channels) grids

// 3x3 cross-correlation, zero padding 1, stride 1.
// input (h x w x Cin), kernels (3 x 3 x Cin x Cout), bias (Cout).
inline Tensor conv2d_3x3(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
  detail::check_defined(input, "conv2d_3x3");
  detail::check_defined(kernels, "conv2d_3x3");
  detail::check_defined(bias, "conv2d_3x3");
  if (input.shape().size() != 3)
    fail("shape-mismatch", "conv2d_3x3: input must be rows x cols x channels, got " + detail::shape_str(input.shape()));
  if (kernels.shape().size() != 4 || kernels.shape()[0] != 3 || kernels.shape()[1] != 3)
    fail("shape-mismatch", "conv2d_3x3: kernels must be 3 x 3 x Cin x Cout, got " + detail::shape_str(kernels.shape()));
  const std::size_t h = input.shape()[0], w = input.shape()[1], cin = input.shape()[2];
  const std::size_t cout = kernels.shape()[3];
  if (kernels.shape()[2] != cin)
    fail("shape-mismatch", "conv2d_3x3: kernel channel count " + std::to_string(kernels.shape()[2]) +
                               " vs input channels " + std::to_string(cin));
  if (bias.shape().size() != 1 || bias.shape()[0] != cout)
    fail("shape-mismatch", "conv2d_3x3: bias must have one entry per output channel");

  const auto& in = input.values();
  const auto& ker = kernels.values();
  std::vector<double> out(h * w * cout, 0.0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t co = 0; co < cout; ++co) {
        double acc = bias.value(co);
        for (std::size_t ky = 0; ky < 3; ++ky) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + ky) - 1;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t kx = 0; kx < 3; ++kx) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x + kx) - 1;
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            const std::size_t in_base = (static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)) * cin;
            const std::size_t ker_base = (ky * 3 + kx) * cin * cout;
            for (std::size_t ci = 0; ci < cin; ++ci) acc += ker[ker_base + ci * cout + co] * in[in_base + ci];
          }
        }
        out[(y * w + x) * cout + co] = acc;
      }
  return Tensor(detail::make_op(
      {h, w, cout}, std::move(out), {input.handle(), kernels.handle(), bias.handle()},
      [h, w, cin, cout](detail::TensorNode& self) {
        auto& in_node = *self.inputs[0];
        auto& ker_node = *self.inputs[1];
        auto& bias_node = *self.inputs[2];
        for (std::size_t y = 0; y < h; ++y)
          for (std::size_t x = 0; x < w; ++x)
            for (std::size_t co = 0; co < cout; ++co) {
              const double g = self.grad[(y * w + x) * cout + co];
              if (g == 0.0) continue;
              if (bias_node.requires_grad) bias_node.grad[co] += g;
              for (std::size_t ky = 0; ky < 3; ++ky) {
                const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + ky) - 1;
                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                for (std::size_t kx = 0; kx < 3; ++kx) {
                  const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x + kx) - 1;
                  if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                  const std::size_t in_base =
                      (static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)) * cin;
                  const std::size_t ker_base = (ky * 3 + kx) * cin * cout;
                  for (std::size_t ci = 0; ci < cin; ++ci) {
                    if (ker_node.requires_grad)
                      ker_node.grad[ker_base + ci * cout + co] += g * in_node.value[in_base + ci];
                    if (in_node.requires_grad)
                      in_node.grad[in_base + ci] += g * ker_node.value[ker_base + ci * cout + co];
                  }
                }
              }
            }
      }));
}

// mean over grid cells, leaving one value per channel
inline Tensor avg_pool_spatial(const Tensor& input) {
  detail::check_defined(input, "avg_pool_spatial");
  if (input.shape().size() != 3)
    fail("shape-mismatch", "avg_pool_spatial: input must be rows x cols x channels, got " +
                               detail::shape_str(input.shape()));
  const std::size_t h = input.shape()[0], w = input.shape()[1], c = input.shape()[2];
  const std::size_t cells = h * w;
  if (cells == 0) fail("empty-vector", "avg_pool_spatial over zero cells");
  std::vector<double> out(c, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double acc = 0.0;
    for (std::size_t cell = 0; cell < cells; ++cell) acc += input.value(cell * c + ch);
    out[ch] = acc / static_cast<double>(cells);
  }
  return Tensor(detail::make_op({c}, std::move(out), {input.handle()},
                                [cells, c](detail::TensorNode& self) {
                                  auto& in = *self.inputs[0];
                                  const double inv = 1.0 / static_cast<double>(cells);
                                  for (std::size_t cell = 0; cell < cells; ++cell)
                                    for (std::size_t ch = 0; ch < c; ++ch)
                                      in.grad[cell * c + ch] += self.grad[ch] * inv;
                                }));
}

// ---------------------------------------------------------------------------
// gradient verification

// Central-difference check of the analytic gradient of a scalar-valued
// function. Returns the max over coordinates of
// |analytic - central| / max(1, |analytic|, |central|).
inline double finite_diff_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps) {
  if (eps <= 0.0) fail("bad-config", "finite_diff_check: eps must be positive");
  detail::check_defined(x, "finite_diff_check");
  Tensor probe = Tensor::from_values(x.shape(), x.values(), true);

  Tensor y0 = f(probe);
  if (y0.size() != 1) fail("shape-mismatch", "finite_diff_check: function must return a scalar");
  if (!std::isfinite(y0.scalar_value())) fail("nonfinite-function", "function value is not finite");
  y0.backward();
  std::vector<double> analytic = probe.grad();

  auto eval_at = [&](std::size_t i, double delta) {
    const double saved = probe.mutable_values()[i];
    probe.mutable_values()[i] = saved + delta;
    Tensor y = f(probe);
    probe.mutable_values()[i] = saved;
    if (y.size() != 1) fail("shape-mismatch", "finite_diff_check: function must return a scalar");
    const double v = y.scalar_value();
    if (!std::isfinite(v)) fail("nonfinite-function", "function value is not finite");
    return v;
  };

  double worst = 0.0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double fp = eval_at(i, eps);
    const double fm = eval_at(i, -eps);
    const double central = (fp - fm) / (2.0 * eps);
    const double denom = std::max({1.0, std::fabs(analytic[i]), std::fabs(central)});
    worst = std::max(worst, std::fabs(analytic[i] - central) / denom);
  }
  return worst;
}

inline void zero_grads(std::vector<Tensor>& params) {
  for (Tensor& p : params) p.zero_grad();
}

// first index of the largest value (ties break toward the smaller index)
inline std::size_t argmax_value(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace tclsta
