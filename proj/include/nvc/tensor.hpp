#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "nvc/errors.hpp"

namespace nvc {

using Shape = std::vector<std::int64_t>;

inline std::int64_t numel_of(const Shape& s) {
  std::int64_t n = 1;
  for (auto e : s) n *= e;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

namespace detail {

template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // allocated iff requires_grad
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode<T>>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(TensorNode<T>&)> backprop;

  void enable_grad() {
    requires_grad = true;
    grad.assign(value.size(), T(0));
  }
};

}  // namespace detail

/// Dense n-dimensional array with an optional autodiff tape behind it.
///
/// A Tensor is a cheap handle onto a graph node; operations on tensors
/// record their inputs so that backward() can later push gradients to
/// every leaf that requested them. Values are immutable after creation
/// except through the optimizer (which edits leaf storage in place).
template <typename T>
class Tensor {
 public:
  using Node = detail::TensorNode<T>;

  Tensor() = default;

  Tensor(Shape shape, std::vector<T> data) {
    if (numel_of(shape) != static_cast<std::int64_t>(data.size()))
      throw shape_error("tensor: shape " + shape_str(shape) + " does not hold " +
                        std::to_string(data.size()) + " values");
    n_ = std::make_shared<Node>();
    n_->shape = std::move(shape);
    n_->value = std::move(data);
  }

  static Tensor zeros(Shape shape) {
    auto n = numel_of(shape);
    return Tensor(std::move(shape), std::vector<T>(static_cast<std::size_t>(n), T(0)));
  }

  static Tensor full(Shape shape, T v) {
    auto n = numel_of(shape);
    return Tensor(std::move(shape), std::vector<T>(static_cast<std::size_t>(n), v));
  }

  static Tensor scalar(T v) { return Tensor({1}, {v}); }

  bool defined() const { return n_ != nullptr; }
  const Shape& shape() const { return n_->shape; }
  std::int64_t numel() const { return static_cast<std::int64_t>(n_->value.size()); }
  std::int64_t dim(std::size_t i) const { return n_->shape[i]; }

  const std::vector<T>& data() const { return n_->value; }
  std::vector<T>& mutable_data() { return n_->value; }
  T item() const {
    if (numel() != 1) throw shape_error("item: tensor " + shape_str(shape()) + " is not scalar");
    return n_->value[0];
  }

  bool requires_grad() const { return n_->requires_grad; }
  Tensor& set_requires_grad() {
    n_->enable_grad();
    return *this;
  }
  const std::vector<T>& grad() const {
    if (!n_->requires_grad) throw error("grad: tensor does not track gradients");
    return n_->grad;
  }
  void zero_grad() {
    if (n_->requires_grad) std::fill(n_->grad.begin(), n_->grad.end(), T(0));
  }

  /// Same values, detached from the tape.
  Tensor detach() const { return Tensor(n_->shape, n_->value); }

  Node* node() const { return n_.get(); }
  const std::shared_ptr<Node>& node_ptr() const { return n_; }

  static Tensor from_node(std::shared_ptr<Node> n) {
    Tensor t;
    t.n_ = std::move(n);
    return t;
  }

 private:
  std::shared_ptr<Node> n_;
};

namespace detail {

template <typename T>
Tensor<T> make_op(Shape shape, std::vector<T> value,
                  std::vector<std::shared_ptr<TensorNode<T>>> parents,
                  std::function<void(TensorNode<T>&)> backprop) {
  auto n = std::make_shared<TensorNode<T>>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  for (const auto& p : parents)
    if (p->requires_grad) n->requires_grad = true;
  if (n->requires_grad) {
    n->grad.assign(n->value.size(), T(0));
    n->parents = std::move(parents);
    n->backprop = std::move(backprop);
  }
  return Tensor<T>::from_node(std::move(n));
}

template <typename T>
void check_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape())
    throw shape_error(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                      shape_str(b.shape()));
}

}  // namespace detail

// ---- elementwise arithmetic ------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape("add", a, b);
  std::vector<T> out(a.data());
  const auto& bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  auto an = a.node_ptr();
  auto bn = b.node_ptr();
  return detail::make_op<T>(a.shape(), std::move(out), {an, bn},
                            [an, bn](detail::TensorNode<T>& n) {
                              for (std::size_t i = 0; i < n.grad.size(); ++i) {
                                if (an->requires_grad) an->grad[i] += n.grad[i];
                                if (bn->requires_grad) bn->grad[i] += n.grad[i];
                              }
                            });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape("sub", a, b);
  std::vector<T> out(a.data());
  const auto& bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  auto an = a.node_ptr();
  auto bn = b.node_ptr();
  return detail::make_op<T>(a.shape(), std::move(out), {an, bn},
                            [an, bn](detail::TensorNode<T>& n) {
                              for (std::size_t i = 0; i < n.grad.size(); ++i) {
                                if (an->requires_grad) an->grad[i] += n.grad[i];
                                if (bn->requires_grad) bn->grad[i] -= n.grad[i];
                              }
                            });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape("mul", a, b);
  std::vector<T> out(a.data());
  const auto& bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  auto an = a.node_ptr();
  auto bn = b.node_ptr();
  return detail::make_op<T>(a.shape(), std::move(out), {an, bn},
                            [an, bn](detail::TensorNode<T>& n) {
                              for (std::size_t i = 0; i < n.grad.size(); ++i) {
                                if (an->requires_grad) an->grad[i] += n.grad[i] * bn->value[i];
                                if (bn->requires_grad) bn->grad[i] += n.grad[i] * an->value[i];
                              }
                            });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c) {
  std::vector<T> out(a.data());
  for (auto& v : out) v *= c;
  auto an = a.node_ptr();
  return detail::make_op<T>(a.shape(), std::move(out), {an},
                            [an, c](detail::TensorNode<T>& n) {
                              for (std::size_t i = 0; i < n.grad.size(); ++i)
                                an->grad[i] += c * n.grad[i];
                            });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T c) {
  std::vector<T> out(a.data());
  for (auto& v : out) v += c;
  auto an = a.node_ptr();
  return detail::make_op<T>(a.shape(), std::move(out), {an},
                            [an](detail::TensorNode<T>& n) {
                              for (std::size_t i = 0; i < n.grad.size(); ++i)
                                an->grad[i] += n.grad[i];
                            });
}

// ---- elementwise nonlinearities ---------------------------------------------

namespace detail {
template <typename T>
inline T stable_sigmoid(T x) {
  if (x >= T(0)) {
    T e = std::exp(-x);
    return T(1) / (T(1) + e);
  }
  T e = std::exp(x);
  return e / (T(1) + e);
}
}  // namespace detail

/// max(x, slope*x); the subgradient at 0 is slope.
template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& a, T slope) {
  std::vector<T> out(a.data());
  for (auto& v : out) v = v > T(0) ? v : slope * v;
  auto an = a.node_ptr();
  return detail::make_op<T>(a.shape(), std::move(out), {an},
                            [an, slope](detail::TensorNode<T>& n) {
                              for (std::size_t i = 0; i < n.grad.size(); ++i)
                                an->grad[i] +=
                                    n.grad[i] * (an->value[i] > T(0) ? T(1) : slope);
                            });
}

/// Logistic sigmoid, clamped into the open interval (0, 1) so downstream
/// code can rely on strict bounds even after float rounding.
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  const T hi = T(1) - std::numeric_limits<T>::epsilon() / T(2);
  const T lo = std::numeric_limits<T>::min();
  std::vector<T> out(a.data());
  for (auto& v : out) {
    T s = detail::stable_sigmoid(v);
    v = s > hi ? hi : (s < lo ? lo : s);
  }
  auto an = a.node_ptr();
  return detail::make_op<T>(a.shape(), std::move(out), {an},
                            [an](detail::TensorNode<T>& n) {
                              for (std::size_t i = 0; i < n.grad.size(); ++i) {
                                T y = n.value[i];
                                an->grad[i] += n.grad[i] * y * (T(1) - y);
                              }
                            });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& a) {
  std::vector<T> out(a.data());
  for (auto& v : out) v = std::exp(v);
  auto an = a.node_ptr();
  return detail::make_op<T>(a.shape(), std::move(out), {an},
                            [an](detail::TensorNode<T>& n) {
                              for (std::size_t i = 0; i < n.grad.size(); ++i)
                                an->grad[i] += n.grad[i] * n.value[i];
                            });
}

template <typename T>
Tensor<T> log(const Tensor<T>& a) {
  std::vector<T> out(a.data());
  for (auto& v : out) v = std::log(v);
  auto an = a.node_ptr();
  return detail::make_op<T>(a.shape(), std::move(out), {an},
                            [an](detail::TensorNode<T>& n) {
                              for (std::size_t i = 0; i < n.grad.size(); ++i)
                                an->grad[i] += n.grad[i] / an->value[i];
                            });
}

// ---- reductions and structure ------------------------------------------------

/// Sum of all elements; result is a scalar tensor.
template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T s = 0;
  for (T v : a.data()) s += v;
  auto an = a.node_ptr();
  return detail::make_op<T>({1}, {s}, {an}, [an](detail::TensorNode<T>& n) {
    T g = n.grad[0];
    for (std::size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += g;
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  return scale(sum(a), T(1) / static_cast<T>(a.numel()));
}

/// Mean squared difference over all elements.
template <typename T>
Tensor<T> mse_loss(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape("mse_loss", a, b);
  auto d = sub(a, b);
  return mean(mul(d, d));
}

/// Copies channels [c0, c1) of an NCHW tensor.
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& a, std::int64_t c0, std::int64_t c1) {
  const auto& s = a.shape();
  if (s.size() != 4 || c0 < 0 || c1 > s[1] || c0 >= c1)
    throw shape_error("slice_channels: bad range [" + std::to_string(c0) + "," +
                      std::to_string(c1) + ") for " + shape_str(s));
  const std::int64_t N = s[0], C = s[1], HW = s[2] * s[3], Cs = c1 - c0;
  std::vector<T> out(static_cast<std::size_t>(N * Cs * HW));
  const auto& av = a.data();
  for (std::int64_t n = 0; n < N; ++n)
    for (std::int64_t c = 0; c < Cs; ++c)
      std::copy_n(av.begin() + ((n * C + c0 + c) * HW), HW,
                  out.begin() + ((n * Cs + c) * HW));
  auto an = a.node_ptr();
  return detail::make_op<T>({N, Cs, s[2], s[3]}, std::move(out), {an},
                            [an, N, C, HW, Cs, c0](detail::TensorNode<T>& n) {
                              for (std::int64_t b = 0; b < N; ++b)
                                for (std::int64_t c = 0; c < Cs; ++c) {
                                  const T* g = n.grad.data() + (b * Cs + c) * HW;
                                  T* dst = an->grad.data() + ((b * C + c0 + c) * HW);
                                  for (std::int64_t i = 0; i < HW; ++i) dst[i] += g[i];
                                }
                            });
}

// ---- reverse pass -------------------------------------------------------------

/// Populates gradients of every grad-tracking leaf reachable from `loss`.
/// Intermediate (non-leaf) gradients are reset on each call; leaf gradients
/// accumulate until zeroed by the caller.
template <typename T>
void backward(const Tensor<T>& loss) {
  if (loss.numel() != 1)
    throw shape_error("backward: loss must be scalar, got " + shape_str(loss.shape()));
  if (!loss.requires_grad()) return;  // nothing reachable wants gradients

  using Node = detail::TensorNode<T>;
  std::vector<Node*> topo;
  std::unordered_set<Node*> seen;
  // Iterative post-order DFS over grad-requiring subgraph.
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node(), 0}};
  seen.insert(loss.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      topo.push_back(node);
      stack.pop_back();
    }
  }
  // Non-leaf grads are per-call scratch.
  for (Node* n : topo)
    if (n->backprop) std::fill(n->grad.begin(), n->grad.end(), T(0));
  loss.node()->grad[0] += T(1);
  for (auto it = topo.rbegin(); it != topo.rend(); ++it)
    if ((*it)->backprop) (*it)->backprop(**it);
}

}  // namespace nvc
