#ifndef SCRNET_TENSOR_HPP
#define SCRNET_TENSOR_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "scrnet/error.hpp"

namespace scrnet {

using Shape = std::vector<int>;

inline std::size_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1},
                         [](std::size_t a, int d) { return a * static_cast<std::size_t>(d); });
}

inline std::string to_string(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "]";
}

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // allocated on first use
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  std::vector<T>& ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), T(0));
    return grad;
  }
};

/// Handle to a node of the autodiff graph. Copies share the node.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return full(std::move(shape), T(0), requires_grad);
  }

  static Tensor full(Shape shape, T value, bool requires_grad = false) {
    for (int d : shape) {
      if (d < 0) throw InvalidArgument("Tensor: negative dimension in " + to_string(shape));
    }
    auto n = std::make_shared<Node<T>>();
    n->value.assign(scrnet::numel(shape), value);
    n->shape = std::move(shape);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  static Tensor from_data(Shape shape, std::vector<T> data, bool requires_grad = false) {
    if (data.size() != scrnet::numel(shape)) {
      throw InvalidArgument("Tensor: " + std::to_string(data.size()) + " values for shape " + to_string(shape));
    }
    auto n = std::make_shared<Node<T>>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  static Tensor scalar(T v) { return from_data({}, {v}); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int dim(int i) const { return node_->shape.at(static_cast<std::size_t>(i)); }
  std::size_t numel() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }

  std::span<T> data() { return node_->value; }
  std::span<const T> data() const { return node_->value; }
  std::vector<T>& values() { return node_->value; }
  const std::vector<T>& values() const { return node_->value; }

  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const T> grad() const { return node_->grad; }
  std::vector<T>& grad_buffer() { return node_->ensure_grad(); }
  void zero_grad() { node_->grad.clear(); }

  T item() const {
    if (numel() != 1) throw InvalidArgument("Tensor::item on tensor of shape " + to_string(shape()));
    return node_->value[0];
  }

  /// Same values, no history.
  Tensor detach() const { return from_data(shape(), values()); }

  std::shared_ptr<Node<T>> node() const { return node_; }
  explicit Tensor(std::shared_ptr<Node<T>> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<Node<T>> node_;
};

namespace detail {

/// Creates the output node of an operation; the backward closure is attached
/// only if some input needs a gradient.
template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> value, std::vector<Tensor<T>> inputs,
                      std::function<void(Node<T>&)> backward) {
  auto n = std::make_shared<Node<T>>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  for (auto& in : inputs) n->requires_grad = n->requires_grad || in.requires_grad();
  if (n->requires_grad) {
    for (auto& in : inputs) n->inputs.push_back(in.node());
    n->backward = std::move(backward);
  }
  return Tensor<T>(std::move(n));
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw InvalidArgument(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                          to_string(b.shape()));
  }
}

}  // namespace detail

/// Reverse sweep from a scalar. Leaf gradients accumulate across calls until
/// cleared; interior gradients are released afterwards.
template <typename T>
void backward(const Tensor<T>& loss) {
  if (loss.numel() != 1) {
    throw InvalidArgument("backward: loss must be a scalar, got shape " + to_string(loss.shape()));
  }
  if (!loss.requires_grad()) return;

  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{loss.node().get(), 0}};
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node<T>* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node()->ensure_grad()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>& n = **it;
    if (n.backward && !n.grad.empty()) {
      n.backward(n);
      n.grad.clear();
      n.grad.shrink_to_fit();
    }
  }
}

// ---------------------------------------------------------------------------
// Elementwise and reduction operations

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "add");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  return detail::make_result<T>(a.shape(), std::move(out), {a, b}, [](Node<T>& n) {
    for (auto& in : n.inputs) {
      if (!in->requires_grad) continue;
      auto& g = in->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "sub");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
  return detail::make_result<T>(a.shape(), std::move(out), {a, b}, [](Node<T>& n) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (!n.inputs[k]->requires_grad) continue;
      auto& g = n.inputs[k]->ensure_grad();
      const T sign = k == 0 ? T(1) : T(-1);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign * n.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "mul");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  return detail::make_result<T>(a.shape(), std::move(out), {a, b}, [](Node<T>& n) {
    auto& x = *n.inputs[0];
    auto& y = *n.inputs[1];
    if (x.requires_grad) {
      auto& g = x.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * y.value[i];
    }
    if (y.requires_grad) {
      auto& g = y.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * x.value[i];
    }
  });
}

/// scale * x + shift
template <typename T>
Tensor<T> affine(const Tensor<T>& x, T scale, T shift) {
  std::vector<T> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = scale * x.values()[i] + shift;
  return detail::make_result<T>(x.shape(), std::move(out), {x}, [scale](Node<T>& n) {
    auto& g = n.inputs[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += scale * n.grad[i];
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc = 0;
  for (T v : x.values()) acc += v;
  return detail::make_result<T>({}, {acc}, {x}, [](Node<T>& n) {
    auto& g = n.inputs[0]->ensure_grad();
    for (auto& v : g) v += n.grad[0];
  });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope) {
  std::vector<T> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T v = x.values()[i];
    out[i] = v > T(0) ? v : slope * v;
  }
  // Derivative at exactly 0 is the negative-side slope.
  return detail::make_result<T>(x.shape(), std::move(out), {x}, [slope](Node<T>& n) {
    auto& in = *n.inputs[0];
    auto& g = in.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += in.value[i] > T(0) ? n.grad[i] : slope * n.grad[i];
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return leaky_relu(x, T(0));
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  std::vector<T> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(x.values()[i]);
  return detail::make_result<T>(x.shape(), std::move(out), {x}, [](Node<T>& n) {
    auto& g = n.inputs[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * (T(1) - n.value[i] * n.value[i]);
  });
}

/// Mean absolute difference. Subgradient of |r| at r = 0 is 0.
template <typename T>
Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  detail::require_same_shape(pred, target, "l1_loss");
  if (pred.numel() == 0) throw InvalidArgument("l1_loss: empty tensors");
  T acc = 0;
  for (std::size_t i = 0; i < pred.numel(); ++i) acc += std::abs(pred.values()[i] - target.values()[i]);
  const T inv = T(1) / static_cast<T>(pred.numel());
  return detail::make_result<T>({}, {acc * inv}, {pred, target}, [inv](Node<T>& n) {
    auto& p = *n.inputs[0];
    auto& t = *n.inputs[1];
    const T g0 = n.grad[0] * inv;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const T r = p.value[i] - t.value[i];
      const T s = r > T(0) ? T(1) : (r < T(0) ? T(-1) : T(0));
      if (p.requires_grad) p.ensure_grad()[i] += g0 * s;
      if (t.requires_grad) t.ensure_grad()[i] -= g0 * s;
    }
  });
}

/// Channel-axis concatenation of two NCHW tensors.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape().size() != 4 || b.shape().size() != 4) throw InvalidArgument("concat_channels: expects NCHW tensors");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
    throw InvalidArgument("concat_channels: batch/spatial mismatch " + to_string(a.shape()) + " vs " +
                          to_string(b.shape()));
  }
  const int n = a.dim(0), ca = a.dim(1), cb = b.dim(1);
  const std::size_t plane = static_cast<std::size_t>(a.dim(2)) * a.dim(3);
  const std::size_t sa = ca * plane, sb = cb * plane;
  std::vector<T> out(static_cast<std::size_t>(n) * (sa + sb));
  for (int i = 0; i < n; ++i) {
    std::copy_n(a.values().begin() + i * sa, sa, out.begin() + i * (sa + sb));
    std::copy_n(b.values().begin() + i * sb, sb, out.begin() + i * (sa + sb) + sa);
  }
  return detail::make_result<T>({n, ca + cb, a.dim(2), a.dim(3)}, std::move(out), {a, b},
                                [n, sa, sb](Node<T>& node) {
                                  auto& x = *node.inputs[0];
                                  auto& y = *node.inputs[1];
                                  for (int i = 0; i < n; ++i) {
                                    const T* g = node.grad.data() + i * (sa + sb);
                                    if (x.requires_grad) {
                                      T* dst = x.ensure_grad().data() + i * sa;
                                      for (std::size_t j = 0; j < sa; ++j) dst[j] += g[j];
                                    }
                                    if (y.requires_grad) {
                                      T* dst = y.ensure_grad().data() + i * sb;
                                      for (std::size_t j = 0; j < sb; ++j) dst[j] += g[sa + j];
                                    }
                                  }
                                });
}

}  // namespace scrnet

#endif  // SCRNET_TENSOR_HPP
