#include "mat/numerics/tensor.hpp"

#include <cmath>
#include <unordered_set>

#include <fmt/format.h>

#include "mat/error.hpp"

namespace mat {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <typename T>
BasicTensor<T>::BasicTensor() = default;

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data, bool requires_grad)
    : node_(std::make_shared<Node>()) {
  for (auto e : shape) {
    if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
  }
  if (shape_size(shape) != data.size()) {
    throw DimensionError(fmt::format("shape {} needs {} values, got {}", shape_str(shape),
                                     shape_size(shape), data.size()));
  }
  for (const T v : data) {
    if (!std::isfinite(v)) throw NumericError("tensor constructed with a non-finite value");
  }
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T{0}, requires_grad);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::full(Shape shape, T value, bool requires_grad) {
  const auto n = shape_size(shape);
  return BasicTensor(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::scalar(T value, bool requires_grad) {
  return BasicTensor(Shape{1}, std::vector<T>{value}, requires_grad);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::matrix(std::size_t rows, std::size_t cols, std::vector<T> data,
                                      bool requires_grad) {
  return BasicTensor(Shape{rows, cols}, std::move(data), requires_grad);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::from_op(const char* op, Shape shape, std::vector<T> data,
                                       std::vector<BasicTensor> parents,
                                       std::function<void(Node&)> backward) {
  for (const T v : data) {
    if (!std::isfinite(v)) throw NumericError(fmt::format("{} produced a non-finite value", op));
  }
  BasicTensor out;
  out.node_ = std::make_shared<Node>();
  out.node_->shape = std::move(shape);
  out.node_->data = std::move(data);
  out.node_->op = op;
  bool track = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) track = track || p.requires_grad();
  }
  if (track) {
    out.node_->requires_grad = true;
    out.node_->backward = std::move(backward);
    out.node_->parents.reserve(parents.size());
    for (auto& p : parents) out.node_->parents.push_back(p.node_);
  }
  return out;
}

template <typename T>
std::size_t BasicTensor<T>::rows() const {
  if (dim() != 2) throw DimensionError("rows() on non-matrix " + shape_str(shape()));
  return node_->shape[0];
}

template <typename T>
std::size_t BasicTensor<T>::cols() const {
  if (dim() != 2) throw DimensionError("cols() on non-matrix " + shape_str(shape()));
  return node_->shape[1];
}

template <typename T>
T BasicTensor<T>::item() const {
  if (size() != 1) throw UsageError("item() on tensor of shape " + shape_str(shape()));
  return node_->data[0];
}

template <typename T>
T BasicTensor<T>::at(std::size_t r, std::size_t c) const {
  return node_->data[r * cols() + c];
}

template <typename T>
BasicTensor<T> BasicTensor<T>::clone() const {
  BasicTensor out(shape(), node_->data, requires_grad());
  out.node_->grad = node_->grad;
  return out;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::detach() const {
  return BasicTensor(shape(), node_->data, false);
}

template <typename T>
void BasicTensor<T>::backward() {
  if (size() != 1) {
    throw UsageError("backward() needs a scalar loss, got shape " + shape_str(shape()));
  }
  if (!requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->ensure_grad();
  node_->grad[0] += T{1};
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) {
      for (auto& p : n->parents) {
        if (p->requires_grad) p->ensure_grad();
      }
      n->backward(*n);
    }
  }

  for (Node* n : order) {
    if (!n->is_leaf()) {
      n->parents.clear();
      n->backward = nullptr;
      n->grad.clear();
      n->grad.shrink_to_fit();
    }
  }
}

template class BasicTensor<float>;
template class BasicTensor<double>;

}  // namespace mat
