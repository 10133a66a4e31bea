#include "mat/numerics/ops.hpp"

#include <cmath>

#include <fmt/format.h>

#include "mat/error.hpp"

namespace mat {

namespace {

template <typename T>
using NodeT = TensorNode<T>;

template <typename T>
NodeT<T>* grad_target(NodeT<T>& self, std::size_t i) {
  auto* p = self.parents.at(i).get();
  return p->requires_grad ? p : nullptr;
}

template <typename T>
void require_same_shape(const char* op, const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(
        fmt::format("{}: shape mismatch {} vs {}", op, shape_str(a.shape()), shape_str(b.shape())));
  }
}

template <typename T>
void require_matrix(const char* op, const BasicTensor<T>& a) {
  if (a.dim() != 2) throw DimensionError(fmt::format("{}: expected a matrix, got {}", op, shape_str(a.shape())));
}

}  // namespace

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_matrix("matmul", a);
  require_matrix("matmul", b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError(fmt::format("matmul: inner extents differ, {} x {}", shape_str(a.shape()),
                                     shape_str(b.shape())));
  }
  const auto A = a.data();
  const auto B = b.data();
  std::vector<T> out(m * n);
  std::vector<double> acc(n);
  for (std::size_t i = 0; i < m; ++i) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      const T* brow = &B[p * n];
      for (std::size_t j = 0; j < n; ++j) acc[j] += av * static_cast<double>(brow[j]);
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = static_cast<T>(acc[j]);
  }
  return BasicTensor<T>::from_op("matmul", {m, n}, std::move(out), {a, b}, [m, k, n](NodeT<T>& self) {
    const auto& G = self.grad;
    const auto& Ad = self.parents[0]->data;
    const auto& Bd = self.parents[1]->data;
    if (auto* pa = grad_target(self, 0)) {
      // dA = dC * B^T
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += static_cast<double>(G[i * n + j]) * Bd[p * n + j];
          pa->grad[i * k + p] += static_cast<T>(s);
        }
      }
    }
    if (auto* pb = grad_target(self, 1)) {
      // dB = A^T * dC
      std::vector<double> acc(k * n, 0.0);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double av = Ad[i * k + p];
          for (std::size_t j = 0; j < n; ++j) acc[p * n + j] += av * G[i * n + j];
        }
      }
      for (std::size_t q = 0; q < k * n; ++q) pb->grad[q] += static_cast<T>(acc[q]);
    }
  });
}

template <typename T>
BasicTensor<T> transpose(const BasicTensor<T>& a) {
  require_matrix("transpose", a);
  const std::size_t r = a.rows(), c = a.cols();
  const auto A = a.data();
  std::vector<T> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = A[i * c + j];
  return BasicTensor<T>::from_op("transpose", {c, r}, std::move(out), {a}, [r, c](NodeT<T>& self) {
    if (auto* p = grad_target(self, 0)) {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) p->grad[i * c + j] += self.grad[j * r + i];
    }
  });
}

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape("add", a, b);
  const auto A = a.data();
  const auto B = b.data();
  std::vector<T> out(A.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] + B[i];
  return BasicTensor<T>::from_op("add", a.shape(), std::move(out), {a, b}, [](NodeT<T>& self) {
    for (std::size_t w = 0; w < 2; ++w) {
      if (auto* p = grad_target(self, w)) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
      }
    }
  });
}

template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape("sub", a, b);
  const auto A = a.data();
  const auto B = b.data();
  std::vector<T> out(A.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] - B[i];
  return BasicTensor<T>::from_op("sub", a.shape(), std::move(out), {a, b}, [](NodeT<T>& self) {
    if (auto* p = grad_target(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
    }
    if (auto* p = grad_target(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] -= self.grad[i];
    }
  });
}

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape("mul", a, b);
  const auto A = a.data();
  const auto B = b.data();
  std::vector<T> out(A.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] * B[i];
  return BasicTensor<T>::from_op("mul", a.shape(), std::move(out), {a, b}, [](NodeT<T>& self) {
    const auto& Ad = self.parents[0]->data;
    const auto& Bd = self.parents[1]->data;
    if (auto* p = grad_target(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i] * Bd[i];
    }
    if (auto* p = grad_target(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i] * Ad[i];
    }
  });
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, double s) {
  const auto A = a.data();
  std::vector<T> out(A.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<T>(A[i] * s);
  return BasicTensor<T>::from_op("scale", a.shape(), std::move(out), {a}, [s](NodeT<T>& self) {
    if (auto* p = grad_target(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += static_cast<T>(self.grad[i] * s);
    }
  });
}

template <typename T>
BasicTensor<T> add_bias(const BasicTensor<T>& a, const BasicTensor<T>& bias) {
  const std::size_t d = a.shape().back();
  if (bias.size() != d || bias.dim() != 1) {
    throw DimensionError(fmt::format("add_bias: bias {} does not match last extent of {}",
                                     shape_str(bias.shape()), shape_str(a.shape())));
  }
  const auto A = a.data();
  const auto Bv = bias.data();
  std::vector<T> out(A.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] + Bv[i % d];
  return BasicTensor<T>::from_op("add_bias", a.shape(), std::move(out), {a, bias}, [d](NodeT<T>& self) {
    if (auto* p = grad_target(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
    }
    if (auto* p = grad_target(self, 1)) {
      std::vector<double> acc(d, 0.0);
      for (std::size_t i = 0; i < self.grad.size(); ++i) acc[i % d] += self.grad[i];
      for (std::size_t j = 0; j < d; ++j) p->grad[j] += static_cast<T>(acc[j]);
    }
  });
}

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& x, std::size_t axis) {
  const auto& shape = x.shape();
  if (axis >= shape.size()) {
    throw DimensionError(fmt::format("softmax: axis {} out of range for {}", axis, shape_str(shape)));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t n = shape[axis];
  const auto X = x.data();
  for (const T v : X) {
    if (!std::isfinite(v)) throw NumericError("softmax: non-finite input");
  }
  std::vector<T> out(X.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      double mx = X[base];
      for (std::size_t i = 1; i < n; ++i) mx = std::max<double>(mx, X[base + i * inner]);
      double denom = 0.0;
      for (std::size_t i = 0; i < n; ++i) denom += std::exp(static_cast<double>(X[base + i * inner]) - mx);
      for (std::size_t i = 0; i < n; ++i) {
        out[base + i * inner] = static_cast<T>(std::exp(static_cast<double>(X[base + i * inner]) - mx) / denom);
      }
    }
  }
  return BasicTensor<T>::from_op("softmax", shape, std::move(out), {x}, [outer, inner, n](NodeT<T>& self) {
    auto* p = grad_target(self, 0);
    if (!p) return;
    const auto& Y = self.data;
    const auto& G = self.grad;
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * n * inner + in;
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += static_cast<double>(Y[base + i * inner]) * G[base + i * inner];
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t idx = base + i * inner;
          p->grad[idx] += static_cast<T>(Y[idx] * (G[idx] - dot));
        }
      }
    }
  });
}

template <typename T>
BasicTensor<T> layer_norm(const BasicTensor<T>& x, const BasicTensor<T>& gain, const BasicTensor<T>& bias,
                          double eps) {
  const std::size_t d = x.shape().back();
  if (gain.size() != d || bias.size() != d) {
    throw DimensionError(fmt::format("layer_norm: gain {} / bias {} do not match last extent of {}",
                                     shape_str(gain.shape()), shape_str(bias.shape()), shape_str(x.shape())));
  }
  const std::size_t rows = x.size() / d;
  const auto X = x.data();
  const auto Gn = gain.data();
  const auto Bs = bias.data();
  std::vector<T> out(X.size());
  std::vector<double> xhat(X.size());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += X[r * d + j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double c = X[r * d + j] - mu;
      var += c * c;
    }
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      const std::size_t i = r * d + j;
      xhat[i] = (X[i] - mu) * inv_std[r];
      out[i] = static_cast<T>(xhat[i] * Gn[j] + Bs[j]);
    }
  }
  return BasicTensor<T>::from_op(
      "layer_norm", x.shape(), std::move(out), {x, gain, bias},
      [rows, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](NodeT<T>& self) {
        const auto& G = self.grad;
        const auto& Gn = self.parents[1]->data;
        if (auto* pg = grad_target(self, 1)) {
          for (std::size_t j = 0; j < d; ++j) {
            double s = 0.0;
            for (std::size_t r = 0; r < rows; ++r) s += G[r * d + j] * xhat[r * d + j];
            pg->grad[j] += static_cast<T>(s);
          }
        }
        if (auto* pb = grad_target(self, 2)) {
          for (std::size_t j = 0; j < d; ++j) {
            double s = 0.0;
            for (std::size_t r = 0; r < rows; ++r) s += G[r * d + j];
            pb->grad[j] += static_cast<T>(s);
          }
        }
        if (auto* px = grad_target(self, 0)) {
          std::vector<double> dxhat(d);
          for (std::size_t r = 0; r < rows; ++r) {
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
              dxhat[j] = static_cast<double>(G[r * d + j]) * Gn[j];
              m1 += dxhat[j];
              m2 += dxhat[j] * xhat[r * d + j];
            }
            m1 /= static_cast<double>(d);
            m2 /= static_cast<double>(d);
            for (std::size_t j = 0; j < d; ++j) {
              px->grad[r * d + j] += static_cast<T>(inv_std[r] * (dxhat[j] - m1 - xhat[r * d + j] * m2));
            }
          }
        }
      });
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
  const auto X = x.data();
  std::vector<T> out(X.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = X[i] > T{0} ? X[i] : T{0};
  return BasicTensor<T>::from_op("relu", x.shape(), std::move(out), {x}, [](NodeT<T>& self) {
    if (auto* p = grad_target(self, 0)) {
      // Subgradient at exactly 0 is taken as 0.
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        if (p->data[i] > T{0}) p->grad[i] += self.grad[i];
      }
    }
  });
}

template <typename T>
BasicTensor<T> log(const BasicTensor<T>& x) {
  const auto X = x.data();
  std::vector<T> out(X.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(X[i] > T{0})) throw NumericError("log: non-positive input");
    out[i] = std::log(X[i]);
  }
  return BasicTensor<T>::from_op("log", x.shape(), std::move(out), {x}, [](NodeT<T>& self) {
    if (auto* p = grad_target(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i] / p->data[i];
    }
  });
}

template <typename T>
BasicTensor<T> dropout(const BasicTensor<T>& x, double rate, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) throw UsageError(fmt::format("dropout rate {} outside [0,1)", rate));
  if (rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::bernoulli_distribution keep(1.0 - rate);
  std::vector<T> factor(x.size());
  for (auto& f : factor) f = keep(rng) ? static_cast<T>(keep_scale) : T{0};
  const auto X = x.data();
  std::vector<T> out(X.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = X[i] * factor[i];
  return BasicTensor<T>::from_op("dropout", x.shape(), std::move(out), {x},
                                 [factor = std::move(factor)](NodeT<T>& self) {
                                   if (auto* p = grad_target(self, 0)) {
                                     for (std::size_t i = 0; i < self.grad.size(); ++i)
                                       p->grad[i] += self.grad[i] * factor[i];
                                   }
                                 });
}

template <typename T>
BasicTensor<T> mask_logits(const BasicTensor<T>& x, const std::vector<std::uint8_t>& allowed) {
  if (allowed.size() != x.size()) {
    throw DimensionError(fmt::format("mask_logits: mask of {} entries for tensor {}", allowed.size(),
                                     shape_str(x.shape())));
  }
  const auto X = x.data();
  std::vector<T> out(X.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = allowed[i] ? X[i] : static_cast<T>(X[i] + kMaskLogit);
  }
  return BasicTensor<T>::from_op("mask_logits", x.shape(), std::move(out), {x}, [](NodeT<T>& self) {
    if (auto* p = grad_target(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
    }
  });
}

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x) {
  double s = 0.0;
  for (const T v : x.data()) s += v;
  return BasicTensor<T>::from_op("sum", {1}, {static_cast<T>(s)}, {x}, [](NodeT<T>& self) {
    if (auto* p = grad_target(self, 0)) {
      for (auto& g : p->grad) g += self.grad[0];
    }
  });
}

template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& x) {
  const double n = static_cast<double>(x.size());
  double s = 0.0;
  for (const T v : x.data()) s += v;
  return BasicTensor<T>::from_op("mean", {1}, {static_cast<T>(s / n)}, {x}, [n](NodeT<T>& self) {
    if (auto* p = grad_target(self, 0)) {
      const T g = static_cast<T>(self.grad[0] / n);
      for (auto& pg : p->grad) pg += g;
    }
  });
}

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw DimensionError(fmt::format("reshape: {} to {}", shape_str(x.shape()), shape_str(shape)));
  }
  std::vector<T> out(x.data().begin(), x.data().end());
  return BasicTensor<T>::from_op("reshape", std::move(shape), std::move(out), {x}, [](NodeT<T>& self) {
    if (auto* p = grad_target(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
    }
  });
}

template <typename T>
BasicTensor<T> slice_rows(const BasicTensor<T>& x, std::size_t begin, std::size_t end) {
  require_matrix("slice_rows", x);
  if (begin >= end || end > x.rows()) {
    throw DimensionError(fmt::format("slice_rows: [{}, {}) outside {}", begin, end, shape_str(x.shape())));
  }
  const std::size_t c = x.cols();
  std::vector<T> out(x.data().begin() + begin * c, x.data().begin() + end * c);
  return BasicTensor<T>::from_op("slice_rows", {end - begin, c}, std::move(out), {x},
                                 [begin, c](NodeT<T>& self) {
                                   if (auto* p = grad_target(self, 0)) {
                                     for (std::size_t i = 0; i < self.grad.size(); ++i)
                                       p->grad[begin * c + i] += self.grad[i];
                                   }
                                 });
}

template <typename T>
BasicTensor<T> slice_cols(const BasicTensor<T>& x, std::size_t begin, std::size_t end) {
  require_matrix("slice_cols", x);
  if (begin >= end || end > x.cols()) {
    throw DimensionError(fmt::format("slice_cols: [{}, {}) outside {}", begin, end, shape_str(x.shape())));
  }
  const std::size_t r = x.rows(), c = x.cols(), w = end - begin;
  const auto X = x.data();
  std::vector<T> out(r * w);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = X[i * c + begin + j];
  return BasicTensor<T>::from_op("slice_cols", {r, w}, std::move(out), {x}, [r, c, w, begin](NodeT<T>& self) {
    if (auto* p = grad_target(self, 0)) {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < w; ++j) p->grad[i * c + begin + j] += self.grad[i * w + j];
    }
  });
}

template <typename T>
BasicTensor<T> concat_cols(const std::vector<BasicTensor<T>>& parts) {
  if (parts.empty()) throw UsageError("concat_cols: no inputs");
  const std::size_t r = parts.front().rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rows() != r) throw DimensionError("concat_cols: row counts differ");
    widths.push_back(p.cols());
    total += p.cols();
  }
  std::vector<T> out(r * total);
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto P = parts[k].data();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < widths[k]; ++j) out[i * total + off + j] = P[i * widths[k] + j];
    off += widths[k];
  }
  return BasicTensor<T>::from_op("concat_cols", {r, total}, std::move(out), parts,
                                 [r, total, widths](NodeT<T>& self) {
                                   std::size_t off = 0;
                                   for (std::size_t k = 0; k < widths.size(); ++k) {
                                     if (auto* p = grad_target(self, k)) {
                                       for (std::size_t i = 0; i < r; ++i)
                                         for (std::size_t j = 0; j < widths[k]; ++j)
                                           p->grad[i * widths[k] + j] += self.grad[i * total + off + j];
                                     }
                                     off += widths[k];
                                   }
                                 });
}

template <typename T>
BasicTensor<T> concat_rows(const std::vector<BasicTensor<T>>& parts) {
  if (parts.empty()) throw UsageError("concat_rows: no inputs");
  const std::size_t c = parts.front().cols();
  std::size_t total = 0;
  std::vector<std::size_t> sizes;
  for (const auto& p : parts) {
    if (p.cols() != c) throw DimensionError("concat_rows: column counts differ");
    total += p.rows();
    sizes.push_back(p.size());
  }
  std::vector<T> out;
  out.reserve(total * c);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  return BasicTensor<T>::from_op("concat_rows", {total, c}, std::move(out), parts, [sizes](NodeT<T>& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      if (auto* p = grad_target(self, k)) {
        for (std::size_t i = 0; i < sizes[k]; ++i) p->grad[i] += self.grad[off + i];
      }
      off += sizes[k];
    }
  });
}

#define MAT_INSTANTIATE_OPS(T)                                                                       \
  template BasicTensor<T> matmul(const BasicTensor<T>&, const BasicTensor<T>&);                      \
  template BasicTensor<T> transpose(const BasicTensor<T>&);                                          \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                         \
  template BasicTensor<T> sub(const BasicTensor<T>&, const BasicTensor<T>&);                         \
  template BasicTensor<T> mul(const BasicTensor<T>&, const BasicTensor<T>&);                         \
  template BasicTensor<T> scale(const BasicTensor<T>&, double);                                      \
  template BasicTensor<T> add_bias(const BasicTensor<T>&, const BasicTensor<T>&);                    \
  template BasicTensor<T> softmax(const BasicTensor<T>&, std::size_t);                               \
  template BasicTensor<T> layer_norm(const BasicTensor<T>&, const BasicTensor<T>&,                   \
                                     const BasicTensor<T>&, double);                                 \
  template BasicTensor<T> relu(const BasicTensor<T>&);                                               \
  template BasicTensor<T> log(const BasicTensor<T>&);                                                \
  template BasicTensor<T> dropout(const BasicTensor<T>&, double, std::mt19937_64&);                  \
  template BasicTensor<T> mask_logits(const BasicTensor<T>&, const std::vector<std::uint8_t>&);      \
  template BasicTensor<T> sum(const BasicTensor<T>&);                                                \
  template BasicTensor<T> mean(const BasicTensor<T>&);                                               \
  template BasicTensor<T> reshape(const BasicTensor<T>&, Shape);                                     \
  template BasicTensor<T> slice_rows(const BasicTensor<T>&, std::size_t, std::size_t);               \
  template BasicTensor<T> slice_cols(const BasicTensor<T>&, std::size_t, std::size_t);               \
  template BasicTensor<T> concat_cols(const std::vector<BasicTensor<T>>&);                           \
  template BasicTensor<T> concat_rows(const std::vector<BasicTensor<T>>&);

MAT_INSTANTIATE_OPS(float)
MAT_INSTANTIATE_OPS(double)

#undef MAT_INSTANTIATE_OPS

}  // namespace mat
