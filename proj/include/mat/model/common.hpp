#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mat/attention/attention.hpp"
#include "mat/data/types.hpp"
#include "mat/numerics/tensor.hpp"

namespace mat {

template <typename T>
struct LinearParams {
  BasicTensor<T> weight;  // in x out
  BasicTensor<T> bias;    // out
  void visit(const std::string& prefix, const ParamVisitor<T>& f);
};

template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& x, const LinearParams<T>& p);

// Fixed sinusoidal table rows [offset, offset + length) at width d_model.
template <typename T>
BasicTensor<T> positional_encoding(std::size_t length, std::size_t d_model, std::size_t offset = 0);

struct TensorSpec {
  std::string name;
  Shape shape;
  bool operator==(const TensorSpec&) const = default;
};

// Zero-valued tensors of the given shapes, used to lay out a parameter set.
template <typename T>
BasicTensor<T> zeros_param(Shape shape) {
  return BasicTensor<T>::zeros(std::move(shape), true);
}

template <typename T>
MHAParams<T> make_mha(std::size_t d_model, std::size_t heads, std::size_t d_head);
template <typename T>
LayerNormParams<T> make_layer_norm(std::size_t d);
template <typename T>
FFNParams<T> make_ffn(std::size_t d_model, std::size_t d_ff);
template <typename T>
FeatureAttentionParams<T> make_feature_attention(std::size_t d);
template <typename T>
LinearParams<T> make_linear(std::size_t in, std::size_t out);

// Seeded initialisation in visit order: "*.gain" -> 1, rank-1 -> 0,
// matrices -> U(+-sqrt(6 / (fan_in + fan_out))).
template <typename T, typename Params>
void initialise_params(Params& params, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  params.visit([&rng](const std::string& name, BasicTensor<T>& t) {
    auto values = t.mutable_data();
    if (name.size() >= 5 && name.compare(name.size() - 5, 5, ".gain") == 0) {
      std::fill(values.begin(), values.end(), T{1});
    } else if (t.dim() == 1) {
      std::fill(values.begin(), values.end(), T{0});
    } else {
      const double limit = std::sqrt(6.0 / static_cast<double>(t.extent(0) + t.extent(1)));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (auto& v : values) v = static_cast<T>(dist(rng));
    }
  });
}

// Decoder input for one sample: the last `context` observed targets, then
// (teacher forcing) the ground-truth future shifted right by one.
std::vector<double> decoder_input(const MultimodalSample& sample, std::size_t context, bool teacher_forcing);

template <typename T>
BasicTensor<T> to_tensor(const Matrix& m);
template <typename T>
BasicTensor<T> column_tensor(const std::vector<double>& values);

}  // namespace mat
