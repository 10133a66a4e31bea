#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "mat/numerics/tensor.hpp"

namespace mat {

inline constexpr double kLayerNormEps = 1e-5;
// Additive logit for masked attention positions.
inline constexpr double kMaskLogit = -1e9;

template <typename T> BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T> BasicTensor<T> transpose(const BasicTensor<T>& a);

template <typename T> BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T> BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T> BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T> BasicTensor<T> scale(const BasicTensor<T>& a, double s);
// a[..., j] + bias[j]
template <typename T> BasicTensor<T> add_bias(const BasicTensor<T>& a, const BasicTensor<T>& bias);

template <typename T> BasicTensor<T> softmax(const BasicTensor<T>& x, std::size_t axis);
template <typename T>
BasicTensor<T> layer_norm(const BasicTensor<T>& x, const BasicTensor<T>& gain,
                          const BasicTensor<T>& bias, double eps = kLayerNormEps);
template <typename T> BasicTensor<T> relu(const BasicTensor<T>& x);
template <typename T> BasicTensor<T> log(const BasicTensor<T>& x);

// Inverted dropout: kept entries scaled by 1/(1-rate). Identity when rate == 0.
template <typename T>
BasicTensor<T> dropout(const BasicTensor<T>& x, double rate, std::mt19937_64& rng);

// Entries with allowed[i] == 0 get kMaskLogit added; shapes must agree.
template <typename T>
BasicTensor<T> mask_logits(const BasicTensor<T>& x, const std::vector<std::uint8_t>& allowed);

template <typename T> BasicTensor<T> sum(const BasicTensor<T>& x);
template <typename T> BasicTensor<T> mean(const BasicTensor<T>& x);

template <typename T> BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape);
// Rows [begin, end) of a matrix.
template <typename T>
BasicTensor<T> slice_rows(const BasicTensor<T>& x, std::size_t begin, std::size_t end);
// Columns [begin, end) of a matrix.
template <typename T>
BasicTensor<T> slice_cols(const BasicTensor<T>& x, std::size_t begin, std::size_t end);
template <typename T> BasicTensor<T> concat_cols(const std::vector<BasicTensor<T>>& parts);
template <typename T> BasicTensor<T> concat_rows(const std::vector<BasicTensor<T>>& parts);

}  // namespace mat
