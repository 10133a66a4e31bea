#include "mat/model/common.hpp"

#include <cmath>

#include <fmt/format.h>

#include "mat/error.hpp"
#include "mat/numerics/ops.hpp"

namespace mat {

template <typename T>
void LinearParams<T>::visit(const std::string& prefix, const ParamVisitor<T>& f) {
  f(prefix + ".weight", weight);
  f(prefix + ".bias", bias);
}

template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& x, const LinearParams<T>& p) {
  return add_bias(matmul(x, p.weight), p.bias);
}

template <typename T>
BasicTensor<T> positional_encoding(std::size_t length, std::size_t d_model, std::size_t offset) {
  std::vector<T> table(length * d_model);
  for (std::size_t r = 0; r < length; ++r) {
    const double pos = static_cast<double>(r + offset);
    for (std::size_t j = 0; j < d_model; ++j) {
      const double i2 = static_cast<double>(j - j % 2);
      const double angle = pos / std::pow(10000.0, i2 / static_cast<double>(d_model));
      table[r * d_model + j] = static_cast<T>(j % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
  return BasicTensor<T>(Shape{length, d_model}, std::move(table));
}

template <typename T>
MHAParams<T> make_mha(std::size_t d_model, std::size_t heads, std::size_t d_head) {
  MHAParams<T> p;
  for (std::size_t h = 0; h < heads; ++h) {
    p.wq.push_back(zeros_param<T>({d_model, d_head}));
    p.wk.push_back(zeros_param<T>({d_model, d_head}));
    p.wv.push_back(zeros_param<T>({d_model, d_head}));
  }
  p.wo = zeros_param<T>({heads * d_head, d_model});
  return p;
}

template <typename T>
LayerNormParams<T> make_layer_norm(std::size_t d) {
  return {zeros_param<T>({d}), zeros_param<T>({d})};
}

template <typename T>
FFNParams<T> make_ffn(std::size_t d_model, std::size_t d_ff) {
  return {zeros_param<T>({d_model, d_ff}), zeros_param<T>({d_ff}), zeros_param<T>({d_ff, d_model}),
          zeros_param<T>({d_model})};
}

template <typename T>
FeatureAttentionParams<T> make_feature_attention(std::size_t d) {
  return {zeros_param<T>({d, d}), zeros_param<T>({d})};
}

template <typename T>
LinearParams<T> make_linear(std::size_t in, std::size_t out) {
  return {zeros_param<T>({in, out}), zeros_param<T>({out})};
}

std::vector<double> decoder_input(const MultimodalSample& sample, std::size_t context, bool teacher_forcing) {
  if (context == 0 || context > sample.y_hist.size()) {
    throw DataError(fmt::format("decoder context {} needs at least that many observed targets, sample has {}",
                                context, sample.y_hist.size()));
  }
  std::vector<double> seq(sample.y_hist.end() - static_cast<std::ptrdiff_t>(context), sample.y_hist.end());
  if (teacher_forcing && sample.y_future.size() > 1) {
    seq.insert(seq.end(), sample.y_future.begin(), sample.y_future.end() - 1);
  }
  return seq;
}

template <typename T>
BasicTensor<T> to_tensor(const Matrix& m) {
  std::vector<T> values(m.values.size());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = static_cast<T>(m.values[i]);
  return BasicTensor<T>(Shape{m.rows, m.cols}, std::move(values));
}

template <typename T>
BasicTensor<T> column_tensor(const std::vector<double>& values) {
  std::vector<T> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = static_cast<T>(values[i]);
  return BasicTensor<T>(Shape{values.size(), 1}, std::move(out));
}

#define MAT_INSTANTIATE_COMMON(T)                                                                 \
  template struct LinearParams<T>;                                                               \
  template BasicTensor<T> linear(const BasicTensor<T>&, const LinearParams<T>&);                 \
  template BasicTensor<T> positional_encoding<T>(std::size_t, std::size_t, std::size_t);         \
  template MHAParams<T> make_mha<T>(std::size_t, std::size_t, std::size_t);                      \
  template LayerNormParams<T> make_layer_norm<T>(std::size_t);                                   \
  template FFNParams<T> make_ffn<T>(std::size_t, std::size_t);                                   \
  template FeatureAttentionParams<T> make_feature_attention<T>(std::size_t);                     \
  template LinearParams<T> make_linear<T>(std::size_t, std::size_t);                             \
  template BasicTensor<T> to_tensor<T>(const Matrix&);                                           \
  template BasicTensor<T> column_tensor<T>(const std::vector<double>&);

MAT_INSTANTIATE_COMMON(float)
MAT_INSTANTIATE_COMMON(double)

#undef MAT_INSTANTIATE_COMMON

}  // namespace mat
