#include "mat/attention/attention.hpp"

#include <cmath>

#include <fmt/format.h>

#include "mat/error.hpp"
#include "mat/numerics/ops.hpp"

namespace mat {

AttentionMask::AttentionMask(std::size_t rows, std::size_t cols, std::vector<std::uint8_t> allowed)
    : rows_(rows), cols_(cols), allowed_(std::move(allowed)) {
  if (allowed_.size() != rows_ * cols_) {
    throw DimensionError(fmt::format("mask has {} entries, expected {}x{}", allowed_.size(), rows_, cols_));
  }
}

AttentionMask AttentionMask::causal(std::size_t length) {
  std::vector<std::uint8_t> allowed(length * length, 0);
  for (std::size_t r = 0; r < length; ++r)
    for (std::size_t c = 0; c <= r; ++c) allowed[r * length + c] = 1;
  return AttentionMask(length, length, std::move(allowed));
}

template <typename T>
void FeatureAttentionParams<T>::visit(const std::string& prefix, const ParamVisitor<T>& f) {
  f(prefix + ".kernel", kernel);
  f(prefix + ".bias", bias);
}

template <typename T>
void MHAParams<T>::visit(const std::string& prefix, const ParamVisitor<T>& f) {
  for (std::size_t h = 0; h < wq.size(); ++h) {
    f(fmt::format("{}.wq{}", prefix, h), wq[h]);
    f(fmt::format("{}.wk{}", prefix, h), wk[h]);
    f(fmt::format("{}.wv{}", prefix, h), wv[h]);
  }
  f(prefix + ".wo", wo);
}

template <typename T>
void LayerNormParams<T>::visit(const std::string& prefix, const ParamVisitor<T>& f) {
  f(prefix + ".gain", gain);
  f(prefix + ".bias", bias);
}

template <typename T>
void FFNParams<T>::visit(const std::string& prefix, const ParamVisitor<T>& f) {
  f(prefix + ".w1", w1);
  f(prefix + ".b1", b1);
  f(prefix + ".w2", w2);
  f(prefix + ".b2", b2);
}

template <typename T>
void IntraModalParams<T>::visit(const std::string& prefix, const ParamVisitor<T>& f) {
  mha.visit(prefix + ".mha", f);
  norm.visit(prefix + ".norm", f);
}

template <typename T>
void InterModalParams<T>::visit(const std::string& prefix, const ParamVisitor<T>& f) {
  mha.visit(prefix + ".mha", f);
  attn_norm.visit(prefix + ".attn_norm", f);
  ffn.visit(prefix + ".ffn", f);
  ffn_norm.visit(prefix + ".ffn_norm", f);
}

template <typename T>
FeatureAttentionOutput<T> feature_level_attention(const BasicTensor<T>& x, const FeatureAttentionParams<T>& p) {
  if (x.dim() != 2 || x.cols() != p.features() || p.kernel.rows() != p.features() ||
      p.kernel.cols() != p.features()) {
    throw DimensionError(fmt::format("feature attention: input {} vs kernel {}", shape_str(x.shape()),
                                     shape_str(p.kernel.shape())));
  }
  auto logits = add_bias(matmul(x, p.kernel), p.bias);
  auto weights = softmax(logits, 1);
  auto weighted = mul(weights, x);
  return {weights, weighted};
}

template <typename T>
ScaledDotOutput<T> scaled_dot_product(const BasicTensor<T>& q, const BasicTensor<T>& k, const BasicTensor<T>& v,
                                      const std::optional<AttentionMask>& mask, const ForwardContext& ctx) {
  if (q.dim() != 2 || k.dim() != 2 || v.dim() != 2 || q.cols() != k.cols()) {
    throw DimensionError(fmt::format("scaled dot product: Q {} K {} V {}", shape_str(q.shape()),
                                     shape_str(k.shape()), shape_str(v.shape())));
  }
  if (k.rows() != v.rows()) {
    throw DimensionError(fmt::format("scaled dot product: K has {} rows, V has {}", k.rows(), v.rows()));
  }
  auto scores = scale(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(k.cols())));
  if (mask) {
    if (mask->rows() != q.rows() || mask->cols() != k.rows()) {
      throw DimensionError(fmt::format("mask {}x{} does not match scores {}", mask->rows(), mask->cols(),
                                       shape_str(scores.shape())));
    }
    for (std::size_t r = 0; r < mask->rows(); ++r) {
      bool any = false;
      for (std::size_t c = 0; c < mask->cols() && !any; ++c) any = mask->allowed(r, c);
      if (!any) throw MaskingError(fmt::format("attention mask leaves query row {} fully masked", r));
    }
    scores = mask_logits(scores, mask->values());
  }
  auto attn = softmax(scores, 1);
  auto mixed = attn;
  if (const double rate = ctx.active_dropout(); rate > 0.0) mixed = dropout(attn, rate, *ctx.rng);
  return {matmul(mixed, v), attn};
}

template <typename T>
AttentionOutput<T> multi_head(const BasicTensor<T>& q_in, const BasicTensor<T>& k_in, const BasicTensor<T>& v_in,
                              const MHAParams<T>& p, const std::optional<AttentionMask>& mask,
                              const ForwardContext& ctx) {
  if (p.heads() == 0 || p.wk.size() != p.heads() || p.wv.size() != p.heads()) {
    throw DimensionError("multi-head attention needs matching per-head projections, at least one head");
  }
  const std::size_t d_model = p.wq.front().rows();
  if (q_in.cols() != d_model || k_in.cols() != d_model || v_in.cols() != d_model) {
    throw DimensionError(fmt::format("multi-head attention: inputs Q {} K {} V {} against d_model {}",
                                     shape_str(q_in.shape()), shape_str(k_in.shape()), shape_str(v_in.shape()),
                                     d_model));
  }
  if (k_in.rows() != v_in.rows()) {
    throw DimensionError(fmt::format("multi-head attention: K length {} != V length {}", k_in.rows(), v_in.rows()));
  }
  const std::size_t lq = q_in.rows(), lkv = k_in.rows();
  std::vector<BasicTensor<T>> heads;
  heads.reserve(p.heads());
  std::vector<T> weights;
  weights.reserve(p.heads() * lq * lkv);
  for (std::size_t h = 0; h < p.heads(); ++h) {
    auto sdp = scaled_dot_product(matmul(q_in, p.wq[h]), matmul(k_in, p.wk[h]), matmul(v_in, p.wv[h]), mask, ctx);
    heads.push_back(sdp.out);
    weights.insert(weights.end(), sdp.attn.data().begin(), sdp.attn.data().end());
  }
  auto concat = heads.size() == 1 ? heads.front() : concat_cols(heads);
  return {matmul(concat, p.wo), BasicTensor<T>(Shape{p.heads(), lq, lkv}, std::move(weights))};
}

template <typename T>
BasicTensor<T> feed_forward(const BasicTensor<T>& x, const FFNParams<T>& p, const ForwardContext& ctx) {
  auto hidden = relu(add_bias(matmul(x, p.w1), p.b1));
  if (const double rate = ctx.active_dropout(); rate > 0.0) hidden = dropout(hidden, rate, *ctx.rng);
  return add_bias(matmul(hidden, p.w2), p.b2);
}

template <typename T>
BasicTensor<T> apply_layer_norm(const BasicTensor<T>& x, const LayerNormParams<T>& p) {
  return layer_norm(x, p.gain, p.bias);
}

template <typename T>
BlockOutput<T> intra_modal_block(const BasicTensor<T>& x, const IntraModalParams<T>& p, const ForwardContext& ctx) {
  auto att = multi_head(x, x, x, p.mha, std::nullopt, ctx);
  return {apply_layer_norm(add(x, att.values), p.norm), att.weights};
}

template <typename T>
BlockOutput<T> inter_modal_block(const BasicTensor<T>& z_kv, const BasicTensor<T>& z_query,
                                 const InterModalParams<T>& p, const ForwardContext& ctx) {
  auto att = multi_head(z_query, z_kv, z_kv, p.mha, std::nullopt, ctx);
  auto z = apply_layer_norm(add(z_query, att.values), p.attn_norm);
  auto out = apply_layer_norm(add(z, feed_forward(z, p.ffn, ctx)), p.ffn_norm);
  return {out, att.weights};
}

template <typename T>
BlockOutput<T> masked_self_block(const BasicTensor<T>& y, const IntraModalParams<T>& p, const ForwardContext& ctx) {
  auto att = multi_head(y, y, y, p.mha, AttentionMask::causal(y.rows()), ctx);
  return {apply_layer_norm(add(y, att.values), p.norm), att.weights};
}

template <typename T>
TargetModalOutput<T> target_modal_block(const BasicTensor<T>& q_state, const BasicTensor<T>& enc_out,
                                        const FeatureAttentionParams<T>& feat, const MHAParams<T>& mha,
                                        const ForwardContext& ctx) {
  auto fa = feature_level_attention(enc_out, feat);
  auto att = multi_head(q_state, fa.weighted, fa.weighted, mha, std::nullopt, ctx);
  return {att, fa.weights.detach()};
}

#define MAT_INSTANTIATE_ATTENTION(T)                                                                              \
  template struct FeatureAttentionParams<T>;                                                                     \
  template struct MHAParams<T>;                                                                                  \
  template struct LayerNormParams<T>;                                                                            \
  template struct FFNParams<T>;                                                                                  \
  template struct IntraModalParams<T>;                                                                           \
  template struct InterModalParams<T>;                                                                           \
  template FeatureAttentionOutput<T> feature_level_attention(const BasicTensor<T>&,                              \
                                                             const FeatureAttentionParams<T>&);                  \
  template ScaledDotOutput<T> scaled_dot_product(const BasicTensor<T>&, const BasicTensor<T>&,                   \
                                                 const BasicTensor<T>&, const std::optional<AttentionMask>&,     \
                                                 const ForwardContext&);                                         \
  template AttentionOutput<T> multi_head(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,    \
                                         const MHAParams<T>&, const std::optional<AttentionMask>&,               \
                                         const ForwardContext&);                                                 \
  template BasicTensor<T> feed_forward(const BasicTensor<T>&, const FFNParams<T>&, const ForwardContext&);       \
  template BasicTensor<T> apply_layer_norm(const BasicTensor<T>&, const LayerNormParams<T>&);                    \
  template BlockOutput<T> intra_modal_block(const BasicTensor<T>&, const IntraModalParams<T>&,                   \
                                            const ForwardContext&);                                              \
  template BlockOutput<T> inter_modal_block(const BasicTensor<T>&, const BasicTensor<T>&,                        \
                                            const InterModalParams<T>&, const ForwardContext&);                  \
  template BlockOutput<T> masked_self_block(const BasicTensor<T>&, const IntraModalParams<T>&,                   \
                                            const ForwardContext&);                                              \
  template TargetModalOutput<T> target_modal_block(const BasicTensor<T>&, const BasicTensor<T>&,                 \
                                                   const FeatureAttentionParams<T>&, const MHAParams<T>&,        \
                                                   const ForwardContext&);

MAT_INSTANTIATE_ATTENTION(float)
MAT_INSTANTIATE_ATTENTION(double)

#undef MAT_INSTANTIATE_ATTENTION

}  // namespace mat
