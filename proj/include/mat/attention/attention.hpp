#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mat/numerics/tensor.hpp"

namespace mat {

// Callback used to enumerate parameters as (qualified name, tensor).
template <typename T>
using ParamVisitor = std::function<void(const std::string&, BasicTensor<T>&)>;

// Per-pass settings shared by every block. Dropout applies only when training.
struct ForwardContext {
  bool training = false;
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;

  double active_dropout() const { return training && rng != nullptr ? dropout : 0.0; }
};

// Row-major L_q x L_kv matrix of permitted positions.
class AttentionMask {
 public:
  AttentionMask(std::size_t rows, std::size_t cols, std::vector<std::uint8_t> allowed);
  static AttentionMask causal(std::size_t length);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool allowed(std::size_t r, std::size_t c) const { return allowed_[r * cols_ + c] != 0; }
  const std::vector<std::uint8_t>& values() const { return allowed_; }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<std::uint8_t> allowed_;
};

// Pointwise (width-1) feature map d -> d whose softmax over features gives
// per-timestep feature importances.
template <typename T>
struct FeatureAttentionParams {
  BasicTensor<T> kernel;  // d x d
  BasicTensor<T> bias;    // d

  std::size_t features() const { return bias.size(); }
  void visit(const std::string& prefix, const ParamVisitor<T>& f);
};

template <typename T>
struct MHAParams {
  std::vector<BasicTensor<T>> wq;  // per head: d_model x d_head
  std::vector<BasicTensor<T>> wk;
  std::vector<BasicTensor<T>> wv;
  BasicTensor<T> wo;  // (heads * d_head) x d_model

  std::size_t heads() const { return wq.size(); }
  void visit(const std::string& prefix, const ParamVisitor<T>& f);
};

template <typename T>
struct LayerNormParams {
  BasicTensor<T> gain;
  BasicTensor<T> bias;
  void visit(const std::string& prefix, const ParamVisitor<T>& f);
};

// Two linear layers with a ReLU between them.
template <typename T>
struct FFNParams {
  BasicTensor<T> w1;  // d_model x d_ff
  BasicTensor<T> b1;
  BasicTensor<T> w2;  // d_ff x d_model
  BasicTensor<T> b2;
  void visit(const std::string& prefix, const ParamVisitor<T>& f);
};

template <typename T>
struct FeatureAttentionOutput {
  BasicTensor<T> weights;   // T x d, rows sum to 1
  BasicTensor<T> weighted;  // weights (.) X
};

template <typename T>
struct ScaledDotOutput {
  BasicTensor<T> out;   // L_q x d_v
  BasicTensor<T> attn;  // L_q x L_kv
};

template <typename T>
struct AttentionOutput {
  BasicTensor<T> values;   // L_q x d_model
  BasicTensor<T> weights;  // heads x L_q x L_kv, detached from the tape
};

template <typename T>
FeatureAttentionOutput<T> feature_level_attention(const BasicTensor<T>& x, const FeatureAttentionParams<T>& p);

template <typename T>
ScaledDotOutput<T> scaled_dot_product(const BasicTensor<T>& q, const BasicTensor<T>& k, const BasicTensor<T>& v,
                                      const std::optional<AttentionMask>& mask = std::nullopt,
                                      const ForwardContext& ctx = {});

template <typename T>
AttentionOutput<T> multi_head(const BasicTensor<T>& q_in, const BasicTensor<T>& k_in, const BasicTensor<T>& v_in,
                              const MHAParams<T>& p, const std::optional<AttentionMask>& mask = std::nullopt,
                              const ForwardContext& ctx = {});

template <typename T>
BasicTensor<T> feed_forward(const BasicTensor<T>& x, const FFNParams<T>& p, const ForwardContext& ctx = {});

template <typename T>
BasicTensor<T> apply_layer_norm(const BasicTensor<T>& x, const LayerNormParams<T>& p);

template <typename T>
struct IntraModalParams {
  MHAParams<T> mha;
  LayerNormParams<T> norm;
  void visit(const std::string& prefix, const ParamVisitor<T>& f);
};

template <typename T>
struct InterModalParams {
  MHAParams<T> mha;
  LayerNormParams<T> attn_norm;
  FFNParams<T> ffn;
  LayerNormParams<T> ffn_norm;
  void visit(const std::string& prefix, const ParamVisitor<T>& f);
};

template <typename T>
struct BlockOutput {
  BasicTensor<T> out;
  BasicTensor<T> weights;  // heads x L_q x L_kv
};

// LayerNorm(x + MHA(x, x, x)).
template <typename T>
BlockOutput<T> intra_modal_block(const BasicTensor<T>& x, const IntraModalParams<T>& p, const ForwardContext& ctx = {});

// Queries from z_query (the other modality), keys/values from z_kv (this
// modality). Residual is taken from the query stream so the output has the
// query length: z = LN(z_query + MHA); out = LN(z + FFN(z)).
template <typename T>
BlockOutput<T> inter_modal_block(const BasicTensor<T>& z_kv, const BasicTensor<T>& z_query,
                                 const InterModalParams<T>& p, const ForwardContext& ctx = {});

// LayerNorm(y + causal MHA(y, y, y)).
template <typename T>
BlockOutput<T> masked_self_block(const BasicTensor<T>& y, const IntraModalParams<T>& p, const ForwardContext& ctx = {});

template <typename T>
struct TargetModalOutput {
  AttentionOutput<T> attention;
  BasicTensor<T> feature_weights;  // T x d_model over the encoder output
};

// Feature-level attention over enc_out, then MHA with decoder queries.
template <typename T>
TargetModalOutput<T> target_modal_block(const BasicTensor<T>& q_state, const BasicTensor<T>& enc_out,
                                        const FeatureAttentionParams<T>& feat, const MHAParams<T>& mha,
                                        const ForwardContext& ctx = {});

}  // namespace mat
