#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mat/attention/attention.hpp"
#include "mat/data/types.hpp"
#include "mat/model/common.hpp"

namespace mat {

struct MATConfig {
  std::size_t d_model = 32;
  std::size_t heads = 4;
  // Per-head width; 0 means d_model / heads.
  std::size_t d_head = 0;
  std::size_t n_enc_layers = 2;
  std::size_t n_dec_layers = 1;
  std::size_t d_ff = 64;
  std::size_t d_txt = 0;
  std::size_t d_ts = 0;
  std::size_t lookback_txt = 9;
  std::size_t lookback_ts = 9;
  std::size_t horizon = 1;
  double dropout = 0.1;

  void validate() const;
  std::size_t head_dim() const { return d_head != 0 ? d_head : d_model / heads; }
  // Observed targets fed to the decoder before the first prediction.
  std::size_t decoder_context() const { return std::min(lookback_ts, horizon); }
  bool operator==(const MATConfig&) const = default;
};

std::string to_json(const MATConfig& cfg);
MATConfig mat_config_from_json(const std::string& text);

enum class Modality { text, timeseries, target };

template <typename T>
struct EncoderStreamLayer {
  IntraModalParams<T> intra;
  InterModalParams<T> inter;
};

template <typename T>
struct EncoderLayer {
  EncoderStreamLayer<T> txt;
  EncoderStreamLayer<T> ts;
};

template <typename T>
struct DecoderLayer {
  IntraModalParams<T> masked;
  MHAParams<T> target_txt;
  MHAParams<T> target_ts;
  LayerNormParams<T> fusion_norm;
  FFNParams<T> ffn;
  LayerNormParams<T> ffn_norm;
};

// The full trainable parameter set.
template <typename T>
struct MATParams {
  FeatureAttentionParams<T> feat_txt_enc;
  FeatureAttentionParams<T> feat_ts_enc;
  FeatureAttentionParams<T> feat_txt_dec;
  FeatureAttentionParams<T> feat_ts_dec;
  LinearParams<T> embed_txt;
  LinearParams<T> embed_ts;
  LinearParams<T> embed_target;
  std::vector<EncoderLayer<T>> encoder;
  std::vector<DecoderLayer<T>> decoder;
  LinearParams<T> head;

  // Every tensor with its qualified name, in a fixed order.
  void visit(const ParamVisitor<T>& f);
  std::vector<BasicTensor<T>> tensors();
};

// Zero-valued layout dictated by cfg.
template <typename T>
MATParams<T> make_mat_params(const MATConfig& cfg);
template <typename T>
MATParams<T> init_mat_params(const MATConfig& cfg, std::uint64_t seed);
std::vector<TensorSpec> mat_census(const MATConfig& cfg);

// Deep copy with element conversion.
template <typename To, typename From>
MATParams<To> cast_params(const MATConfig& cfg, MATParams<From>& from);

enum class BlockKind { intra, inter, masked, target_txt, target_ts };
enum class Stream { text, timeseries, target };

struct AttentionKey {
  std::size_t layer = 0;
  BlockKind kind = BlockKind::intra;
  Stream stream = Stream::text;
  auto operator<=>(const AttentionKey&) const = default;
  // e.g. "enc0_intra_txt", "dec0_target-ts".
  std::string name() const;
};

// Feature-level weights of both encoder inputs plus every temporal attention
// matrix (heads x L_q x L_kv) from one prediction.
struct AttentionRecord {
  Tensor feature_weights_txt;
  Tensor feature_weights_ts;
  std::map<AttentionKey, Tensor> temporal;
};

template <typename T>
struct EncoderOutput {
  BasicTensor<T> txt;
  BasicTensor<T> ts;
  BasicTensor<T> feature_weights_txt;
  BasicTensor<T> feature_weights_ts;
};

// Linear map to d_model plus the sinusoidal rows starting at position_offset.
template <typename T>
BasicTensor<T> embed_modality(const BasicTensor<T>& x, Modality which, const MATParams<T>& params,
                              const MATConfig& cfg, std::size_t position_offset = 0);

template <typename T>
EncoderOutput<T> encode(const BasicTensor<T>& x_txt, const BasicTensor<T>& x_ts, const MATParams<T>& params,
                        const MATConfig& cfg, const ForwardContext& ctx = {}, AttentionRecord* record = nullptr);

// One value per decoder position.
template <typename T>
BasicTensor<T> decode(const BasicTensor<T>& y_hist, const EncoderOutput<T>& enc, const MATParams<T>& params,
                      const MATConfig& cfg, const ForwardContext& ctx = {}, AttentionRecord* record = nullptr);

// horizon x 1. Teacher forcing decodes the shifted ground truth in one
// pass; otherwise predictions are generated step by step.
template <typename T>
BasicTensor<T> forward(const MultimodalSample& sample, const MATParams<T>& params, const MATConfig& cfg,
                       bool teacher_forcing, const ForwardContext& ctx = {});

template <typename T>
BasicTensor<T> predict_autoregressive(const MultimodalSample& sample, const MATParams<T>& params,
                                      const MATConfig& cfg, const ForwardContext& ctx = {},
                                      AttentionRecord* record = nullptr);

// Autoregressive prediction capturing every attention matrix; temporal
// matrices come from the final decoding step.
struct AttentionExport {
  AttentionRecord record;
  Tensor prediction;
};
AttentionExport export_attention(const MultimodalSample& sample, const MATParams<float>& params,
                                 const MATConfig& cfg);

void check_sample(const MultimodalSample& sample, std::size_t d_txt, std::size_t d_ts, std::size_t lookback_txt,
                  std::size_t lookback_ts, std::size_t horizon);

}  // namespace mat
