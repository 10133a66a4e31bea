#include "mat/model/mat.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include "mat/error.hpp"
#include "mat/numerics/ops.hpp"

namespace mat {

void MATConfig::validate() const {
  if (d_model == 0) throw ConfigError("d_model must be positive");
  if (heads == 0) throw ConfigError("heads must be at least 1");
  if (d_head == 0 && d_model % heads != 0) {
    throw ConfigError(fmt::format("d_model {} is not divisible by heads {}", d_model, heads));
  }
  if (d_ff == 0) throw ConfigError("d_ff must be positive");
  if (d_txt == 0) throw ConfigError("d_txt must be positive");
  if (d_ts == 0) throw ConfigError("d_ts must be positive");
  if (lookback_txt == 0 || lookback_ts == 0) throw ConfigError("lookbacks must be at least 1");
  if (horizon == 0) throw ConfigError("horizon must be at least 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError(fmt::format("dropout {} outside [0, 1)", dropout));
}

std::string to_json(const MATConfig& c) {
  nlohmann::ordered_json j;
  j["d_model"] = c.d_model;
  j["heads"] = c.heads;
  j["d_head"] = c.d_head;
  j["n_enc_layers"] = c.n_enc_layers;
  j["n_dec_layers"] = c.n_dec_layers;
  j["d_ff"] = c.d_ff;
  j["d_txt"] = c.d_txt;
  j["d_ts"] = c.d_ts;
  j["lookback_txt"] = c.lookback_txt;
  j["lookback_ts"] = c.lookback_ts;
  j["horizon"] = c.horizon;
  j["dropout"] = c.dropout;
  return j.dump();
}

MATConfig mat_config_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    MATConfig c;
    c.d_model = j.at("d_model").get<std::size_t>();
    c.heads = j.at("heads").get<std::size_t>();
    c.d_head = j.at("d_head").get<std::size_t>();
    c.n_enc_layers = j.at("n_enc_layers").get<std::size_t>();
    c.n_dec_layers = j.at("n_dec_layers").get<std::size_t>();
    c.d_ff = j.at("d_ff").get<std::size_t>();
    c.d_txt = j.at("d_txt").get<std::size_t>();
    c.d_ts = j.at("d_ts").get<std::size_t>();
    c.lookback_txt = j.at("lookback_txt").get<std::size_t>();
    c.lookback_ts = j.at("lookback_ts").get<std::size_t>();
    c.horizon = j.at("horizon").get<std::size_t>();
    c.dropout = j.at("dropout").get<double>();
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed model config: ") + e.what());
  }
}

template <typename T>
void MATParams<T>::visit(const ParamVisitor<T>& f) {
  feat_txt_enc.visit("feat.txt_enc", f);
  feat_ts_enc.visit("feat.ts_enc", f);
  feat_txt_dec.visit("feat.txt_dec", f);
  feat_ts_dec.visit("feat.ts_dec", f);
  embed_txt.visit("embed.txt", f);
  embed_ts.visit("embed.ts", f);
  embed_target.visit("embed.target", f);
  for (std::size_t l = 0; l < encoder.size(); ++l) {
    const auto p = fmt::format("enc{}", l);
    encoder[l].txt.intra.visit(p + ".txt.intra", f);
    encoder[l].txt.inter.visit(p + ".txt.inter", f);
    encoder[l].ts.intra.visit(p + ".ts.intra", f);
    encoder[l].ts.inter.visit(p + ".ts.inter", f);
  }
  for (std::size_t l = 0; l < decoder.size(); ++l) {
    const auto p = fmt::format("dec{}", l);
    auto& d = decoder[l];
    d.masked.visit(p + ".masked", f);
    d.target_txt.visit(p + ".target_txt", f);
    d.target_ts.visit(p + ".target_ts", f);
    d.fusion_norm.visit(p + ".fusion_norm", f);
    d.ffn.visit(p + ".ffn", f);
    d.ffn_norm.visit(p + ".ffn_norm", f);
  }
  head.visit("head", f);
}

template <typename T>
std::vector<BasicTensor<T>> MATParams<T>::tensors() {
  std::vector<BasicTensor<T>> out;
  visit([&out](const std::string&, BasicTensor<T>& t) { out.push_back(t); });
  return out;
}

template <typename T>
MATParams<T> make_mat_params(const MATConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.d_model, h = cfg.heads, dh = cfg.head_dim();
  MATParams<T> p;
  p.feat_txt_enc = make_feature_attention<T>(cfg.d_txt);
  p.feat_ts_enc = make_feature_attention<T>(cfg.d_ts);
  p.feat_txt_dec = make_feature_attention<T>(d);
  p.feat_ts_dec = make_feature_attention<T>(d);
  p.embed_txt = make_linear<T>(cfg.d_txt, d);
  p.embed_ts = make_linear<T>(cfg.d_ts, d);
  p.embed_target = make_linear<T>(1, d);
  for (std::size_t l = 0; l < cfg.n_enc_layers; ++l) {
    EncoderLayer<T> layer;
    for (auto* s : {&layer.txt, &layer.ts}) {
      s->intra = {make_mha<T>(d, h, dh), make_layer_norm<T>(d)};
      s->inter = {make_mha<T>(d, h, dh), make_layer_norm<T>(d), make_ffn<T>(d, cfg.d_ff), make_layer_norm<T>(d)};
    }
    p.encoder.push_back(std::move(layer));
  }
  for (std::size_t l = 0; l < cfg.n_dec_layers; ++l) {
    DecoderLayer<T> layer;
    layer.masked = {make_mha<T>(d, h, dh), make_layer_norm<T>(d)};
    layer.target_txt = make_mha<T>(d, h, dh);
    layer.target_ts = make_mha<T>(d, h, dh);
    layer.fusion_norm = make_layer_norm<T>(d);
    layer.ffn = make_ffn<T>(d, cfg.d_ff);
    layer.ffn_norm = make_layer_norm<T>(d);
    p.decoder.push_back(std::move(layer));
  }
  p.head = make_linear<T>(d, 1);
  return p;
}

template <typename T>
MATParams<T> init_mat_params(const MATConfig& cfg, std::uint64_t seed) {
  auto p = make_mat_params<T>(cfg);
  initialise_params<T>(p, seed);
  return p;
}

std::vector<TensorSpec> mat_census(const MATConfig& cfg) {
  auto p = make_mat_params<float>(cfg);
  std::vector<TensorSpec> out;
  p.visit([&out](const std::string& name, Tensor& t) { out.push_back({name, t.shape()}); });
  return out;
}

template <typename To, typename From>
MATParams<To> cast_params(const MATConfig& cfg, MATParams<From>& from) {
  auto to = make_mat_params<To>(cfg);
  auto src = from.tensors();
  auto dst = to.tensors();
  if (src.size() != dst.size()) throw DimensionError("cast_params: parameter sets differ in size");
  for (std::size_t k = 0; k < src.size(); ++k) {
    if (src[k].shape() != dst[k].shape()) throw DimensionError("cast_params: parameter shapes differ");
    auto out = dst[k].mutable_data();
    auto in = src[k].data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<To>(in[i]);
  }
  return to;
}

std::string AttentionKey::name() const {
  const char* kind_name = "";
  switch (kind) {
    case BlockKind::intra: kind_name = "intra"; break;
    case BlockKind::inter: kind_name = "inter"; break;
    case BlockKind::masked: kind_name = "masked"; break;
    case BlockKind::target_txt: kind_name = "target-txt"; break;
    case BlockKind::target_ts: kind_name = "target-ts"; break;
  }
  const bool enc = kind == BlockKind::intra || kind == BlockKind::inter;
  if (!enc) return fmt::format("dec{}_{}", layer, kind_name);
  return fmt::format("enc{}_{}_{}", layer, kind_name, stream == Stream::text ? "txt" : "ts");
}

namespace {

template <typename T>
void capture(AttentionRecord* record, AttentionKey key, const BasicTensor<T>& weights) {
  if (record) record->temporal[key] = cast<float>(weights);
}

}  // namespace

template <typename T>
BasicTensor<T> embed_modality(const BasicTensor<T>& x, Modality which, const MATParams<T>& params,
                              const MATConfig& cfg, std::size_t position_offset) {
  const LinearParams<T>* lin = nullptr;
  std::size_t expected = 0;
  switch (which) {
    case Modality::text: lin = &params.embed_txt; expected = cfg.d_txt; break;
    case Modality::timeseries: lin = &params.embed_ts; expected = cfg.d_ts; break;
    case Modality::target: lin = &params.embed_target; expected = 1; break;
  }
  if (x.dim() != 2 || x.cols() != expected) {
    throw ConfigError(fmt::format("embedding expects {} features for this modality, got {}", expected,
                                  shape_str(x.shape())));
  }
  return add(linear(x, *lin), positional_encoding<T>(x.rows(), cfg.d_model, position_offset));
}

template <typename T>
EncoderOutput<T> encode(const BasicTensor<T>& x_txt, const BasicTensor<T>& x_ts, const MATParams<T>& params,
                        const MATConfig& cfg, const ForwardContext& ctx, AttentionRecord* record) {
  auto fa_txt = feature_level_attention(x_txt, params.feat_txt_enc);
  auto fa_ts = feature_level_attention(x_ts, params.feat_ts_enc);
  auto h_txt = embed_modality(fa_txt.weighted, Modality::text, params, cfg);
  auto h_ts = embed_modality(fa_ts.weighted, Modality::timeseries, params, cfg);
  for (std::size_t l = 0; l < params.encoder.size(); ++l) {
    const auto& layer = params.encoder[l];
    auto intra_txt = intra_modal_block(h_txt, layer.txt.intra, ctx);
    auto intra_ts = intra_modal_block(h_ts, layer.ts.intra, ctx);
    // Each stream's keys/values meet the other stream's same-depth queries.
    auto inter_txt = inter_modal_block(intra_txt.out, intra_ts.out, layer.txt.inter, ctx);
    auto inter_ts = inter_modal_block(intra_ts.out, intra_txt.out, layer.ts.inter, ctx);
    capture(record, {l, BlockKind::intra, Stream::text}, intra_txt.weights);
    capture(record, {l, BlockKind::intra, Stream::timeseries}, intra_ts.weights);
    capture(record, {l, BlockKind::inter, Stream::text}, inter_txt.weights);
    capture(record, {l, BlockKind::inter, Stream::timeseries}, inter_ts.weights);
    h_txt = inter_txt.out;
    h_ts = inter_ts.out;
  }
  if (record) {
    record->feature_weights_txt = cast<float>(fa_txt.weights.detach());
    record->feature_weights_ts = cast<float>(fa_ts.weights.detach());
  }
  return {h_txt, h_ts, fa_txt.weights, fa_ts.weights};
}

template <typename T>
BasicTensor<T> decode(const BasicTensor<T>& y_hist, const EncoderOutput<T>& enc, const MATParams<T>& params,
                      const MATConfig& cfg, const ForwardContext& ctx, AttentionRecord* record) {
  if (y_hist.dim() != 2 || y_hist.cols() != 1) {
    throw DimensionError("decode expects a column of target values, got " + shape_str(y_hist.shape()));
  }
  auto x = embed_modality(y_hist, Modality::target, params, cfg);
  for (std::size_t l = 0; l < params.decoder.size(); ++l) {
    const auto& layer = params.decoder[l];
    auto masked = masked_self_block(x, layer.masked, ctx);
    auto tgt_txt = target_modal_block(masked.out, enc.txt, params.feat_txt_dec, layer.target_txt, ctx);
    auto tgt_ts = target_modal_block(masked.out, enc.ts, params.feat_ts_dec, layer.target_ts, ctx);
    capture(record, {l, BlockKind::masked, Stream::target}, masked.weights);
    capture(record, {l, BlockKind::target_txt, Stream::target}, tgt_txt.attention.weights);
    capture(record, {l, BlockKind::target_ts, Stream::target}, tgt_ts.attention.weights);
    auto fused = add(tgt_txt.attention.values, tgt_ts.attention.values);
    auto u = apply_layer_norm(add(masked.out, fused), layer.fusion_norm);
    x = apply_layer_norm(add(u, feed_forward(u, layer.ffn, ctx)), layer.ffn_norm);
  }
  return linear(x, params.head);
}

void check_sample(const MultimodalSample& sample, std::size_t d_txt, std::size_t d_ts, std::size_t lookback_txt,
                  std::size_t lookback_ts, std::size_t horizon) {
  if (sample.txt.features() != d_txt || sample.txt.length() != lookback_txt) {
    throw DataError(fmt::format("text window is {}x{}, model expects {}x{}", sample.txt.length(),
                                sample.txt.features(), lookback_txt, d_txt));
  }
  if (sample.ts.features() != d_ts || sample.ts.length() != lookback_ts) {
    throw DataError(fmt::format("time-series window is {}x{}, model expects {}x{}", sample.ts.length(),
                                sample.ts.features(), lookback_ts, d_ts));
  }
  if (sample.y_hist.size() != lookback_ts) {
    throw DataError(fmt::format("target history has {} values, model expects {}", sample.y_hist.size(), lookback_ts));
  }
  if (sample.y_future.size() != horizon) {
    throw DataError(fmt::format("target future has {} values, model horizon is {}", sample.y_future.size(), horizon));
  }
}

template <typename T>
BasicTensor<T> forward(const MultimodalSample& sample, const MATParams<T>& params, const MATConfig& cfg,
                       bool teacher_forcing, const ForwardContext& ctx) {
  if (!teacher_forcing) return predict_autoregressive(sample, params, cfg, ctx);
  check_sample(sample, cfg.d_txt, cfg.d_ts, cfg.lookback_txt, cfg.lookback_ts, cfg.horizon);
  auto enc = encode(to_tensor<T>(sample.txt.values), to_tensor<T>(sample.ts.values), params, cfg, ctx);
  const std::size_t context = cfg.decoder_context();
  auto out = decode(column_tensor<T>(decoder_input(sample, context, true)), enc, params, cfg, ctx);
  return slice_rows(out, context - 1, context - 1 + cfg.horizon);
}

template <typename T>
BasicTensor<T> predict_autoregressive(const MultimodalSample& sample, const MATParams<T>& params,
                                      const MATConfig& cfg, const ForwardContext& ctx, AttentionRecord* record) {
  check_sample(sample, cfg.d_txt, cfg.d_ts, cfg.lookback_txt, cfg.lookback_ts, cfg.horizon);
  auto enc = encode(to_tensor<T>(sample.txt.values), to_tensor<T>(sample.ts.values), params, cfg, ctx, record);
  // Predictions are fed back as tape nodes, so the unrolled pass is differentiable.
  auto seq = column_tensor<T>(decoder_input(sample, cfg.decoder_context(), false));
  std::vector<BasicTensor<T>> preds;
  for (std::size_t step = 0; step < cfg.horizon; ++step) {
    const bool last = step + 1 == cfg.horizon;
    auto out = decode(seq, enc, params, cfg, ctx, last ? record : nullptr);
    auto next = slice_rows(out, out.rows() - 1, out.rows());
    preds.push_back(next);
    if (!last) seq = concat_rows<T>({seq, next});
  }
  return concat_rows<T>(preds);
}

AttentionExport export_attention(const MultimodalSample& sample, const MATParams<float>& params,
                                 const MATConfig& cfg) {
  NoGradGuard no_grad;
  AttentionExport out;
  out.prediction = predict_autoregressive(sample, params, cfg, {}, &out.record);
  return out;
}

#define MAT_INSTANTIATE_MODEL(T)                                                                                \
  template struct MATParams<T>;                                                                                \
  template MATParams<T> make_mat_params<T>(const MATConfig&);                                                  \
  template MATParams<T> init_mat_params<T>(const MATConfig&, std::uint64_t);                                   \
  template BasicTensor<T> embed_modality(const BasicTensor<T>&, Modality, const MATParams<T>&,                 \
                                         const MATConfig&, std::size_t);                                       \
  template EncoderOutput<T> encode(const BasicTensor<T>&, const BasicTensor<T>&, const MATParams<T>&,          \
                                   const MATConfig&, const ForwardContext&, AttentionRecord*);                 \
  template BasicTensor<T> decode(const BasicTensor<T>&, const EncoderOutput<T>&, const MATParams<T>&,          \
                                 const MATConfig&, const ForwardContext&, AttentionRecord*);                   \
  template BasicTensor<T> forward(const MultimodalSample&, const MATParams<T>&, const MATConfig&, bool,        \
                                  const ForwardContext&);                                                      \
  template BasicTensor<T> predict_autoregressive(const MultimodalSample&, const MATParams<T>&,                 \
                                                 const MATConfig&, const ForwardContext&, AttentionRecord*);

MAT_INSTANTIATE_MODEL(float)
MAT_INSTANTIATE_MODEL(double)

template MATParams<double> cast_params<double, float>(const MATConfig&, MATParams<float>&);
template MATParams<float> cast_params<float, double>(const MATConfig&, MATParams<double>&);
template MATParams<float> cast_params<float, float>(const MATConfig&, MATParams<float>&);

#undef MAT_INSTANTIATE_MODEL

}  // namespace mat
