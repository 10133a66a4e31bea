#include "mat/baselines/vanilla.hpp"

#include <fmt/format.h>

#include "mat/error.hpp"
#include "mat/model/checkpoint.hpp"
#include "mat/numerics/ops.hpp"

namespace mat {

template <typename T>
void VanillaParams<T>::visit(const ParamVisitor<T>& f) {
  embed.visit("embed.input", f);
  embed_target.visit("embed.target", f);
  for (std::size_t l = 0; l < encoder.size(); ++l) {
    const auto p = fmt::format("enc{}", l);
    encoder[l].self.visit(p + ".self", f);
    encoder[l].ffn.visit(p + ".ffn", f);
    encoder[l].ffn_norm.visit(p + ".ffn_norm", f);
  }
  for (std::size_t l = 0; l < decoder.size(); ++l) {
    const auto p = fmt::format("dec{}", l);
    auto& d = decoder[l];
    d.masked.visit(p + ".masked", f);
    d.cross.visit(p + ".cross", f);
    d.cross_norm.visit(p + ".cross_norm", f);
    d.ffn.visit(p + ".ffn", f);
    d.ffn_norm.visit(p + ".ffn_norm", f);
  }
  head.visit("head", f);
}

template <typename T>
std::vector<BasicTensor<T>> VanillaParams<T>::tensors() {
  std::vector<BasicTensor<T>> out;
  visit([&out](const std::string&, BasicTensor<T>& t) { out.push_back(t); });
  return out;
}

template <typename T>
VanillaParams<T> make_vanilla_params(const VanillaConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.d_model, h = cfg.heads, dh = cfg.head_dim();
  VanillaParams<T> p;
  p.embed = make_linear<T>(cfg.d_txt + cfg.d_ts, d);
  p.embed_target = make_linear<T>(1, d);
  for (std::size_t l = 0; l < cfg.n_enc_layers; ++l) {
    p.encoder.push_back({{make_mha<T>(d, h, dh), make_layer_norm<T>(d)}, make_ffn<T>(d, cfg.d_ff),
                         make_layer_norm<T>(d)});
  }
  for (std::size_t l = 0; l < cfg.n_dec_layers; ++l) {
    p.decoder.push_back({{make_mha<T>(d, h, dh), make_layer_norm<T>(d)}, make_mha<T>(d, h, dh),
                         make_layer_norm<T>(d), make_ffn<T>(d, cfg.d_ff), make_layer_norm<T>(d)});
  }
  p.head = make_linear<T>(d, 1);
  return p;
}

template <typename T>
VanillaParams<T> init_vanilla_params(const VanillaConfig& cfg, std::uint64_t seed) {
  auto p = make_vanilla_params<T>(cfg);
  initialise_params<T>(p, seed);
  return p;
}

std::vector<TensorSpec> vanilla_census(const VanillaConfig& cfg) {
  auto p = make_vanilla_params<float>(cfg);
  std::vector<TensorSpec> out;
  p.visit([&out](const std::string& name, Tensor& t) { out.push_back({name, t.shape()}); });
  return out;
}

template <typename T>
BasicTensor<T> vanilla_input(const MultimodalSample& sample, const VanillaConfig& cfg) {
  check_sample(sample, cfg.d_txt, cfg.d_ts, cfg.lookback_txt, cfg.lookback_ts, cfg.horizon);
  const std::size_t len = vanilla_length(cfg);
  auto txt = to_tensor<T>(sample.txt.values);
  auto ts = to_tensor<T>(sample.ts.values);
  return concat_cols<T>({slice_rows(txt, cfg.lookback_txt - len, cfg.lookback_txt),
                         slice_rows(ts, cfg.lookback_ts - len, cfg.lookback_ts)});
}

template <typename T>
BasicTensor<T> vanilla_encode(const BasicTensor<T>& x, const VanillaParams<T>& p, const VanillaConfig& cfg,
                              const ForwardContext& ctx) {
  if (x.dim() != 2 || x.cols() != cfg.d_txt + cfg.d_ts) {
    throw DimensionError("vanilla encoder expects concatenated features, got " + shape_str(x.shape()));
  }
  auto h = add(linear(x, p.embed), positional_encoding<T>(x.rows(), cfg.d_model));
  for (const auto& layer : p.encoder) {
    auto z = intra_modal_block(h, layer.self, ctx).out;
    h = apply_layer_norm(add(z, feed_forward(z, layer.ffn, ctx)), layer.ffn_norm);
  }
  return h;
}

template <typename T>
BasicTensor<T> vanilla_decode(const BasicTensor<T>& y_hist, const BasicTensor<T>& enc, const VanillaParams<T>& p,
                              const VanillaConfig& cfg, const ForwardContext& ctx) {
  if (y_hist.dim() != 2 || y_hist.cols() != 1) {
    throw DimensionError("decode expects a column of target values, got " + shape_str(y_hist.shape()));
  }
  auto x = add(linear(y_hist, p.embed_target), positional_encoding<T>(y_hist.rows(), cfg.d_model));
  for (const auto& layer : p.decoder) {
    auto m = masked_self_block(x, layer.masked, ctx).out;
    auto cross = multi_head(m, enc, enc, layer.cross, std::nullopt, ctx);
    auto u = apply_layer_norm(add(m, cross.values), layer.cross_norm);
    x = apply_layer_norm(add(u, feed_forward(u, layer.ffn, ctx)), layer.ffn_norm);
  }
  return linear(x, p.head);
}

template <typename T>
BasicTensor<T> vanilla_forward(const MultimodalSample& sample, const VanillaParams<T>& p, const VanillaConfig& cfg,
                               bool teacher_forcing, const ForwardContext& ctx) {
  auto enc = vanilla_encode(vanilla_input<T>(sample, cfg), p, cfg, ctx);
  const std::size_t context = cfg.decoder_context();
  if (teacher_forcing) {
    auto out = vanilla_decode(column_tensor<T>(decoder_input(sample, context, true)), enc, p, cfg, ctx);
    return slice_rows(out, context - 1, context - 1 + cfg.horizon);
  }
  auto seq = column_tensor<T>(decoder_input(sample, context, false));
  std::vector<BasicTensor<T>> preds;
  for (std::size_t step = 0; step < cfg.horizon; ++step) {
    auto out = vanilla_decode(seq, enc, p, cfg, ctx);
    auto next = slice_rows(out, out.rows() - 1, out.rows());
    preds.push_back(next);
    if (step + 1 < cfg.horizon) seq = concat_rows<T>({seq, next});
  }
  return concat_rows<T>(preds);
}

void save_vanilla_checkpoint(VanillaParams<float>& params, const VanillaConfig& cfg,
                             const std::filesystem::path& path, std::uint64_t seed) {
  Checkpoint ckpt{"vanilla", seed, to_json(cfg), checkpoint_tensors(params)};
  verify_census(ckpt, vanilla_census(cfg));
  write_checkpoint(path, ckpt);
}

LoadedVanilla load_vanilla_checkpoint(const std::filesystem::path& path) {
  const auto ckpt = read_checkpoint(path);
  if (ckpt.kind != "vanilla") {
    throw CheckpointHeaderError(fmt::format("checkpoint holds a '{}' model, not vanilla", ckpt.kind));
  }
  VanillaConfig cfg;
  try {
    cfg = mat_config_from_json(ckpt.config_json);
  } catch (const ConfigError& e) {
    throw CheckpointHeaderError(std::string("checkpoint config: ") + e.what());
  }
  verify_census(ckpt, vanilla_census(cfg));
  LoadedVanilla out{make_vanilla_params<float>(cfg), cfg, ckpt.seed};
  restore_tensors(ckpt, out.params);
  for (auto& t : out.params.tensors()) t.set_requires_grad(true);
  return out;
}

#define MAT_INSTANTIATE_VANILLA(T)                                                                              \
  template struct VanillaParams<T>;                                                                            \
  template VanillaParams<T> make_vanilla_params<T>(const VanillaConfig&);                                      \
  template VanillaParams<T> init_vanilla_params<T>(const VanillaConfig&, std::uint64_t);                       \
  template BasicTensor<T> vanilla_input<T>(const MultimodalSample&, const VanillaConfig&);                     \
  template BasicTensor<T> vanilla_encode(const BasicTensor<T>&, const VanillaParams<T>&, const VanillaConfig&, \
                                         const ForwardContext&);                                               \
  template BasicTensor<T> vanilla_decode(const BasicTensor<T>&, const BasicTensor<T>&, const VanillaParams<T>&, \
                                         const VanillaConfig&, const ForwardContext&);                         \
  template BasicTensor<T> vanilla_forward(const MultimodalSample&, const VanillaParams<T>&,                    \
                                          const VanillaConfig&, bool, const ForwardContext&);

MAT_INSTANTIATE_VANILLA(float)
MAT_INSTANTIATE_VANILLA(double)

#undef MAT_INSTANTIATE_VANILLA

}  // namespace mat
