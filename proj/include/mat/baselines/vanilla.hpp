#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mat/attention/attention.hpp"
#include "mat/model/common.hpp"
#include "mat/model/mat.hpp"
#include "mat/training/training.hpp"

namespace mat {

// Same structural fields as the two-stream model; both windows are cut to
// the last min(lookback_txt, lookback_ts) rows and concatenated per timestep.
using VanillaConfig = MATConfig;

inline std::size_t vanilla_length(const VanillaConfig& cfg) { return std::min(cfg.lookback_txt, cfg.lookback_ts); }

template <typename T>
struct VanillaEncoderLayer {
  IntraModalParams<T> self;
  FFNParams<T> ffn;
  LayerNormParams<T> ffn_norm;
};

template <typename T>
struct VanillaDecoderLayer {
  IntraModalParams<T> masked;
  MHAParams<T> cross;
  LayerNormParams<T> cross_norm;
  FFNParams<T> ffn;
  LayerNormParams<T> ffn_norm;
};

template <typename T>
struct VanillaParams {
  LinearParams<T> embed;  // (d_txt + d_ts) -> d_model
  LinearParams<T> embed_target;
  std::vector<VanillaEncoderLayer<T>> encoder;
  std::vector<VanillaDecoderLayer<T>> decoder;
  LinearParams<T> head;

  void visit(const ParamVisitor<T>& f);
  std::vector<BasicTensor<T>> tensors();
};

template <typename T>
VanillaParams<T> make_vanilla_params(const VanillaConfig& cfg);
template <typename T>
VanillaParams<T> init_vanilla_params(const VanillaConfig& cfg, std::uint64_t seed);
std::vector<TensorSpec> vanilla_census(const VanillaConfig& cfg);

// Truncated, concatenated input window: L x (d_txt + d_ts).
template <typename T>
BasicTensor<T> vanilla_input(const MultimodalSample& sample, const VanillaConfig& cfg);

template <typename T>
BasicTensor<T> vanilla_encode(const BasicTensor<T>& x, const VanillaParams<T>& p, const VanillaConfig& cfg,
                              const ForwardContext& ctx = {});
template <typename T>
BasicTensor<T> vanilla_decode(const BasicTensor<T>& y_hist, const BasicTensor<T>& enc, const VanillaParams<T>& p,
                              const VanillaConfig& cfg, const ForwardContext& ctx = {});

// horizon x 1, teacher-forced or autoregressive as for the two-stream model.
template <typename T>
BasicTensor<T> vanilla_forward(const MultimodalSample& sample, const VanillaParams<T>& p, const VanillaConfig& cfg,
                               bool teacher_forcing, const ForwardContext& ctx = {});

class VanillaForecaster final : public Forecaster {
 public:
  VanillaForecaster(VanillaParams<float> params, VanillaConfig cfg) : params_(std::move(params)), cfg_(std::move(cfg)) {}
  std::vector<Tensor> parameters() override { return params_.tensors(); }
  Tensor forward(const MultimodalSample& sample, bool teacher_forcing, const ForwardContext& ctx) override {
    return vanilla_forward(sample, params_, cfg_, teacher_forcing, ctx);
  }
  std::size_t horizon() const override { return cfg_.horizon; }
  double dropout() const override { return cfg_.dropout; }
  VanillaParams<float>& params() { return params_; }
  const VanillaConfig& config() const { return cfg_; }

 private:
  VanillaParams<float> params_;
  VanillaConfig cfg_;
};

void save_vanilla_checkpoint(VanillaParams<float>& params, const VanillaConfig& cfg,
                             const std::filesystem::path& path, std::uint64_t seed = 0);
struct LoadedVanilla {
  VanillaParams<float> params;
  VanillaConfig config;
  std::uint64_t seed = 0;
};
LoadedVanilla load_vanilla_checkpoint(const std::filesystem::path& path);

}  // namespace mat
