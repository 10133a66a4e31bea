#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "mat/attention/attention.hpp"
#include "mat/data/dataset.hpp"
#include "mat/model/mat.hpp"
#include "mat/numerics/tensor.hpp"

namespace mat {

struct TrainConfig {
  std::size_t batch_size = 16;
  double lr = 1e-4;
  std::size_t max_epochs = 10;
  std::size_t patience = 3;
  std::uint64_t seed = 0;
  bool teacher_forcing = true;

  void validate() const;
};

struct Metrics {
  double mse = 0.0;
  double mae = 0.0;
  std::size_t n = 0;
};

struct EvaluationReport {
  Metrics overall;
  std::vector<Metrics> per_step;  // one entry per horizon step
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_mse = 0.0;   // normalised units, autoregressive
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 1-based; earliest minimum of val_mse

  void write_csv(const std::filesystem::path& path) const;
};

// Anything the training loop can fit: a flat parameter list plus a taped
// forward pass producing horizon x 1 predictions in normalised units.
class Forecaster {
 public:
  virtual ~Forecaster() = default;
  virtual std::vector<Tensor> parameters() = 0;
  virtual Tensor forward(const MultimodalSample& sample, bool teacher_forcing, const ForwardContext& ctx) = 0;
  virtual std::size_t horizon() const = 0;
  virtual double dropout() const = 0;
  // Autoregressive, untaped.
  Tensor predict(const MultimodalSample& sample);
};

class MATForecaster final : public Forecaster {
 public:
  MATForecaster(MATParams<float> params, MATConfig cfg) : params_(std::move(params)), cfg_(std::move(cfg)) {}
  std::vector<Tensor> parameters() override { return params_.tensors(); }
  Tensor forward(const MultimodalSample& sample, bool teacher_forcing, const ForwardContext& ctx) override {
    return mat::forward(sample, params_, cfg_, teacher_forcing, ctx);
  }
  std::size_t horizon() const override { return cfg_.horizon; }
  double dropout() const override { return cfg_.dropout; }
  MATParams<float>& params() { return params_; }
  const MATConfig& config() const { return cfg_; }

 private:
  MATParams<float> params_;
  MATConfig cfg_;
};

// Mean squared error over every element: (1/m) sum_k (1/T') ||pred_k - target_k||^2.
template <typename T>
BasicTensor<T> mse_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target);

// Scores normalised predictions (one vector per sample) against the samples'
// targets, optionally mapping both back to original units first.
EvaluationReport score_predictions(const std::vector<std::vector<double>>& predictions,
                                   const std::vector<MultimodalSample>& samples, const NormStats& stats,
                                   bool original_units = true);

// Autoregressive predictions for every sample, normalised units.
std::vector<std::vector<double>> predict_all(Forecaster& model, const std::vector<MultimodalSample>& samples);

EvaluationReport evaluate(Forecaster& model, const std::vector<MultimodalSample>& samples, const NormStats& stats,
                          bool original_units = true);

// Mini-batch Adam with early stopping on validation MSE. On return the
// model holds the parameters of the best epoch.
TrainHistory train(Forecaster& model, const std::vector<MultimodalSample>& train_set,
                   const std::vector<MultimodalSample>& val_set, const TrainConfig& cfg);

}  // namespace mat
