#include "mat/training/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "mat/error.hpp"
#include "mat/numerics/adam.hpp"
#include "mat/numerics/ops.hpp"

namespace mat {

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("train.batch_size must be at least 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("train.lr must be a finite non-negative number");
  if (max_epochs == 0) throw ConfigError("train.max_epochs must be at least 1");
  if (patience > max_epochs) {
    throw ConfigError(fmt::format("train.patience ({}) exceeds train.max_epochs ({})", patience, max_epochs));
  }
}

void TrainHistory::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
  out << "epoch,train_loss,val_mse,seconds\n";
  for (const auto& e : epochs) out << fmt::format("{},{},{},{:.3f}\n", e.epoch, e.train_loss, e.val_mse, e.seconds);
}

Tensor Forecaster::predict(const MultimodalSample& sample) {
  NoGradGuard no_grad;
  return forward(sample, false, {});
}

template <typename T>
BasicTensor<T> mse_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target) {
  if (pred.shape() != target.shape()) {
    throw DimensionError(fmt::format("mse_loss: prediction {} vs target {}", shape_str(pred.shape()),
                                     shape_str(target.shape())));
  }
  auto err = sub(pred, target);
  return mean(mul(err, err));
}

template BasicTensor<float> mse_loss(const BasicTensor<float>&, const BasicTensor<float>&);
template BasicTensor<double> mse_loss(const BasicTensor<double>&, const BasicTensor<double>&);

EvaluationReport score_predictions(const std::vector<std::vector<double>>& predictions,
                                   const std::vector<MultimodalSample>& samples, const NormStats& stats,
                                   bool original_units) {
  if (samples.empty()) throw DataError("cannot evaluate on an empty split");
  if (predictions.size() != samples.size()) throw DimensionError("prediction count differs from sample count");
  const std::size_t h = samples.front().y_future.size();
  EvaluationReport report;
  report.per_step.assign(h, Metrics{});
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (predictions[i].size() != h || samples[i].y_future.size() != h) {
      throw DimensionError("prediction length differs from the horizon");
    }
    for (std::size_t k = 0; k < h; ++k) {
      double y = samples[i].y_future[k], yhat = predictions[i][k];
      if (original_units) {
        y = stats.denormalise_target(y);
        yhat = stats.denormalise_target(yhat);
      }
      const double e = y - yhat;
      report.per_step[k].mse += e * e;
      report.per_step[k].mae += std::abs(e);
      ++report.per_step[k].n;
      report.overall.mse += e * e;
      report.overall.mae += std::abs(e);
      ++report.overall.n;
    }
  }
  auto finish = [](Metrics& m) {
    m.mse /= static_cast<double>(m.n);
    m.mae /= static_cast<double>(m.n);
  };
  finish(report.overall);
  for (auto& m : report.per_step) finish(m);
  return report;
}

std::vector<std::vector<double>> predict_all(Forecaster& model, const std::vector<MultimodalSample>& samples) {
  std::vector<std::vector<double>> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    const auto pred = model.predict(s);
    out.emplace_back(pred.data().begin(), pred.data().end());
  }
  return out;
}

EvaluationReport evaluate(Forecaster& model, const std::vector<MultimodalSample>& samples, const NormStats& stats,
                          bool original_units) {
  if (samples.empty()) throw DataError("cannot evaluate on an empty split");
  return score_predictions(predict_all(model, samples), samples, stats, original_units);
}

namespace {

std::vector<std::vector<float>> snapshot(const std::vector<Tensor>& params) {
  std::vector<std::vector<float>> out;
  for (const auto& p : params) out.emplace_back(p.data().begin(), p.data().end());
  return out;
}

void restore(std::vector<Tensor>& params, const std::vector<std::vector<float>>& values) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::copy(values[i].begin(), values[i].end(), params[i].mutable_data().begin());
  }
}

}  // namespace

TrainHistory train(Forecaster& model, const std::vector<MultimodalSample>& train_set,
                   const std::vector<MultimodalSample>& val_set, const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.empty()) throw DataError("training split is empty");
  if (val_set.empty()) throw DataError("validation split is empty");
  auto params = model.parameters();
  AdamState adam(AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});
  const NormStats unit = identity_stats(train_set.front().txt.features(), train_set.front().ts.features());

  TrainHistory history;
  double best_val = 0.0;
  std::vector<std::vector<float>> best_params = snapshot(params);
  std::vector<std::size_t> order(train_set.size());

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(epoch)};
    std::mt19937_64 rng(seq);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    ForwardContext ctx{true, model.dropout(), &rng};

    double loss_sum = 0.0;
    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_no) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      try {
        std::vector<Tensor> preds, targets;
        for (std::size_t i = start; i < end; ++i) {
          const auto& s = train_set[order[i]];
          preds.push_back(transpose(model.forward(s, cfg.teacher_forcing, ctx)));
          std::vector<float> y(s.y_future.begin(), s.y_future.end());
          targets.emplace_back(Shape{1, y.size()}, std::move(y));
        }
        auto loss = mse_loss(concat_rows(preds), concat_rows(targets));
        for (auto& p : params) p.zero_grad();
        loss.backward();
        adam_step(params, adam);
        loss_sum += loss.item() * static_cast<double>(end - start);
      } catch (const NumericError& e) {
        restore(params, best_params);
        throw TrainingError(fmt::format("training diverged at epoch {} batch {}: {}", epoch, batch_no + 1, e.what()));
      }
    }

    double val = 0.0;
    try {
      val = evaluate(model, val_set, unit, false).overall.mse;
    } catch (const NumericError& e) {
      restore(params, best_params);
      throw TrainingError(fmt::format("validation diverged at epoch {}: {}", epoch, e.what()));
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    history.epochs.push_back({epoch, loss_sum / static_cast<double>(order.size()), val, seconds});
    if (history.best_epoch == 0 || val < best_val) {
      best_val = val;
      history.best_epoch = epoch;
      best_params = snapshot(params);
    }
    if (epoch - history.best_epoch >= cfg.patience) break;
  }
  restore(params, best_params);
  return history;
}

}  // namespace mat
