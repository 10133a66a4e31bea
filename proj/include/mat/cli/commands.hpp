#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mat/baselines/elasticnet.hpp"
#include "mat/cli/config.hpp"
#include "mat/data/dataset.hpp"
#include "mat/training/training.hpp"

namespace mat::cli {

// 1 usage/config, 2 data/checkpoint, 3 numeric/training.
int exit_code_for(const std::exception& e);

// Parses argv and dispatches; never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct PreparedData {
  DatasetSplit split;  // normalised
  NormStats stats;
  std::vector<std::string> txt_names, ts_names;
  std::size_t samples = 0;
};

// Load -> monthly -> featurize if needed -> window -> split -> normalise.
// Fills cfg.net.d_txt and cfg.net.d_ts.
PreparedData prepare_data(RunConfig& cfg);

// A trained model of any kind, restored from a checkpoint.
struct LoadedModel {
  ModelKind kind = ModelKind::mat;
  std::unique_ptr<Forecaster> net;
  std::optional<ElasticNetForecaster> enet;
  std::vector<std::vector<double>> predict(const std::vector<MultimodalSample>& samples);
};
// The checkpoint must hold cfg.model's kind with cfg.net's layout.
LoadedModel load_model(const std::filesystem::path& path, const RunConfig& cfg);

void write_metrics_csv(const std::filesystem::path& path, const std::string& model, const EvaluationReport& report);
void print_metrics_table(std::ostream& out, const std::string& model, const EvaluationReport& report);

void cmd_featurize(const std::filesystem::path& corpus, const std::filesystem::path& lexicon, RunConfig cfg,
                   std::ostream& out);
void cmd_synth(const RunConfig& cfg, std::ostream& out);
EvaluationReport cmd_train(RunConfig cfg, std::ostream& out);
EvaluationReport cmd_eval(RunConfig cfg, const std::filesystem::path& checkpoint, std::ostream& out);
void cmd_predict(RunConfig cfg, const std::filesystem::path& checkpoint, const std::string& split, std::ostream& out);
void cmd_inspect_attn(RunConfig cfg, const std::filesystem::path& checkpoint, const std::string& split,
                      std::size_t index, std::ostream& out);

}  // namespace mat::cli
