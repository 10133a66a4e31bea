#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "mat/baselines/elasticnet.hpp"
#include "mat/data/synthetic.hpp"
#include "mat/model/mat.hpp"
#include "mat/training/training.hpp"

namespace mat::cli {

enum class ModelKind { mat, vanilla, elasticnet };
std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& text);

struct DataConfig {
  std::filesystem::path ts_csv;
  std::string date_column = "date";
  std::vector<std::string> columns;  // empty keeps every column
  std::string target;
  // Either a featurized frame (plus optional coverage) or a corpus and lexicon.
  std::filesystem::path text_frame;
  std::filesystem::path text_coverage;
  std::filesystem::path corpus;
  std::filesystem::path lexicon;
};

struct ElasticNetConfig {
  std::vector<double> alphas = kElasticNetAlphas;
  double l1_ratio = kElasticNetL1Ratio;
};

// Sections: [run] [data] [model] [train] [elasticnet] [synth]. Every key is
// optional; unknown sections or keys are rejected.
struct RunConfig {
  ModelKind model = ModelKind::mat;
  std::uint64_t seed = 0;
  std::filesystem::path out = "out";
  bool original_units = true;  // metrics in the target's own units
  DataConfig data;
  MATConfig net;  // d_txt and d_ts come from the data
  TrainConfig train;
  ElasticNetConfig elasticnet;
  SyntheticSpec synth;

  // Relative paths are resolved against base_dir.
  static RunConfig parse(std::istream& in, const std::filesystem::path& base_dir = {},
                         const std::string& origin = "<config>");
  static RunConfig load(const std::filesystem::path& path);

  // Structural checks (everything but data paths).
  void validate() const;
  // Adds: input files exist and a text source is named.
  void validate_data() const;

  // Resolved snapshot in the same format; parse(to_ini()) reproduces it.
  std::string to_ini() const;
};

}  // namespace mat::cli
