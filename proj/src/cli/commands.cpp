#include "mat/cli/commands.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "mat/baselines/vanilla.hpp"
#include "mat/data/text.hpp"
#include "mat/data/timeseries.hpp"
#include "mat/error.hpp"
#include "mat/model/checkpoint.hpp"

namespace mat::cli {

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const UsageError*>(&e)) return 1;
  if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const CheckpointError*>(&e) ||
      dynamic_cast<const DimensionError*>(&e) || dynamic_cast<const std::filesystem::filesystem_error*>(&e)) {
    return 2;
  }
  if (dynamic_cast<const NumericError*>(&e) || dynamic_cast<const TrainingError*>(&e) ||
      dynamic_cast<const MaskingError*>(&e)) {
    return 3;
  }
  return 1;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
  return out;
}

void prepare_out_dir(const RunConfig& cfg) {
  std::filesystem::create_directories(cfg.out);
  open_out(cfg.out / "config.ini") << cfg.to_ini();
}

const std::vector<MultimodalSample>& pick_split(const PreparedData& data, const std::string& name) {
  if (name == "train") return data.split.train;
  if (name == "val") return data.split.val;
  if (name == "test") return data.split.test;
  throw UsageError(fmt::format("unknown split '{}' (train, val, test)", name));
}

std::string checkpoint_kind(const std::filesystem::path& path) { return read_checkpoint(path).kind; }

}  // namespace

PreparedData prepare_data(RunConfig& cfg) {
  cfg.validate_data();
  auto table = load_timeseries_csv(cfg.data.ts_csv, {cfg.data.date_column, cfg.data.columns}).table;
  if (infer_frequency(table.timestamps) != "monthly") table = downsample_monthly(table);
  table.column_index(cfg.data.target);  // names the missing column early

  TopicSentimentFrame frame;
  if (!cfg.data.text_frame.empty()) {
    frame = read_frame_csv(cfg.data.text_frame, cfg.data.text_coverage);
  } else {
    const auto calendar = monthly_calendar(month_start(table.timestamps.front()), month_start(table.timestamps.back()));
    frame = featurize_text(load_corpus_jsonl(cfg.data.corpus), load_lexicon(cfg.data.lexicon), calendar);
  }

  const auto& net = cfg.net;
  auto samples = align_and_window(table, frame, cfg.data.target, net.lookback_ts, net.lookback_txt, net.horizon);
  if (samples.size() < 3) {
    throw DataError(fmt::format("only {} samples after windowing; train, validation and test need one each",
                                samples.size()));
  }
  PreparedData out;
  out.samples = samples.size();
  out.split = split_dataset(samples);
  out.stats = fit_normalizer(out.split.train);
  for (auto* part : {&out.split.train, &out.split.val, &out.split.test}) *part = apply_normalizer(*part, out.stats);
  const auto& s0 = out.split.train.front();
  out.txt_names = s0.txt.feature_names;
  out.ts_names = s0.ts.feature_names;
  cfg.net.d_txt = s0.txt.features();
  cfg.net.d_ts = s0.ts.features();
  return out;
}

std::vector<std::vector<double>> LoadedModel::predict(const std::vector<MultimodalSample>& samples) {
  if (enet) return enet->predict_all(samples);
  return predict_all(*net, samples);
}

LoadedModel load_model(const std::filesystem::path& path, const RunConfig& cfg) {
  const auto kind = checkpoint_kind(path);
  if (kind != to_string(cfg.model)) {
    throw CheckpointHeaderError(
        fmt::format("checkpoint holds a '{}' model but the config asks for '{}'", kind, to_string(cfg.model)));
  }
  LoadedModel m;
  m.kind = cfg.model;
  switch (cfg.model) {
    case ModelKind::mat: {
      auto loaded = load_checkpoint(path, cfg.net);
      m.net = std::make_unique<MATForecaster>(std::move(loaded.params), cfg.net);
      break;
    }
    case ModelKind::vanilla: {
      verify_census(read_checkpoint(path), vanilla_census(cfg.net));
      auto loaded = load_vanilla_checkpoint(path);
      m.net = std::make_unique<VanillaForecaster>(std::move(loaded.params), cfg.net);
      break;
    }
    case ModelKind::elasticnet: {
      auto loaded = load_elastic_net_checkpoint(path).model;
      const auto& n = cfg.net;
      if (loaded.d_txt != n.d_txt || loaded.d_ts != n.d_ts || loaded.lookback_txt != n.lookback_txt ||
          loaded.lookback_ts != n.lookback_ts || loaded.horizon != n.horizon) {
        throw CheckpointCensusError(fmt::format(
            "census mismatch: checkpoint windows {}x{} / {}x{} horizon {}, config {}x{} / {}x{} horizon {}",
            loaded.lookback_txt, loaded.d_txt, loaded.lookback_ts, loaded.d_ts, loaded.horizon, n.lookback_txt,
            n.d_txt, n.lookback_ts, n.d_ts, n.horizon));
      }
      m.enet = std::move(loaded);
      break;
    }
  }
  return m;
}

void write_metrics_csv(const std::filesystem::path& path, const std::string& model, const EvaluationReport& report) {
  auto out = open_out(path);
  out << "model,horizon,mse,mae\n";
  for (std::size_t k = 0; k < report.per_step.size(); ++k) {
    fmt::print(out, "{},{},{},{}\n", model, k + 1, report.per_step[k].mse, report.per_step[k].mae);
  }
  fmt::print(out, "{},all,{},{}\n", model, report.overall.mse, report.overall.mae);
}

void print_metrics_table(std::ostream& out, const std::string& model, const EvaluationReport& report) {
  std::string head = fmt::format("{:<12}", "model"), row = fmt::format("{:<12}", model);
  for (std::size_t k = 0; k < report.per_step.size(); ++k) {
    head += fmt::format(" {:>10} {:>10}", fmt::format("h{} MSE", k + 1), fmt::format("h{} MAE", k + 1));
    row += fmt::format(" {:>10.4f} {:>10.4f}", report.per_step[k].mse, report.per_step[k].mae);
  }
  head += fmt::format(" {:>10} {:>10}", "MSE", "MAE");
  row += fmt::format(" {:>10.4f} {:>10.4f}", report.overall.mse, report.overall.mae);
  fmt::print(out, "{}\n{}\n", head, row);
}

void cmd_featurize(const std::filesystem::path& corpus_path, const std::filesystem::path& lexicon_path, RunConfig cfg,
                   std::ostream& out) {
  if (corpus_path.empty() || lexicon_path.empty()) throw UsageError("featurize needs --corpus and --lexicon");
  for (const auto& p : {corpus_path, lexicon_path}) {
    if (!std::filesystem::exists(p)) throw DataError(fmt::format("'{}' does not exist", p.string()));
  }
  cfg.data.corpus = corpus_path;
  cfg.data.lexicon = lexicon_path;
  const auto corpus = load_corpus_jsonl(corpus_path);
  const auto lexicon = load_lexicon(lexicon_path);
  std::vector<Date> calendar;
  if (!corpus.documents.empty()) {
    Date first = corpus.documents.front().date, last = first;
    for (const auto& d : corpus.documents) {
      first = std::min(first, d.date);
      last = std::max(last, d.date);
    }
    calendar = monthly_calendar(month_start(first), month_start(last));
  }
  const auto frame = featurize_text(corpus, lexicon, calendar);
  prepare_out_dir(cfg);
  write_frame_csv(frame, cfg.out / "topics.csv", cfg.out / "coverage.csv");
  fmt::print(out, "{} documents, {} months\n", corpus.documents.size(), frame.length());
  for (std::size_t k = 0; k < frame.topics.size(); ++k) {
    fmt::print(out, "{}: {} sentences\n", frame.topics[k], frame.sentence_counts[k]);
  }
}

void cmd_synth(const RunConfig& cfg_in, std::ostream& out) {
  RunConfig cfg = cfg_in;
  const auto data = generate_synthetic(cfg.synth, cfg.seed);
  // The snapshot points the data section at the generated files.
  std::filesystem::create_directories(cfg.out);
  cfg.data.ts_csv = cfg.out / "ts.csv";
  cfg.data.text_frame = cfg.out / "topics.csv";
  cfg.data.text_coverage = cfg.out / "coverage.csv";
  cfg.data.corpus.clear();
  cfg.data.lexicon.clear();
  cfg.data.columns.clear();
  cfg.data.date_column = "date";
  cfg.data.target = "y";
  write_timeseries_csv(cfg.data.ts_csv, data.ts);
  write_frame_csv(data.txt, cfg.data.text_frame, cfg.data.text_coverage);
  open_out(cfg.out / "synth.json") << data.description() << '\n';
  prepare_out_dir(cfg);
  fmt::print(out, "{} months, {} series, {} topics -> {}\n", cfg.synth.months, cfg.synth.ts_features, cfg.synth.topics,
             cfg.out.string());
}

EvaluationReport cmd_train(RunConfig cfg, std::ostream& out) {
  auto data = prepare_data(cfg);
  prepare_out_dir(cfg);
  const auto ckpt = cfg.out / "checkpoint.bin";
  const std::string name = to_string(cfg.model);
  TrainHistory history;
  switch (cfg.model) {
    case ModelKind::mat: {
      MATForecaster model(init_mat_params<float>(cfg.net, cfg.seed), cfg.net);
      history = train(model, data.split.train, data.split.val, cfg.train);
      save_checkpoint(model.params(), cfg.net, ckpt, cfg.seed);
      break;
    }
    case ModelKind::vanilla: {
      VanillaForecaster model(init_vanilla_params<float>(cfg.net, cfg.seed), cfg.net);
      history = train(model, data.split.train, data.split.val, cfg.train);
      save_vanilla_checkpoint(model.params(), cfg.net, ckpt, cfg.seed);
      break;
    }
    case ModelKind::elasticnet: {
      const auto start = std::chrono::steady_clock::now();
      const auto model = fit_elastic_net_forecaster(data.split.train, data.split.val, cfg.elasticnet.alphas,
                                                    cfg.elasticnet.l1_ratio);
      const auto unit = identity_stats(cfg.net.d_txt, cfg.net.d_ts);
      const double train_mse = score_predictions(model.predict_all(data.split.train), data.split.train, unit).overall.mse;
      const double val_mse = score_predictions(model.predict_all(data.split.val), data.split.val, unit).overall.mse;
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      history.epochs.push_back({1, train_mse, val_mse, secs});
      history.best_epoch = 1;
      save_elastic_net_checkpoint(model, ckpt, cfg.seed);
      break;
    }
  }
  history.write_csv(cfg.out / "history.csv");
  for (const auto& e : history.epochs) {
    fmt::print(out, "epoch {:>3}  train_loss {:.6f}  val_mse {:.6f}\n", e.epoch, e.train_loss, e.val_mse);
  }
  fmt::print(out, "best epoch {}; {} train / {} val / {} test samples\n", history.best_epoch, data.split.train.size(),
             data.split.val.size(), data.split.test.size());

  // Scored through the saved checkpoint, exactly as eval would.
  auto model = load_model(ckpt, cfg);
  const auto report = score_predictions(model.predict(data.split.test), data.split.test, data.stats, cfg.original_units);
  write_metrics_csv(cfg.out / "metrics.csv", name, report);
  print_metrics_table(out, name, report);
  return report;
}

EvaluationReport cmd_eval(RunConfig cfg, const std::filesystem::path& checkpoint, std::ostream& out) {
  auto data = prepare_data(cfg);
  auto model = load_model(checkpoint, cfg);
  prepare_out_dir(cfg);
  const auto report = score_predictions(model.predict(data.split.test), data.split.test, data.stats, cfg.original_units);
  write_metrics_csv(cfg.out / "metrics.csv", to_string(cfg.model), report);
  print_metrics_table(out, to_string(cfg.model), report);
  return report;
}

void cmd_predict(RunConfig cfg, const std::filesystem::path& checkpoint, const std::string& split, std::ostream& out) {
  auto data = prepare_data(cfg);
  const auto& samples = pick_split(data, split);
  auto model = load_model(checkpoint, cfg);
  prepare_out_dir(cfg);
  const auto preds = model.predict(samples);
  auto file = open_out(cfg.out / "predictions.csv");
  file << "model,sample,anchor,step,date,prediction,actual\n";
  auto units = [&](double z) { return cfg.original_units ? data.stats.denormalise_target(z) : z; };
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    for (std::size_t k = 0; k < preds[i].size(); ++k) {
      fmt::print(file, "{},{},{},{},{},{},{}\n", to_string(cfg.model), i, format_iso_date(s.anchor), k + 1,
                 format_iso_date(s.future_dates[k]), units(preds[i][k]), units(s.y_future[k]));
    }
  }
  fmt::print(out, "{} predictions for {} {} samples -> {}\n", samples.size() * cfg.net.horizon, samples.size(), split,
             (cfg.out / "predictions.csv").string());
}

void cmd_inspect_attn(RunConfig cfg, const std::filesystem::path& checkpoint, const std::string& split,
                      std::size_t index, std::ostream& out) {
  if (cfg.model != ModelKind::mat) throw UsageError("inspect-attn needs a mat model");
  auto data = prepare_data(cfg);
  const auto& samples = pick_split(data, split);
  if (index >= samples.size()) {
    throw UsageError(fmt::format("sample {} out of range: the {} split has {} samples", index, split, samples.size()));
  }
  auto model = load_model(checkpoint, cfg);
  auto& params = dynamic_cast<MATForecaster&>(*model.net).params();
  const auto& sample = samples[index];
  const auto exported = export_attention(sample, params, cfg.net);
  prepare_out_dir(cfg);
  const auto dir = cfg.out / "attention";
  std::filesystem::create_directories(dir);

  auto write_features = [&](const std::string& file, const Tensor& w, const ModalitySequence& seq) {
    auto f = open_out(dir / file);
    f << "date";
    for (const auto& n : seq.feature_names) f << ',' << n;
    f << '\n';
    for (std::size_t t = 0; t < w.rows(); ++t) {
      f << format_iso_date(seq.timestamps[t]);
      for (std::size_t j = 0; j < w.cols(); ++j) fmt::print(f, ",{}", w.at(t, j));
      f << '\n';
    }
  };
  write_features("feature_txt.csv", exported.record.feature_weights_txt, sample.txt);
  write_features("feature_ts.csv", exported.record.feature_weights_ts, sample.ts);

  auto index_file = open_out(dir / "index.csv");
  index_file << "file,heads,rows,cols\n";
  std::size_t files = 2;
  for (const auto& [key, w] : exported.record.temporal) {
    const std::size_t heads = w.extent(0), rows = w.extent(1), cols = w.extent(2);
    const auto values = w.data();
    for (std::size_t h = 0; h < heads; ++h) {
      const auto name = fmt::format("{}_h{}.csv", key.name(), h);
      auto f = open_out(dir / name);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) fmt::print(f, "{}{}", c ? "," : "", values[(h * rows + r) * cols + c]);
        f << '\n';
      }
      fmt::print(index_file, "{},{},{},{}\n", name, heads, rows, cols);
      ++files;
    }
  }
  auto pred = open_out(dir / "prediction.csv");
  pred << "step,date,prediction,actual\n";
  for (std::size_t k = 0; k < cfg.net.horizon; ++k) {
    fmt::print(pred, "{},{},{},{}\n", k + 1, format_iso_date(sample.future_dates[k]),
               data.stats.denormalise_target(exported.prediction.at(k, 0)),
               data.stats.denormalise_target(sample.y_future[k]));
  }
  fmt::print(out, "{} attention files for {} sample {} (anchor {}) -> {}\n", files, split, index,
             format_iso_date(sample.anchor), dir.string());
}

namespace {

std::string one_line(std::string s) {
  for (auto& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multimodal attention forecaster: featurize, synth, train, eval, predict, inspect-attn", "mat"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "INI run configuration");
  app.add_option("--seed", seed, "overrides run.seed");
  app.add_option("--out", out_dir, "overrides run.out");

  std::string corpus, lexicon, checkpoint, split = "test";
  std::size_t sample = 0;
  auto* featurize = app.add_subcommand("featurize", "corpus + lexicon -> monthly topic-sentiment frame");
  featurize->add_option("--corpus", corpus, "JSON-lines corpus (date, source, text)");
  featurize->add_option("--lexicon", lexicon, "topic/sentiment lexicon JSON");
  auto* synth = app.add_subcommand("synth", "generate planted-coupling synthetic data");
  auto* train_cmd = app.add_subcommand("train", "fit a model, save it and score the test split");
  auto* eval = app.add_subcommand("eval", "score a checkpoint on the test split");
  auto* predict = app.add_subcommand("predict", "write predictions for one split");
  auto* inspect = app.add_subcommand("inspect-attn", "export attention weights for one sample");
  for (auto* sub : {eval, predict, inspect}) {
    sub->add_option("--checkpoint", checkpoint, "defaults to <out>/checkpoint.bin");
  }
  for (auto* sub : {predict, inspect}) sub->add_option("--split", split, "train, val or test")->capture_default_str();
  inspect->add_option("--sample", sample, "index within the split")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return 0;
    }
    fmt::print(err, "error: {}\n", one_line(e.what()));
    return 1;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) {
      cfg = RunConfig::load(config_path);
    } else if (!featurize->parsed() && !synth->parsed()) {
      throw UsageError("--config is required");
    }
    if (seed) {
      cfg.seed = *seed;
      cfg.train.seed = *seed;
    }
    if (!out_dir.empty()) cfg.out = out_dir;
    const auto ckpt = checkpoint.empty() ? cfg.out / "checkpoint.bin" : std::filesystem::path(checkpoint);

    if (featurize->parsed()) {
      cmd_featurize(corpus.empty() ? cfg.data.corpus : std::filesystem::path(corpus),
                    lexicon.empty() ? cfg.data.lexicon : std::filesystem::path(lexicon), cfg, out);
    } else if (synth->parsed()) {
      cmd_synth(cfg, out);
    } else if (train_cmd->parsed()) {
      cmd_train(cfg, out);
    } else if (eval->parsed()) {
      cmd_eval(cfg, ckpt, out);
    } else if (predict->parsed()) {
      cmd_predict(cfg, ckpt, split, out);
    } else if (inspect->parsed()) {
      cmd_inspect_attn(cfg, ckpt, split, sample, out);
    }
    return 0;
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", one_line(e.what()));
    return exit_code_for(e);
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"mat"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace mat::cli
