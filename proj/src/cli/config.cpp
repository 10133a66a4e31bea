#include "mat/cli/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "mat/error.hpp"

namespace mat::cli {

namespace pt = boost::property_tree;

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::mat: return "mat";
    case ModelKind::vanilla: return "vanilla";
    case ModelKind::elasticnet: return "elasticnet";
  }
  return "?";
}

ModelKind parse_model_kind(const std::string& text) {
  if (text == "mat") return ModelKind::mat;
  if (text == "vanilla") return ModelKind::vanilla;
  if (text == "elasticnet") return ModelKind::elasticnet;
  throw ConfigError(fmt::format("run.model: unknown model kind '{}' (mat, vanilla, elasticnet)", text));
}

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Reads one section, remembering which keys were consumed.
class Section {
 public:
  Section(const pt::ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {}

  std::optional<std::string> raw(const std::string& key) {
    seen_.insert(key);
    if (!tree_) return std::nullopt;
    auto v = tree_->get_optional<std::string>(pt::ptree::path_type(key, '\0'));
    if (!v) return std::nullopt;
    return trim(*v);
  }

  void read(const std::string& key, std::string& out) {
    if (auto v = raw(key)) out = *v;
  }

  void read(const std::string& key, std::filesystem::path& out, const std::filesystem::path& base) {
    if (auto v = raw(key)) {
      std::filesystem::path p(*v);
      out = v->empty() || p.is_absolute() || base.empty() ? p : base / p;
    }
  }

  template <typename U>
  void read_unsigned(const std::string& key, U& out) {
    if (auto v = raw(key)) {
      std::size_t used = 0;
      unsigned long long parsed = 0;
      try {
        if (!v->empty() && v->front() != '-') parsed = std::stoull(*v, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != v->size()) throw field_error(key, *v, "a non-negative integer");
      out = static_cast<U>(parsed);
    }
  }

  void read(const std::string& key, double& out) {
    if (auto v = raw(key)) out = parse_double(key, *v);
  }

  void read(const std::string& key, bool& out) {
    if (auto v = raw(key)) {
      if (*v == "true" || *v == "1" || *v == "yes") {
        out = true;
      } else if (*v == "false" || *v == "0" || *v == "no") {
        out = false;
      } else {
        throw field_error(key, *v, "true or false");
      }
    }
  }

  double parse_double(const std::string& key, const std::string& text) {
    std::size_t used = 0;
    double parsed = 0.0;
    try {
      parsed = std::stod(text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != text.size()) throw field_error(key, text, "a number");
    return parsed;
  }

  ConfigError field_error(const std::string& key, const std::string& value, const char* want) const {
    return ConfigError(fmt::format("{}.{}: expected {}, got '{}'", name_, key, want, value));
  }

  void reject_unknown() const {
    if (!tree_) return;
    for (const auto& [key, child] : *tree_) {
      if (!seen_.count(key)) throw ConfigError(fmt::format("unknown key '{}.{}'", name_, key));
    }
  }

  const std::string& name() const { return name_; }

 private:
  const pt::ptree* tree_;
  std::string name_;
  std::set<std::string> seen_;
};

std::vector<Coupling> parse_couplings(Section& s, const std::string& key, const std::string& text) {
  std::vector<Coupling> out;
  for (const auto& item : split_list(text)) {
    const auto a = item.find(':'), b = item.rfind(':');
    if (a == std::string::npos || a == b) throw s.field_error(key, item, "index:coef:lag");
    Coupling c;
    try {
      std::size_t used = 0;
      c.index = std::stoul(item.substr(0, a), &used);
      if (used != a) throw std::invalid_argument("index");
      c.coef = std::stod(item.substr(a + 1, b - a - 1));
      const auto lag = item.substr(b + 1);
      c.lag = std::stoul(lag, &used);
      if (used != lag.size()) throw std::invalid_argument("lag");
    } catch (const std::exception&) {
      throw s.field_error(key, item, "index:coef:lag");
    }
    out.push_back(c);
  }
  return out;
}

std::string format_couplings(const std::vector<Coupling>& cs) {
  std::string out;
  for (const auto& c : cs) out += fmt::format("{}{}:{}:{}", out.empty() ? "" : ", ", c.index, c.coef, c.lag);
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ", ") + s;
  return out;
}

std::string path_str(const std::filesystem::path& p) {
  return p.empty() ? std::string() : std::filesystem::weakly_canonical(p).string();
}

}  // namespace

RunConfig RunConfig::parse(std::istream& in, const std::filesystem::path& base_dir, const std::string& origin) {
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(fmt::format("{}: line {}: {}", origin, e.line(), e.message()));
  }
  static const std::set<std::string> known{"run", "data", "model", "train", "elasticnet", "synth"};
  for (const auto& [name, child] : tree) {
    if (!known.count(name)) throw ConfigError(fmt::format("{}: unknown section [{}]", origin, name));
    if (!child.data().empty() && child.empty()) {
      throw ConfigError(fmt::format("{}: key '{}' lies outside any section", origin, name));
    }
  }
  auto section = [&tree](const std::string& name) {
    return Section(tree.get_child_optional(name) ? &tree.get_child(name) : nullptr, name);
  };

  RunConfig c;
  auto run = section("run");
  std::string kind = to_string(c.model);
  run.read("model", kind);
  c.model = parse_model_kind(kind);
  run.read_unsigned("seed", c.seed);
  run.read("out", c.out, {});
  if (!base_dir.empty() && c.out.is_relative()) c.out = base_dir / c.out;
  std::string units = "original";
  run.read("metric_units", units);
  if (units != "original" && units != "normalized") throw run.field_error("metric_units", units, "original or normalized");
  c.original_units = units == "original";

  auto data = section("data");
  data.read("ts_csv", c.data.ts_csv, base_dir);
  data.read("date_column", c.data.date_column);
  std::string columns;
  data.read("columns", columns);
  c.data.columns = split_list(columns);
  data.read("target", c.data.target);
  data.read("text_frame", c.data.text_frame, base_dir);
  data.read("text_coverage", c.data.text_coverage, base_dir);
  data.read("corpus", c.data.corpus, base_dir);
  data.read("lexicon", c.data.lexicon, base_dir);

  auto model = section("model");
  model.read_unsigned("d_model", c.net.d_model);
  model.read_unsigned("heads", c.net.heads);
  model.read_unsigned("d_head", c.net.d_head);
  model.read_unsigned("n_enc_layers", c.net.n_enc_layers);
  model.read_unsigned("n_dec_layers", c.net.n_dec_layers);
  model.read_unsigned("d_ff", c.net.d_ff);
  model.read_unsigned("lookback_txt", c.net.lookback_txt);
  model.read_unsigned("lookback_ts", c.net.lookback_ts);
  model.read_unsigned("horizon", c.net.horizon);
  model.read("dropout", c.net.dropout);

  auto train = section("train");
  train.read_unsigned("batch_size", c.train.batch_size);
  train.read("lr", c.train.lr);
  train.read_unsigned("max_epochs", c.train.max_epochs);
  train.read_unsigned("patience", c.train.patience);
  train.read("teacher_forcing", c.train.teacher_forcing);

  auto enet = section("elasticnet");
  if (auto v = enet.raw("alphas")) {
    c.elasticnet.alphas.clear();
    for (const auto& a : split_list(*v)) c.elasticnet.alphas.push_back(enet.parse_double("alphas", a));
  }
  enet.read("l1_ratio", c.elasticnet.l1_ratio);

  auto synth = section("synth");
  synth.read_unsigned("months", c.synth.months);
  synth.read_unsigned("ts_features", c.synth.ts_features);
  synth.read_unsigned("topics", c.synth.topics);
  synth.read("noise", c.synth.noise);
  synth.read("persistence", c.synth.persistence);
  if (auto v = synth.raw("start")) {
    try {
      c.synth.start = parse_iso_date(*v);
    } catch (const DataError&) {
      throw synth.field_error("start", *v, "a YYYY-MM-DD date");
    }
  }
  if (auto v = synth.raw("ts_couplings")) c.synth.ts_couplings = parse_couplings(synth, "ts_couplings", *v);
  if (auto v = synth.raw("topic_couplings")) c.synth.topic_couplings = parse_couplings(synth, "topic_couplings", *v);

  for (const auto* s : {&run, &data, &model, &train, &enet, &synth}) s->reject_unknown();
  c.train.seed = c.seed;
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config '{}'", path.string()));
  return parse(in, path.parent_path(), path.string());
}

void RunConfig::validate() const {
  auto prefixed = [](const char* section, const auto& check) {
    try {
      check();
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("[{}] {}", section, e.what()));
    }
  };
  // d_txt / d_ts are filled from the data, so check the rest with stand-ins.
  MATConfig probe = net;
  if (probe.d_txt == 0) probe.d_txt = 1;
  if (probe.d_ts == 0) probe.d_ts = 1;
  prefixed("model", [&] { probe.validate(); });
  prefixed("train", [&] { train.validate(); });
  if (elasticnet.alphas.empty()) throw ConfigError("elasticnet.alphas: at least one value required");
  for (double a : elasticnet.alphas)
    if (!(a >= 0.0)) throw ConfigError(fmt::format("elasticnet.alphas: {} is negative", a));
  if (!(elasticnet.l1_ratio >= 0.0 && elasticnet.l1_ratio <= 1.0)) {
    throw ConfigError(fmt::format("elasticnet.l1_ratio: {} outside [0, 1]", elasticnet.l1_ratio));
  }
  synth.validate();
}

void RunConfig::validate_data() const {
  validate();
  auto must_exist = [](const char* key, const std::filesystem::path& p) {
    if (!p.empty() && !std::filesystem::exists(p)) {
      throw ConfigError(fmt::format("data.{}: '{}' does not exist", key, p.string()));
    }
  };
  if (data.ts_csv.empty()) throw ConfigError("data.ts_csv: required");
  if (data.target.empty()) throw ConfigError("data.target: required");
  must_exist("ts_csv", data.ts_csv);
  must_exist("text_frame", data.text_frame);
  must_exist("text_coverage", data.text_coverage);
  must_exist("corpus", data.corpus);
  must_exist("lexicon", data.lexicon);
  const bool frame = !data.text_frame.empty();
  const bool corpus = !data.corpus.empty() || !data.lexicon.empty();
  if (frame == corpus) throw ConfigError("data: name either text_frame or corpus + lexicon");
  if (corpus && (data.corpus.empty() || data.lexicon.empty())) {
    throw ConfigError("data: corpus and lexicon must be given together");
  }
}

std::string RunConfig::to_ini() const {
  std::string s;
  s += fmt::format("[run]\nmodel = {}\nseed = {}\nout = {}\nmetric_units = {}\n\n", to_string(model), seed,
                   path_str(out), original_units ? "original" : "normalized");
  s += fmt::format("[data]\nts_csv = {}\ndate_column = {}\ncolumns = {}\ntarget = {}\ntext_frame = {}\n",
                   path_str(data.ts_csv), data.date_column, join(data.columns), data.target, path_str(data.text_frame));
  s += fmt::format("text_coverage = {}\ncorpus = {}\nlexicon = {}\n\n", path_str(data.text_coverage),
                   path_str(data.corpus), path_str(data.lexicon));
  s += fmt::format(
      "[model]\nd_model = {}\nheads = {}\nd_head = {}\nn_enc_layers = {}\nn_dec_layers = {}\nd_ff = {}\n"
      "lookback_txt = {}\nlookback_ts = {}\nhorizon = {}\ndropout = {}\n\n",
      net.d_model, net.heads, net.d_head, net.n_enc_layers, net.n_dec_layers, net.d_ff, net.lookback_txt,
      net.lookback_ts, net.horizon, net.dropout);
  s += fmt::format("[train]\nbatch_size = {}\nlr = {}\nmax_epochs = {}\npatience = {}\nteacher_forcing = {}\n\n",
                   train.batch_size, train.lr, train.max_epochs, train.patience, train.teacher_forcing);
  std::vector<std::string> alphas;
  for (double a : elasticnet.alphas) alphas.push_back(fmt::format("{}", a));
  s += fmt::format("[elasticnet]\nalphas = {}\nl1_ratio = {}\n\n", join(alphas), elasticnet.l1_ratio);
  s += fmt::format(
      "[synth]\nmonths = {}\nts_features = {}\ntopics = {}\nnoise = {}\npersistence = {}\nstart = {}\n"
      "ts_couplings = {}\ntopic_couplings = {}\n",
      synth.months, synth.ts_features, synth.topics, synth.noise, synth.persistence, format_iso_date(synth.start),
      format_couplings(synth.ts_couplings), format_couplings(synth.topic_couplings));
  return s;
}

}  // namespace mat::cli
