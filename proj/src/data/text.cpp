#include "mat/data/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>
#include <tuple>

#include <fmt/format.h>
#include <json.hpp>

#include "mat/data/timeseries.hpp"
#include "mat/error.hpp"

namespace mat {

namespace {

const std::set<std::string>& abbreviations() {
  static const std::set<std::string> list{"mr",  "mrs", "ms",  "dr",  "prof", "sr",  "jr",  "st",  "vs",
                                          "etc", "inc", "ltd", "corp", "e.g", "i.e", "u.s", "u.k", "jan",
                                          "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept", "oct",
                                          "nov", "dec", "no", "approx", "est"};
  return list;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string_view strip(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// True when the '.' at `pos` ends an abbreviation or sits inside a token
// such as "2.5" or "U.S".
bool guarded_period(std::string_view text, std::size_t pos) {
  if (pos > 0 && pos + 1 < text.size() && std::isalnum(static_cast<unsigned char>(text[pos - 1])) &&
      std::isalnum(static_cast<unsigned char>(text[pos + 1]))) {
    return true;
  }
  std::size_t start = pos;
  while (start > 0 && !is_space(text[start - 1])) --start;
  std::string word = lower(text.substr(start, pos - start));
  while (!word.empty() && !std::isalnum(static_cast<unsigned char>(word.front()))) word.erase(word.begin());
  if (word.empty()) return false;
  return abbreviations().count(word) != 0;
}

}  // namespace

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    if (c == '.' && guarded_period(text, i)) continue;
    // Swallow runs like "?!" or "...".
    while (i + 1 < text.size() && (text[i + 1] == '.' || text[i + 1] == '!' || text[i + 1] == '?')) ++i;
    const auto s = strip(text.substr(start, i + 1 - start));
    if (!s.empty()) out.emplace_back(s);
    start = i + 1;
  }
  const auto tail = strip(text.substr(std::min(start, text.size())));
  if (!tail.empty()) out.emplace_back(tail);
  return out;
}

std::vector<std::string> tokenize(std::string_view sentence) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : sentence) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

void TopicLexicon::normalise() {
  for (auto& t : topics)
    for (auto& k : t.keywords) k = lower(k);
  std::map<std::string, double> lowered;
  for (const auto& [w, s] : sentiment) {
    const auto key = lower(w);
    if (lowered.count(key) && lowered[key] != s) {
      throw DataError(fmt::format("lexicon: word '{}' listed twice with different scores", key));
    }
    lowered[key] = s;
  }
  sentiment = std::move(lowered);
  validate();
}

void TopicLexicon::validate() const {
  if (topics.empty()) throw DataError("lexicon has no topics");
  std::map<std::string, std::string> owner;
  for (const auto& t : topics) {
    if (t.name.empty()) throw DataError("lexicon: topic with an empty name");
    if (t.keywords.empty()) throw DataError(fmt::format("lexicon: topic '{}' has no keywords", t.name));
    for (const auto& k : t.keywords) {
      if (tokenize(k) != std::vector<std::string>{k}) {
        throw DataError(fmt::format("lexicon: keyword '{}' of topic '{}' is not a single lowercase word", k, t.name));
      }
      auto [it, fresh] = owner.emplace(k, t.name);
      if (!fresh && it->second != t.name) {
        throw DataError(fmt::format("lexicon: keyword '{}' belongs to both '{}' and '{}'", k, it->second, t.name));
      }
    }
  }
  for (const auto& [w, s] : sentiment) {
    if (!(s >= -1.0 && s <= 1.0)) throw DataError(fmt::format("lexicon: score {} for '{}' outside [-1, 1]", s, w));
  }
}

TextCorpus parse_corpus_jsonl(std::istream& in, const std::string& origin) {
  TextCorpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (strip(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Document d;
      d.date = parse_iso_date(j.at("date").get<std::string>());
      d.source = j.value("source", std::string{});
      d.text = j.at("text").get<std::string>();
      if (strip(d.text).empty()) throw DataError("empty text");
      corpus.documents.push_back(std::move(d));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(fmt::format("{}: line {}: {}", origin, line_no, e.what()));
    } catch (const DataError& e) {
      throw DataError(fmt::format("{}: line {}: {}", origin, line_no, e.what()));
    }
  }
  return corpus;
}

TextCorpus load_corpus_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open corpus '{}'", path.string()));
  return parse_corpus_jsonl(in, path.string());
}

TopicLexicon parse_lexicon(const std::string& text, const std::string& origin) {
  TopicLexicon lex;
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto& t : j.at("topics")) {
      lex.topics.push_back({t.at("name").get<std::string>(), t.at("keywords").get<std::vector<std::string>>()});
    }
    if (j.contains("sentiment")) {
      for (const auto& [w, s] : j.at("sentiment").items()) lex.sentiment[w] = s.get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("{}: malformed lexicon: {}", origin, e.what()));
  }
  lex.normalise();
  return lex;
}

TopicLexicon load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open lexicon '{}'", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_lexicon(ss.str(), path.string());
}

TopicSentimentFrame featurize_text(const TextCorpus& corpus, const TopicLexicon& lexicon,
                                   const std::vector<Date>& calendar) {
  lexicon.validate();
  if (corpus.documents.empty()) throw DataError("empty corpus");
  const std::size_t k = lexicon.topics.size();
  std::map<std::string, std::size_t> keyword_topic;
  for (std::size_t i = 0; i < k; ++i)
    for (const auto& w : lexicon.topics[i].keywords) keyword_topic.emplace(w, i);

  std::map<Date, std::size_t> row_of;
  for (std::size_t t = 0; t < calendar.size(); ++t) row_of.emplace(month_start(calendar[t]), t);

  // Fixed reduction order regardless of how the corpus was listed.
  std::vector<const Document*> docs;
  for (const auto& d : corpus.documents) docs.push_back(&d);
  std::sort(docs.begin(), docs.end(), [](const Document* a, const Document* b) {
    return std::tie(a->date, a->source, a->text) < std::tie(b->date, b->source, b->text);
  });

  TopicSentimentFrame frame;
  frame.timestamps = calendar;
  for (const auto& t : lexicon.topics) frame.topics.push_back(t.name);
  frame.scores = Matrix(calendar.size(), k);
  frame.coverage.assign(calendar.size() * k, 0);
  frame.sentence_counts.assign(k, 0);
  std::vector<std::size_t> counts(calendar.size() * k, 0);

  for (const Document* doc : docs) {
    const auto row = row_of.find(month_start(doc->date));
    if (row == row_of.end()) continue;
    for (const auto& sentence : split_sentences(doc->text)) {
      const auto words = tokenize(sentence);
      std::vector<std::size_t> hits(k, 0);
      double score = 0.0;
      std::size_t scored = 0;
      for (const auto& w : words) {
        if (auto it = keyword_topic.find(w); it != keyword_topic.end()) ++hits[it->second];
        if (auto it = lexicon.sentiment.find(w); it != lexicon.sentiment.end()) {
          score += it->second;
          ++scored;
        }
      }
      const auto best = static_cast<std::size_t>(std::max_element(hits.begin(), hits.end()) - hits.begin());
      if (hits[best] == 0) continue;
      const double sentiment = scored ? score / static_cast<double>(scored) : 0.0;
      const std::size_t cell = row->second * k + best;
      frame.scores.values[cell] += sentiment;
      ++counts[cell];
      ++frame.sentence_counts[best];
    }
  }
  for (std::size_t cell = 0; cell < counts.size(); ++cell) {
    if (counts[cell] == 0) continue;
    frame.scores.values[cell] /= static_cast<double>(counts[cell]);
    frame.coverage[cell] = 1;
  }
  return frame;
}

void write_frame_csv(const TopicSentimentFrame& frame, const std::filesystem::path& scores_path,
                     const std::filesystem::path& coverage_path) {
  std::ofstream scores(scores_path, std::ios::trunc);
  std::ofstream cover(coverage_path, std::ios::trunc);
  if (!scores || !cover) throw DataError(fmt::format("cannot write frame '{}'", scores_path.string()));
  scores << "date";
  cover << "date";
  for (const auto& t : frame.topics) {
    scores << ',' << t;
    cover << ',' << t;
  }
  scores << '\n';
  cover << '\n';
  for (std::size_t t = 0; t < frame.length(); ++t) {
    const auto d = format_iso_date(frame.timestamps[t]);
    scores << d;
    cover << d;
    for (std::size_t j = 0; j < frame.topics.size(); ++j) {
      scores << ',' << fmt::format("{}", frame.scores(t, j));
      cover << ',' << (frame.covered(t, j) ? 1 : 0);
    }
    scores << '\n';
    cover << '\n';
  }
}

TopicSentimentFrame read_frame_csv(const std::filesystem::path& scores_path,
                                   const std::filesystem::path& coverage_path) {
  const auto table = load_timeseries_csv(scores_path).table;
  TopicSentimentFrame frame;
  frame.timestamps = table.timestamps;
  frame.topics = table.names;
  frame.scores = table.values;
  frame.coverage.assign(table.values.values.size(), 1);
  frame.sentence_counts.assign(table.names.size(), 0);
  if (!coverage_path.empty()) {
    const auto mask = load_timeseries_csv(coverage_path).table;
    if (mask.timestamps != table.timestamps || mask.names != table.names) {
      throw DataError(fmt::format("coverage file '{}' does not match '{}'", coverage_path.string(),
                                  scores_path.string()));
    }
    for (std::size_t i = 0; i < mask.values.values.size(); ++i) frame.coverage[i] = mask.values.values[i] != 0.0;
  }
  for (double v : frame.scores.values) {
    if (v < -1.0 || v > 1.0) throw DataError(fmt::format("topic score {} in '{}' outside [-1, 1]", v, scores_path.string()));
  }
  return frame;
}

}  // namespace mat
