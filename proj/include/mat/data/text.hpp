#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mat/data/types.hpp"

namespace mat {

struct Document {
  Date date;
  std::string source;
  std::string text;
};

struct TextCorpus {
  std::vector<Document> documents;
};

struct Topic {
  std::string name;
  std::vector<std::string> keywords;
};

// Keyword topics plus a word -> score table in [-1, 1].
struct TopicLexicon {
  std::vector<Topic> topics;
  std::map<std::string, double> sentiment;

  // Lowercases keywords and sentiment words; rejects overlaps and bad scores.
  void normalise();
  void validate() const;
};

// Per-month mean topic sentiment. Months without a matching sentence hold 0
// and a false coverage flag.
struct TopicSentimentFrame {
  std::vector<Date> timestamps;
  std::vector<std::string> topics;
  Matrix scores;                       // timestamps x topics
  std::vector<std::uint8_t> coverage;  // same layout as scores
  std::vector<std::size_t> sentence_counts;  // per topic, over the whole frame

  std::size_t length() const { return timestamps.size(); }
  bool covered(std::size_t t, std::size_t k) const { return coverage[t * topics.size() + k] != 0; }
};

// One JSON object per line with string fields date, source, text.
TextCorpus parse_corpus_jsonl(std::istream& in, const std::string& origin = "<stream>");
TextCorpus load_corpus_jsonl(const std::filesystem::path& path);

// JSON: {"topics": [{"name": ..., "keywords": [...]}, ...], "sentiment": {word: score}}
TopicLexicon parse_lexicon(const std::string& text, const std::string& origin = "<string>");
TopicLexicon load_lexicon(const std::filesystem::path& path);

// Splits on . ! ? except after listed abbreviations ("Mr.", "U.S.") and
// inside tokens such as "2.5".
std::vector<std::string> split_sentences(std::string_view text);
// Lowercased alphanumeric runs.
std::vector<std::string> tokenize(std::string_view sentence);

// Documents dated outside the calendar are ignored. The result does not
// depend on document order.
TopicSentimentFrame featurize_text(const TextCorpus& corpus, const TopicLexicon& lexicon,
                                   const std::vector<Date>& calendar);

// Frame as `date,<topic>...`; coverage as the same layout with 0/1 cells.
void write_frame_csv(const TopicSentimentFrame& frame, const std::filesystem::path& scores_path,
                     const std::filesystem::path& coverage_path);
// Coverage path may be empty, in which case every cell counts as covered.
TopicSentimentFrame read_frame_csv(const std::filesystem::path& scores_path,
                                   const std::filesystem::path& coverage_path = {});

}  // namespace mat
