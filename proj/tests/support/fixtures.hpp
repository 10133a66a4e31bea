#pragma once

// Small dated corpus and lexicon shared by the data and CLI tests. Each
// document is listed as its sentences so an oracle can skip splitting.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mat/data/text.hpp"

namespace mat::testing {

struct FixtureDoc {
  std::string date;
  std::string source;
  std::vector<std::string> sentences;

  std::string text() const {
    std::string out;
    for (const auto& s : sentences) out += (out.empty() ? "" : " ") + s;
    return out;
  }
};

inline const std::vector<FixtureDoc>& fixture_docs() {
  static const std::vector<FixtureDoc> docs{
      {"2021-01-05", "fomc",
       {"Construction activity was strong in most districts.", "Wages rose at a solid pace!",
        "The committee met on schedule."}},
      {"2021-01-20", "beige",
       {"Real estate demand was weak.", "Employment growth was slow but jobs were robust in energy."}},
      {"2021-02-03", "fomc",
       {"Prices rose 2.5 percent over the year.", "Inflation remained elevated?",
        "Mr. Smith said housing and mortgage conditions improved."}},
      {"2021-02-17", "beige", {"Nothing notable happened."}},
      {"2021-03-02", "fomc",
       {"Labor markets were strong and unemployment declined.", "Real estate construction fell sharply."}},
      {"2021-03-02", "beige", {"The U.S. housing market was robust.", "Prices declined slightly."}},
      {"2021-03-28", "minutes", {"Inflation and prices were weak, wages were strong."}},
      {"2021-05-11", "fomc", {"Mortgage rates fell.", "Employment and labor demand improved in the area."}},
      {"2021-05-29", "beige",
       {"Estate sales were weak.", "Construction was robust.", "Jobs, jobs and more jobs were solid."}},
      {"2021-06-15", "minutes", {"Inflation was elevated but prices were slow to respond."}},
  };
  return docs;
}

inline std::string fixture_lexicon_json() {
  return R"({
  "topics": [
    {"name": "real_estate", "keywords": ["estate", "real", "construction", "housing", "mortgage"]},
    {"name": "labor", "keywords": ["employment", "jobs", "labor", "unemployment", "wages"]},
    {"name": "inflation", "keywords": ["inflation", "prices", "cpi"]}
  ],
  "sentiment": {"strong": 1.0, "solid": 0.6, "robust": 0.8, "improved": 0.5, "rose": 0.2,
                "weak": -0.8, "slow": -0.4, "fell": -0.3, "declined": -0.5, "elevated": -0.5}
})";
}

inline TextCorpus fixture_corpus() {
  TextCorpus c;
  for (const auto& d : fixture_docs()) c.documents.push_back({parse_iso_date(d.date), d.source, d.text()});
  return c;
}

inline void write_fixture_files(const std::filesystem::path& corpus, const std::filesystem::path& lexicon) {
  std::ofstream out(corpus);
  for (const auto& d : fixture_docs()) {
    nlohmann::ordered_json j;
    j["date"] = d.date;
    j["source"] = d.source;
    j["text"] = d.text();
    out << j.dump() << '\n';
  }
  std::ofstream lex(lexicon);
  lex << fixture_lexicon_json();
}

}  // namespace mat::testing
