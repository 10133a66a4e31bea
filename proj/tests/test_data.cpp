#include <doctest.h>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <map>
#include <random>
#include <sstream>

#include "mat/data/dataset.hpp"
#include "mat/data/synthetic.hpp"
#include "mat/data/text.hpp"
#include "mat/data/timeseries.hpp"
#include "mat/error.hpp"
#include "support/fixtures.hpp"

using namespace mat;
using namespace mat::testing;

namespace {

CsvLoad parse(const std::string& text) {
  std::istringstream in(text);
  return parse_timeseries_csv(in);
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

TimeSeriesTable monthly_table(std::size_t months, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  TimeSeriesTable t;
  for (std::size_t j = 0; j < cols; ++j) t.names.push_back("c" + std::to_string(j));
  t.values = Matrix(months, cols);
  for (std::size_t m = 0; m < months; ++m) {
    t.timestamps.push_back(add_months(parse_iso_date("2010-01-01"), static_cast<int>(m)));
    for (std::size_t j = 0; j < cols; ++j) t.values(m, j) = dist(rng);
  }
  t.frequency = "monthly";
  return t;
}

TopicSentimentFrame monthly_frame(std::size_t months, std::size_t k, std::uint64_t seed, int start_offset = 0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1, 1);
  TopicSentimentFrame f;
  for (std::size_t j = 0; j < k; ++j) f.topics.push_back("t" + std::to_string(j));
  f.scores = Matrix(months, k);
  f.coverage.assign(months * k, 1);
  for (std::size_t m = 0; m < months; ++m) {
    f.timestamps.push_back(add_months(parse_iso_date("2010-01-01"), static_cast<int>(m) + start_offset));
    for (std::size_t j = 0; j < k; ++j) f.scores(m, j) = dist(rng);
  }
  return f;
}

// Independent tokenizer for the oracle: swap punctuation for spaces, then stream.
std::vector<std::string> oracle_words(const std::string& sentence) {
  std::string cleaned;
  for (char c : sentence) cleaned.push_back(std::isalnum(static_cast<unsigned char>(c)) ? static_cast<char>(std::tolower(c)) : ' ');
  std::istringstream in(cleaned);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

}  // namespace

TEST_CASE("dates: parsing, formatting, month arithmetic") {
  const auto d = parse_iso_date("2021-03-15");
  CHECK(format_iso_date(d) == "2021-03-15");
  CHECK(format_iso_date(parse_iso_date("2021-03")) == "2021-03-01");
  CHECK(format_iso_date(month_start(d)) == "2021-03-01");
  CHECK(format_iso_date(add_months(d, 10)) == "2022-01-01");
  CHECK(format_iso_date(add_months(d, -3)) == "2020-12-01");
  CHECK(months_between(parse_iso_date("2020-11-30"), d) == 4);
  CHECK_THROWS_AS(parse_iso_date("2021-02-30"), DataError);
  CHECK_THROWS_AS(parse_iso_date("21-02-01"), DataError);
  CHECK_THROWS_AS(parse_iso_date("2021/02/01"), DataError);
}

TEST_CASE("csv: well-formed, ordering and parse errors") {
  auto two = parse("date,a,b\n2020-01-01,1.5,2\n2020-02-01,3,4e-1\n");
  CHECK(two.table.length() == 2);
  CHECK(two.table.names == std::vector<std::string>{"a", "b"});
  CHECK(two.table.values(1, 1) == 0.4);
  CHECK(two.filled == 0);
  CHECK(two.table.frequency == "monthly");

  const auto msg = error_of([] { parse("date,a\n2020-01-01,1\n2020-03-01,2\n2020-02-01,3\n"); });
  CHECK(msg.find("row 4") != std::string::npos);
  CHECK(msg.find("strictly increasing") != std::string::npos);

  const auto bad = error_of([] { parse("date,a,b\n2020-01-01,1,x1\n"); });
  CHECK(bad.find("row 2") != std::string::npos);
  CHECK(bad.find("'b'") != std::string::npos);
  CHECK(error_of([] { parse("date,a\n2020-13-01,1\n"); }).find("invalid date") != std::string::npos);
  CHECK_THROWS_AS(parse("when,a\n2020-01-01,1\n"), DataError);
}

TEST_CASE("csv: forward fill with leading back-fill") {
  auto gap = parse("date,a\n2020-01-01,1.0\n2020-01-02,\n2020-01-03,3.0\n");
  CHECK(gap.table.column("a") == std::vector<double>{1.0, 1.0, 3.0});
  CHECK(gap.filled == 1);
  CHECK(gap.table.frequency == "sub-monthly");

  auto lead = parse("date,a,b\n2020-01-01,,5\n2020-02-01,,6\n2020-03-01,7,\n");
  CHECK(lead.table.column("a") == std::vector<double>{7, 7, 7});
  CHECK(lead.table.column("b") == std::vector<double>{5, 6, 6});
  CHECK(lead.filled == 3);

  CsvSchema schema;
  schema.columns = {"b"};
  std::istringstream in("date,a,b\n2020-01-01,1,2\n");
  CHECK(parse_timeseries_csv(in, schema).table.names == std::vector<std::string>{"b"});
}

TEST_CASE("csv: write then read is exact") {
  auto t = monthly_table(30, 3, 4);
  const auto path = std::filesystem::temp_directory_path() / "mat_data_roundtrip.csv";
  write_timeseries_csv(path, t);
  auto back = load_timeseries_csv(path).table;
  CHECK(back.timestamps == t.timestamps);
  CHECK(back.values == t.values);
}

TEST_CASE("downsample: constant month, two-point mean, gap") {
  std::string csv = "date,a\n";
  for (int d = 1; d <= 31; ++d) csv += "2021-03-" + std::string(d < 10 ? "0" : "") + std::to_string(d) + ",2.0\n";
  auto march = downsample_monthly(parse(csv).table);
  CHECK(march.length() == 1);
  CHECK(march.values(0, 0) == 2.0);
  CHECK(format_iso_date(march.timestamps[0]) == "2021-03-01");

  auto pair = downsample_monthly(parse("date,a\n2021-04-03,1.0\n2021-04-20,3.0\n").table);
  CHECK(pair.values(0, 0) == 2.0);

  CHECK_THROWS_AS(downsample_monthly(parse("date,a\n2021-01-03,1\n2021-03-03,2\n").table), DataError);
}

TEST_CASE("downsample: irregular daily year against a per-month loop oracle") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> dist(5, 2);
  std::bernoulli_distribution keep(0.6);
  TimeSeriesTable t;
  t.names = {"a", "b"};
  std::vector<double> vals;
  for (auto day = std::chrono::sys_days{parse_iso_date("2019-01-01")}; day < std::chrono::sys_days{parse_iso_date("2020-01-01")};
       day += std::chrono::days{1}) {
    const Date d{day};
    if (!keep(rng) && d.day() != std::chrono::day{1}) continue;
    t.timestamps.push_back(d);
    vals.push_back(dist(rng));
    vals.push_back(dist(rng));
  }
  t.values = Matrix(t.timestamps.size(), 2);
  t.values.values = vals;
  auto monthly = downsample_monthly(t);
  REQUIRE(monthly.length() == 12);

  std::map<unsigned, std::vector<std::size_t>> rows;
  for (std::size_t i = 0; i < t.timestamps.size(); ++i) rows[static_cast<unsigned>(t.timestamps[i].month())].push_back(i);
  for (unsigned m = 1; m <= 12; ++m) {
    for (std::size_t j = 0; j < 2; ++j) {
      double s = 0.0;
      for (auto i : rows[m]) s += t.values(i, j);
      CHECK(monthly.values(m - 1, j) == s / static_cast<double>(rows[m].size()));
    }
  }
}

TEST_CASE("sentence splitting and tokenization") {
  CHECK(split_sentences("A b. C d! E f? G") == std::vector<std::string>{"A b.", "C d!", "E f?", "G"});
  CHECK(split_sentences("Rates rose 2.5 percent. Next.") == std::vector<std::string>{"Rates rose 2.5 percent.", "Next."});
  CHECK(split_sentences("Mr. Smith met Dr. Jones. The U.S. economy grew.") ==
        std::vector<std::string>{"Mr. Smith met Dr. Jones.", "The U.S. economy grew."});
  CHECK(split_sentences("Wait... what?! Yes.") == std::vector<std::string>{"Wait...", "what?!", "Yes."});
  CHECK(split_sentences("   ").empty());
  CHECK(tokenize("Real-estate, CPI 2.5!") == std::vector<std::string>{"real", "estate", "cpi", "2", "5"});
}

TEST_CASE("lexicon validation") {
  auto lex = parse_lexicon(fixture_lexicon_json());
  CHECK(lex.topics.size() == 3);
  CHECK_THROWS_AS(parse_lexicon(R"({"topics":[{"name":"a","keywords":["x"]},{"name":"b","keywords":["X"]}]})"),
                  DataError);
  CHECK_THROWS_AS(parse_lexicon(R"({"topics":[{"name":"a","keywords":["x"]}],"sentiment":{"good":1.5}})"), DataError);
  CHECK_THROWS_AS(parse_lexicon(R"({"topics":[]})"), DataError);
  CHECK_THROWS_AS(parse_lexicon("not json"), DataError);
}

TEST_CASE("featurize: single sentence and zero-hit documents") {
  TopicLexicon lex;
  lex.topics = {{"construction", {"construction"}}, {"labor", {"jobs"}}};
  lex.sentiment = {{"strong", 1.0}};
  const std::vector<Date> cal{parse_iso_date("2021-01-01")};
  TextCorpus one{{{parse_iso_date("2021-01-10"), "s", "construction is strong"}}};
  auto f = featurize_text(one, lex, cal);
  CHECK(f.scores(0, 0) == 1.0);
  CHECK(f.covered(0, 0));
  CHECK(f.scores(0, 1) == 0.0);
  CHECK_FALSE(f.covered(0, 1));

  TextCorpus none{{{parse_iso_date("2021-01-10"), "s", "Nothing to see here."}}};
  auto g = featurize_text(none, lex, cal);
  CHECK(g.scores(0, 0) == 0.0);
  CHECK(g.scores(0, 1) == 0.0);
  CHECK_FALSE(g.covered(0, 0));
  CHECK_FALSE(g.covered(0, 1));

  CHECK(error_of([&] { featurize_text(TextCorpus{}, lex, cal); }) == "empty corpus");
}

TEST_CASE("featurize: fixture corpus against a per-sentence loop oracle") {
  const auto lex = parse_lexicon(fixture_lexicon_json());
  const auto cal = monthly_calendar(parse_iso_date("2021-01-01"), parse_iso_date("2021-07-01"));
  const auto frame = featurize_text(fixture_corpus(), lex, cal);

  const std::size_t k = lex.topics.size();
  std::map<std::pair<int, std::size_t>, std::vector<double>> cells;
  std::vector<std::size_t> counts(k, 0);
  for (const auto& doc : fixture_docs()) {
    const int month = months_between(cal.front(), parse_iso_date(doc.date));
    for (const auto& sentence : doc.sentences) {
      std::vector<int> hits(k, 0);
      double total = 0.0;
      int matched = 0;
      for (const auto& w : oracle_words(sentence)) {
        for (std::size_t i = 0; i < k; ++i)
          if (std::find(lex.topics[i].keywords.begin(), lex.topics[i].keywords.end(), w) != lex.topics[i].keywords.end())
            ++hits[i];
        if (lex.sentiment.count(w)) {
          total += lex.sentiment.at(w);
          ++matched;
        }
      }
      std::size_t best = 0;
      for (std::size_t i = 1; i < k; ++i)
        if (hits[i] > hits[best]) best = i;
      if (hits[best] == 0) continue;
      cells[{month, best}].push_back(matched ? total / matched : 0.0);
      ++counts[best];
    }
  }
  for (std::size_t t = 0; t < cal.size(); ++t) {
    for (std::size_t i = 0; i < k; ++i) {
      auto it = cells.find({static_cast<int>(t), i});
      if (it == cells.end()) {
        CHECK(frame.scores(t, i) == 0.0);
        CHECK_FALSE(frame.covered(t, i));
      } else {
        double s = 0.0;
        for (double v : it->second) s += v;
        CHECK(frame.scores(t, i) == s / static_cast<double>(it->second.size()));
        CHECK(frame.covered(t, i));
      }
    }
  }
  CHECK(frame.sentence_counts == counts);
  // April has no reports at all.
  for (std::size_t i = 0; i < k; ++i) CHECK_FALSE(frame.covered(3, i));
}

TEST_CASE("featurize: document order does not matter") {
  const auto lex = parse_lexicon(fixture_lexicon_json());
  const auto cal = monthly_calendar(parse_iso_date("2021-01-01"), parse_iso_date("2021-06-01"));
  const auto base = featurize_text(fixture_corpus(), lex, cal);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    auto corpus = fixture_corpus();
    std::shuffle(corpus.documents.begin(), corpus.documents.end(), rng);
    const auto f = featurize_text(corpus, lex, cal);
    CHECK(f.scores == base.scores);
    CHECK(f.coverage == base.coverage);
  }
}

TEST_CASE("frame csv round trip and corpus parsing") {
  const auto dir = std::filesystem::temp_directory_path() / "mat_data_frame";
  std::filesystem::create_directories(dir);
  write_fixture_files(dir / "corpus.jsonl", dir / "lexicon.json");
  const auto corpus = load_corpus_jsonl(dir / "corpus.jsonl");
  CHECK(corpus.documents.size() == 10);
  const auto frame = featurize_text(corpus, load_lexicon(dir / "lexicon.json"),
                                    monthly_calendar(parse_iso_date("2021-01-01"), parse_iso_date("2021-06-01")));
  write_frame_csv(frame, dir / "topics.csv", dir / "coverage.csv");
  const auto back = read_frame_csv(dir / "topics.csv", dir / "coverage.csv");
  CHECK(back.scores == frame.scores);
  CHECK(back.coverage == frame.coverage);
  CHECK(back.topics == frame.topics);

  std::istringstream bad(R"({"date":"2021-01-01","source":"x"})");
  CHECK_THROWS_AS(parse_corpus_jsonl(bad), DataError);
  std::istringstream bad_date(R"({"date":"yesterday","source":"x","text":"hi"})");
  CHECK(error_of([&] { parse_corpus_jsonl(bad_date); }).find("line 1") != std::string::npos);
}

TEST_CASE("windowing: counts and boundary cases") {
  CHECK(align_and_window(monthly_table(12, 2, 1), monthly_frame(12, 3, 2), "c1", 9, 9, 1).size() == 3);
  CHECK(align_and_window(monthly_table(10, 2, 1), monthly_frame(10, 3, 2), "c1", 9, 9, 3).empty());
  const auto err = error_of([] { align_and_window(monthly_table(8, 2, 1), monthly_frame(8, 3, 2), "c1", 9, 9, 1); });
  CHECK(err.find("usable range") != std::string::npos);
  CHECK_THROWS_AS(align_and_window(monthly_table(8, 2, 1), monthly_frame(8, 3, 2, 20), "c1", 3, 3, 1), DataError);
  CHECK_THROWS_AS(align_and_window(monthly_table(12, 2, 1), monthly_frame(12, 3, 2), "nope", 3, 3, 1), DataError);
}

TEST_CASE("windowing: unequal lookbacks against an enumeration oracle") {
  const auto ts = monthly_table(24, 3, 5);
  const auto txt = monthly_frame(24, 2, 6);
  const auto samples = align_and_window(ts, txt, "c0", 9, 6, 3);
  REQUIRE(samples.size() == 13);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const std::size_t anchor = 8 + i;
    CHECK(s.anchor == ts.timestamps[anchor]);
    CHECK(s.txt.length() == 6);
    CHECK(s.ts.length() == 9);
    CHECK(s.ts.feature_names == std::vector<std::string>{"c1", "c2", "c0"});
    for (std::size_t r = 0; r < 9; ++r) {
      const std::size_t src = anchor - 8 + r;
      CHECK(s.ts.values(r, 0) == ts.values(src, 1));
      CHECK(s.ts.values(r, 2) == ts.values(src, 0));
      CHECK(s.y_hist[r] == ts.values(src, 0));
      CHECK(s.ts.timestamps[r] <= s.anchor);
    }
    for (std::size_t r = 0; r < 6; ++r) {
      CHECK(s.txt.values(r, 1) == txt.scores(anchor - 5 + r, 1));
      CHECK(s.txt.timestamps[r] <= s.anchor);
    }
    CHECK(s.txt.timestamps.back() == s.anchor);
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(s.y_future[k] == ts.values(anchor + 1 + k, 0));
      CHECK(s.future_dates[k] > s.anchor);
    }
  }

  // Offset ranges align on the shared months.
  const auto shifted = align_and_window(ts, monthly_frame(24, 2, 6, 4), "c0", 3, 3, 1);
  CHECK(shifted.size() == 20 - 3 - 1 + 1);
  CHECK(shifted.front().anchor == add_months(ts.timestamps.front(), 6));
}

TEST_CASE("split: sizes and chronological ordering") {
  auto make = [](std::size_t n) { return align_and_window(monthly_table(n + 2, 1, 1), monthly_frame(n + 2, 1, 1), "c0", 2, 2, 1); };
  auto s20 = split_dataset(make(20));
  CHECK(s20.train.size() == 14);
  CHECK(s20.val.size() == 3);
  CHECK(s20.test.size() == 3);
  auto s3 = split_dataset(make(3));
  CHECK(s3.train.size() == 1);
  CHECK(s3.val.size() == 1);
  CHECK(s3.test.size() == 1);
  CHECK_THROWS_AS(split_dataset(make(2)), DataError);

  std::mt19937_64 rng(9);
  std::uniform_int_distribution<std::size_t> size(3, 120);
  for (int trial = 0; trial < 30; ++trial) {
    const auto n = size(rng);
    auto sp = split_dataset(make(n));
    CHECK(sp.train.size() + sp.val.size() + sp.test.size() == n);
    CHECK(sp.train.back().anchor < sp.val.front().anchor);
    CHECK(sp.val.back().anchor < sp.test.front().anchor);
  }
}

TEST_CASE("normalizer: floor path, zero mean, inverse, train-only statistics") {
  auto ts = monthly_table(40, 3, 7);
  for (std::size_t t = 0; t < 40; ++t) ts.values(t, 1) = 4.0;
  const auto samples = align_and_window(ts, monthly_frame(40, 2, 8), "c0", 6, 4, 2);
  const auto split = split_dataset(samples);
  const auto stats = fit_normalizer(split.train);
  const auto norm = apply_normalizer(split.train, stats);

  std::map<Date, std::vector<double>> rows;
  for (const auto& s : norm)
    for (std::size_t r = 0; r < s.ts.length(); ++r) {
      rows[s.ts.timestamps[r]] = {s.ts.values(r, 0), s.ts.values(r, 1), s.ts.values(r, 2)};
      CHECK(s.ts.values(r, 0) == 0.0);  // the constant column after reordering
      CHECK(s.y_hist[r] == s.ts.values(r, 2));
    }
  for (std::size_t j = 0; j < 3; ++j) {
    double m = 0.0;
    for (const auto& [d, row] : rows) m += row[j];
    CHECK(std::abs(m / static_cast<double>(rows.size())) < 1e-6);
  }
  for (std::size_t i = 0; i < norm.size(); ++i)
    for (std::size_t k = 0; k < 2; ++k)
      CHECK(std::abs(stats.denormalise_target(norm[i].y_future[k]) - split.train[i].y_future[k]) < 1e-6);

  auto mutated = samples;
  for (std::size_t i = split.train.size(); i < mutated.size(); ++i)
    for (auto& v : mutated[i].ts.values.values) v = 1e6;
  const auto again = fit_normalizer(split_dataset(mutated).train);
  CHECK(again.ts_mean == stats.ts_mean);
  CHECK(again.txt_scale == stats.txt_scale);
}

TEST_CASE("synthetic: exact lag, pure noise, determinism, spec checks") {
  SyntheticSpec spec;
  spec.months = 60;
  spec.ts_features = 2;
  spec.topics = 2;
  spec.noise = 0.0;
  spec.ts_couplings = {{0, 1.0, 1}};
  auto data = generate_synthetic(spec, 1);
  CHECK(data.ts.names == std::vector<std::string>{"x0", "x1", "y"});
  for (std::size_t t = 1; t < 60; ++t) CHECK(data.ts.values(t, 2) == data.ts.values(t - 1, 0));

  SyntheticSpec noise;
  noise.months = 4000;
  noise.noise = 0.5;
  noise.ts_couplings = {{3, 0.0, 2}};
  auto pure = generate_synthetic(noise, 2);
  double m = 0.0, v = 0.0;
  for (std::size_t t = 0; t < 4000; ++t) m += pure.ts.values(t, 10);
  m /= 4000;
  for (std::size_t t = 0; t < 4000; ++t) v += (pure.ts.values(t, 10) - m) * (pure.ts.values(t, 10) - m);
  CHECK(v / 4000 == doctest::Approx(0.25).epsilon(0.08));
  for (double s : pure.txt.scores.values) CHECK(std::abs(s) <= 1.0);

  auto a = generate_synthetic(noise, 9), b = generate_synthetic(noise, 9);
  CHECK(a.ts.values == b.ts.values);
  CHECK(a.txt.scores == b.txt.scores);
  CHECK(a.description() == b.description());
  CHECK(generate_synthetic(noise, 10).ts.values != a.ts.values);

  auto bad = spec;
  bad.topic_couplings = {{5, 1.0, 0}};
  CHECK_THROWS_AS(generate_synthetic(bad, 1), ConfigError);
  bad = spec;
  bad.noise = -1;
  CHECK_THROWS_AS(generate_synthetic(bad, 1), ConfigError);
}
