#include <algorithm>
#include <random>

#include "doctest.h"
#include "sqlctx/error.hpp"
#include "sqlctx/judge.hpp"
#include "sqlctx/metrics.hpp"

using namespace sqlctx;
using L = RowLabel;

namespace {

const ResultSet kKazanGold{{"name", "country", "sources"},
                           {{Value("Kazan International Airport"), Value("Russia"), Value(7)}},
                           true};
const ResultSet kChengduGold{{"name", "country", "sources"},
                             {{Value("Chengdu Shuangliu International Airport"), Value("China"), Value(40)}},
                             true};

std::vector<L> judge(std::string_view prediction, const ResultSet& gold) {
  DeterministicJudge j;
  return judge_rows("q", prediction, gold, j);
}

std::map<std::size_t, double> lengths(std::vector<double> scores) {
  std::map<std::size_t, double> m;
  std::size_t k = 4000;
  for (double s : scores) {
    m[k] = s;
    k *= 2;
  }
  return m;
}

}  // namespace

TEST_CASE("judge labels the three qualitative examples") {
  CHECK(judge("Kazan International Airport, Russia; 7 distinct source airports.", kKazanGold) ==
        std::vector<L>{L::ExactMatch});
  CHECK(judge("Kazan International Airport, Russia; 6 distinct source airports.", kKazanGold) ==
        std::vector<L>{L::PartialMatch});
  CHECK(judge("After analyzing the sentences, ... **Kazan International Airport** in **Russia**, with flights "
              "arriving from 10 distinct source airports.",
              kChengduGold) == std::vector<L>{L::NoMatch});
}

TEST_CASE("empty gold and no-answer") {
  ResultSet empty{{"x"}, {}, false};
  CHECK(judge("No answer.", empty) == std::vector<L>{L::ExactMatch});
  CHECK(judge("no ANSWER", empty) == std::vector<L>{L::ExactMatch});
  CHECK(judge("Kazan", empty) == std::vector<L>{L::NoMatch});
  CHECK(judge("No answer.", kKazanGold) == std::vector<L>{L::NoMatch});
  CHECK(score_instance(judge("No answer.", empty)) == 100.0);
}

TEST_CASE("cell matching details") {
  ResultSet numbers{{"a"}, {{Value(1234567)}, {Value(44.833333)}, {Value(-3)}, {Value(0.5)}}, false};
  CHECK(judge("1,234,567 then 44.83 and -3 and 0.5", numbers) ==
        std::vector<L>{L::ExactMatch, L::ExactMatch, L::ExactMatch, L::ExactMatch});
  CHECK(judge("1234567 and 44.8 and 3 and .7", numbers) ==
        std::vector<L>{L::ExactMatch, L::ExactMatch, L::NoMatch, L::NoMatch});
  CHECK(judge("45", ResultSet{{"a"}, {{Value(44.833333)}}, false}) == std::vector<L>{L::NoMatch});

  ResultSet words{{"a"}, {{Value("Air France")}, {Value("France")}, {Value("St. Louis")}}, false};
  CHECK(judge("air-france flies to st louis", words) ==
        std::vector<L>{L::ExactMatch, L::ExactMatch, L::ExactMatch});
  CHECK(judge("Frances", ResultSet{{"a"}, {{Value("France")}}, false}) == std::vector<L>{L::NoMatch});

  ResultSet dup{{"a"}, {{Value("x")}, {Value("x")}}, false};
  CHECK(judge("x", dup) == std::vector<L>{L::ExactMatch, L::ExactMatch});

  ResultSet with_null{{"a", "b"}, {{Value("Kazan"), Value()}}, false};
  CHECK(judge("Kazan", with_null) == std::vector<L>{L::ExactMatch});
  ResultSet all_null{{"a"}, {{Value()}}, false};
  CHECK(judge("None", all_null) == std::vector<L>{L::ExactMatch});
  CHECK(judge("Kazan", all_null) == std::vector<L>{L::NoMatch});
}

TEST_CASE("deterministic judge is pure") {
  DeterministicJudge j;
  for (int i = 0; i < 3; ++i) {
    CHECK(j.label_rows("q", "Kazan, Russia, 6", kKazanGold) == std::vector<L>{L::PartialMatch});
  }
}

TEST_CASE("number extraction") {
  auto n = extract_numbers("1,234.5 apples, 7,8 and -2 but x-3 and 12,34");
  std::vector<double> values;
  for (const auto& w : n) values.push_back(w.value);
  CHECK(values == std::vector<double>{1234.5, 7, 8, -2, 3, 12, 34});
  CHECK(n[0].decimals == 1);
}

TEST_CASE("score_instance") {
  CHECK(score_instance({L::ExactMatch, L::ExactMatch, L::PartialMatch, L::NoMatch}) == 62.5);
  CHECK(score_instance({L::ExactMatch, L::ExactMatch}) == 100.0);
  CHECK(score_instance({L::PartialMatch}) == 50.0);
  CHECK(score_instance({L::NoMatch}) == 0.0);
  try {
    score_instance({});
    FAIL("expected EmptyLabels");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyLabels);
  }
  std::vector<L> labels{L::ExactMatch, L::NoMatch, L::PartialMatch, L::PartialMatch, L::ExactMatch};
  double s = score_instance(labels);
  std::sort(labels.begin(), labels.end());
  do {
    CHECK(score_instance(labels) == s);
  } while (std::next_permutation(labels.begin(), labels.end()));
}

TEST_CASE("labels parse and print") {
  for (auto l : {L::ExactMatch, L::PartialMatch, L::NoMatch}) CHECK(parse_label(to_string(l)) == l);
  CHECK(parse_label("ExactMatch") == L::ExactMatch);
  CHECK(parse_label("[Partial Match]") == L::PartialMatch);
  CHECK_FALSE(parse_label("maybe"));
}

TEST_CASE("aggregate reproduces the reference rows") {
  AggregateScores llama = aggregate(lengths({64.0, 61.0, 57.5, 55.1, 44.8}));
  CHECK(std::abs(llama.avg - 56.5) <= 0.05);
  CHECK(std::abs(llama.wavg_inc - 53.5) <= 0.05);
  CHECK(std::abs(llama.wavg_dec - 59.4) <= 0.05);
  CHECK(format_score(llama.avg) == "56.5");

  AggregateScores gpt = aggregate(lengths({62.5, 52.2, 53.6, 59.4, 52.0}));
  CHECK(std::abs(gpt.avg - 55.9) <= 0.05);
  CHECK(std::abs(gpt.wavg_inc - 55.0) <= 0.05);
  CHECK(std::abs(gpt.wavg_dec - 56.8) <= 0.1);

  // the density halves of the same rows
  AggregateScores llama_d = aggregate(lengths({64.0, 59.4, 55.1, 41.4, 30.2}));
  CHECK(format_score(llama_d.avg) == "50.0");
  CHECK(format_score(llama_d.wavg_inc) == "44.3");
  CHECK(format_score(llama_d.wavg_dec) == "55.7");
  AggregateScores gpt_d = aggregate(lengths({62.5, 57.5, 45.3, 43.3, 37.5}));
  CHECK(format_score(gpt_d.avg) == "49.2");
  CHECK(format_score(gpt_d.wavg_inc) == "44.9");  // reference value 45.0, within rounding slack
  CHECK(std::abs(gpt_d.wavg_inc - 45.0) <= 0.1);
  CHECK(format_score(gpt_d.wavg_dec) == "53.5");

  AggregateScores single = aggregate({{4000, 50.0}});
  CHECK(single.avg == 50.0);
  CHECK(single.wavg_inc == 50.0);
  CHECK(single.wavg_dec == 50.0);
}

TEST_CASE("aggregate properties") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> dist(0.0, 100.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s(1 + rng() % 7);
    for (auto& x : s) x = dist(rng);
    AggregateScores a = aggregate(lengths(s));
    std::vector<double> rev(s.rbegin(), s.rend());
    AggregateScores b = aggregate(lengths(rev));
    CHECK(b.wavg_inc == doctest::Approx(a.wavg_dec));
    CHECK(b.avg == doctest::Approx(a.avg));
    std::vector<double> flat(s.size(), s[0]);
    AggregateScores f = aggregate(lengths(flat));
    CHECK(f.avg == doctest::Approx(s[0]));
    CHECK(f.wavg_inc == doctest::Approx(s[0]));
    CHECK(f.wavg_dec == doctest::Approx(s[0]));
  }
}

TEST_CASE("report rendering") {
  std::vector<ScoredInstance> scored{
      {"a", 4000, {"Aggregation"}, "Easy", "uniform", 100.0},
      {"b", 4000, {"Join", "Aggregation"}, "Hard", "uniform", 50.0},
      {"c", 8000, {"Join"}, "Hard", "end", 0.0},
  };
  EvalReport r = build_report(scored, "deterministic");
  REQUIRE(r.lengths == std::vector<std::size_t>{4000, 8000});
  REQUIRE(r.rows[0].key == "all");
  CHECK(r.rows[0].scores.per_length.at(4000) == 75.0);
  CHECK(r.rows[0].scores.avg == 37.5);
  std::string tsv = render_tsv(r);
  CHECK(tsv.find("group\tkey\tn\t4000\t8000\tAvg\twAvg(inc)\twAvg(dec)\n") == 0);
  CHECK(tsv.find("overall\tall\t3\t75.0\t0.0\t37.5\t25.0\t50.0\n") != std::string::npos);
  CHECK(tsv.find("position\tend\t1\t-\t0.0\t0.0\t0.0\t0.0\n") != std::string::npos);
  std::string text = render_text(r);
  CHECK(text.find("approximation") != std::string::npos);
  CHECK(text.find("overall") != std::string::npos);
}
