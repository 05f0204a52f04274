#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace sqlctx {

/// Avg and rank-weighted averages over context lengths. With lengths sorted
/// ascending and weights w_i = i, wavg_inc = sum(i * s_i) / sum(i); wavg_dec
/// uses the reversed weights.
struct AggregateScores {
  std::map<std::size_t, double> per_length;
  double avg = 0.0;
  double wavg_inc = 0.0;
  double wavg_dec = 0.0;
};

/// Throws InvalidConfig on an empty map.
AggregateScores aggregate(const std::map<std::size_t, double>& per_length);

struct ScoredInstance {
  std::string instance_id;
  std::size_t context_tokens = 0;
  std::vector<std::string> types;
  std::string difficulty;
  std::string position;
  double accuracy = 0.0;
};

struct ReportRow {
  std::string group;  // overall, type, difficulty, position
  std::string key;
  std::size_t instances = 0;
  AggregateScores scores;
};

struct EvalReport {
  std::vector<std::size_t> lengths;  // ascending, union over all instances
  std::vector<ReportRow> rows;
  std::string judge_kind;
};

/// Per-length means of instance accuracies, for the whole set and for each
/// query type, difficulty and position.
EvalReport build_report(const std::vector<ScoredInstance>& scored, const std::string& judge_kind = "");

/// One decimal place.
std::string format_score(double value);

std::string render_text(const EvalReport& report);
std::string render_tsv(const EvalReport& report);

}  // namespace sqlctx
