#include "sqlctx/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "sqlctx/error.hpp"

namespace sqlctx {

AggregateScores aggregate(const std::map<std::size_t, double>& per_length) {
  if (per_length.empty()) throw Error(ErrorCode::InvalidConfig, "aggregate needs at least one context length");
  AggregateScores a;
  a.per_length = per_length;
  const std::size_t n = per_length.size();
  double sum = 0, inc = 0, dec = 0, weights = 0;
  std::size_t rank = 1;
  for (const auto& [length, score] : per_length) {
    sum += score;
    inc += static_cast<double>(rank) * score;
    dec += static_cast<double>(n + 1 - rank) * score;
    weights += static_cast<double>(rank);
    ++rank;
  }
  a.avg = sum / static_cast<double>(n);
  a.wavg_inc = inc / weights;
  a.wavg_dec = dec / weights;
  return a;
}

std::string format_score(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", value + (value >= 0 ? 1e-9 : -1e-9));
  return buf;
}

EvalReport build_report(const std::vector<ScoredInstance>& scored, const std::string& judge_kind) {
  EvalReport report;
  report.judge_kind = judge_kind;
  std::set<std::size_t> lengths;
  for (const auto& s : scored) lengths.insert(s.context_tokens);
  report.lengths.assign(lengths.begin(), lengths.end());

  auto make_row = [&](const std::string& group, const std::string& key, auto&& member) {
    std::map<std::size_t, std::pair<double, std::size_t>> sums;
    std::size_t count = 0;
    for (const auto& s : scored) {
      if (!member(s)) continue;
      auto& [total, n] = sums[s.context_tokens];
      total += s.accuracy;
      ++n;
      ++count;
    }
    if (count == 0) return;
    std::map<std::size_t, double> means;
    for (const auto& [length, tn] : sums) means[length] = tn.first / static_cast<double>(tn.second);
    report.rows.push_back({group, key, count, aggregate(means)});
  };

  if (scored.empty()) return report;
  make_row("overall", "all", [](const ScoredInstance&) { return true; });
  for (const char* type : {"Aggregation", "MaxMin", "Join", "Comparison", "Ranking"}) {
    make_row("type", type, [&](const ScoredInstance& s) {
      return std::find(s.types.begin(), s.types.end(), type) != s.types.end();
    });
  }
  for (const char* d : {"Easy", "Medium", "Hard"}) {
    make_row("difficulty", d, [&](const ScoredInstance& s) { return s.difficulty == d; });
  }
  for (const char* p : {"beginning", "middle", "end", "bimodal", "uniform"}) {
    make_row("position", p, [&](const ScoredInstance& s) { return s.position == p; });
  }
  return report;
}

namespace {

std::vector<std::vector<std::string>> cells(const EvalReport& report) {
  std::vector<std::vector<std::string>> table;
  std::vector<std::string> header{"group", "key", "n"};
  for (auto l : report.lengths) header.push_back(std::to_string(l));
  for (const char* h : {"Avg", "wAvg(inc)", "wAvg(dec)"}) header.emplace_back(h);
  table.push_back(header);
  for (const auto& row : report.rows) {
    std::vector<std::string> line{row.group, row.key, std::to_string(row.instances)};
    for (auto l : report.lengths) {
      auto it = row.scores.per_length.find(l);
      line.push_back(it == row.scores.per_length.end() ? "-" : format_score(it->second));
    }
    line.push_back(format_score(row.scores.avg));
    line.push_back(format_score(row.scores.wavg_inc));
    line.push_back(format_score(row.scores.wavg_dec));
    table.push_back(line);
  }
  return table;
}

}  // namespace

std::string render_text(const EvalReport& report) {
  auto table = cells(report);
  std::vector<std::size_t> width(table[0].size(), 0);
  for (const auto& line : table) {
    for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());
  }
  std::string out;
  if (!report.judge_kind.empty()) {
    out += "judge: " + report.judge_kind;
    if (report.judge_kind == "deterministic") out += " (rule-based approximation of the model judge)";
    out += '\n';
  }
  for (const auto& line : table) {
    std::string text;
    for (std::size_t c = 0; c < line.size(); ++c) {
      std::string pad(width[c] - line[c].size(), ' ');
      text += c < 2 ? line[c] + pad : pad + line[c];  // labels left, numbers right
      if (c + 1 < line.size()) text += "  ";
    }
    out += text + '\n';
  }
  return out;
}

std::string render_tsv(const EvalReport& report) {
  std::string out;
  for (const auto& line : cells(report)) {
    for (std::size_t c = 0; c < line.size(); ++c) {
      if (c) out += '\t';
      out += line[c];
    }
    out += '\n';
  }
  return out;
}

}  // namespace sqlctx
