#include "sqlctx/judge.hpp"

#include <cctype>
#include <cmath>
#include <charconv>

#include "sqlctx/database.hpp"
#include "sqlctx/error.hpp"

namespace sqlctx {

int label_score(RowLabel label) {
  switch (label) {
    case RowLabel::ExactMatch: return 100;
    case RowLabel::PartialMatch: return 50;
    case RowLabel::NoMatch: return 0;
  }
  return 0;
}

std::string_view to_string(RowLabel label) {
  switch (label) {
    case RowLabel::ExactMatch: return "Exact Match";
    case RowLabel::PartialMatch: return "Partial Match";
    case RowLabel::NoMatch: return "No Match";
  }
  return "No Match";
}

std::optional<RowLabel> parse_label(std::string_view text) {
  std::string n = normalize_text(text);
  if (n == "exact match" || n == "exactmatch" || n == "exact") return RowLabel::ExactMatch;
  if (n == "partial match" || n == "partialmatch" || n == "partial") return RowLabel::PartialMatch;
  if (n == "no match" || n == "nomatch" || n == "no") return RowLabel::NoMatch;
  return std::nullopt;
}

bool signals_no_answer(std::string_view prediction) {
  return (" " + normalize_text(prediction) + " ").find(" no answer ") != std::string::npos;
}

std::string normalize_text(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (c >= 0x80 || std::isalnum(c)) {
      if (pending_space && !out.empty()) out += ' ';
      pending_space = false;
      out += c < 0x80 ? static_cast<char>(std::tolower(c)) : ch;
    } else {
      pending_space = true;
    }
  }
  return out;
}

std::vector<WrittenNumber> extract_numbers(std::string_view text) {
  std::vector<WrittenNumber> out;
  auto digit = [&](std::size_t i) { return i < text.size() && std::isdigit(static_cast<unsigned char>(text[i])); };
  std::size_t i = 0;
  while (i < text.size()) {
    if (!digit(i) || (i > 0 && digit(i - 1))) {
      ++i;
      continue;
    }
    std::size_t start = i;
    std::string digits;
    while (digit(i)) digits += text[i++];
    // thousands groups: ",ddd" not followed by another digit
    while (i < text.size() && text[i] == ',' && digit(i + 1) && digit(i + 2) && digit(i + 3) && !digit(i + 4)) {
      digits.append(text.substr(i + 1, 3));
      i += 4;
    }
    int decimals = 0;
    if (i + 1 < text.size() && text[i] == '.' && digit(i + 1)) {
      digits += '.';
      ++i;
      while (digit(i)) {
        digits += text[i++];
        ++decimals;
      }
    }
    bool negative = start > 0 && text[start - 1] == '-' &&
                    (start < 2 || !std::isalnum(static_cast<unsigned char>(text[start - 2])));
    double value = 0;
    std::from_chars(digits.data(), digits.data() + digits.size(), value);
    out.push_back({negative ? -value : value, decimals});
  }
  return out;
}

namespace {

bool number_matches(const Value& cell, const WrittenNumber& n) {
  double g = cell.as_number();
  double scale = std::max(std::abs(g), std::abs(n.value));
  if (std::abs(g - n.value) <= 1e-6 * scale) return true;
  if (cell.kind() == Kind::Real && n.decimals > 0) {
    return std::abs(g - n.value) <= 0.5 * std::pow(10.0, -n.decimals) + 1e-9 * scale;
  }
  return false;
}

}  // namespace

RowLabel DeterministicJudge::label_row(std::string_view prediction, const Row& row) {
  const std::string padded = " " + normalize_text(prediction) + " ";
  const auto numbers = extract_numbers(prediction);
  std::size_t checked = 0, found = 0;
  for (const auto& cell : row) {
    if (cell.is_null()) continue;
    ++checked;
    bool hit = false;
    if (cell.is_numeric()) {
      for (const auto& n : numbers) hit = hit || number_matches(cell, n);
    } else {
      std::string needle = normalize_text(cell.as_text());
      hit = needle.empty() || padded.find(" " + needle + " ") != std::string::npos;
    }
    found += hit;
  }
  if (checked == 0) {
    // a row of Nulls: the only faithful answer is an explicit absence
    std::string n = " " + normalize_text(prediction) + " ";
    bool absent = signals_no_answer(prediction) || n.find(" none ") != std::string::npos ||
                  n.find(" null ") != std::string::npos;
    return absent ? RowLabel::ExactMatch : RowLabel::NoMatch;
  }
  if (found == checked) return RowLabel::ExactMatch;
  return found ? RowLabel::PartialMatch : RowLabel::NoMatch;
}

std::vector<RowLabel> DeterministicJudge::label_rows(std::string_view, std::string_view prediction,
                                                     const ResultSet& gold) {
  std::vector<RowLabel> out;
  for (const auto& row : gold.rows) out.push_back(label_row(prediction, row));
  return out;
}

std::vector<RowLabel> judge_rows(std::string_view question, std::string_view prediction, const ResultSet& gold,
                                 Judge& judge) {
  if (gold.rows.empty()) {
    return {signals_no_answer(prediction) ? RowLabel::ExactMatch : RowLabel::NoMatch};
  }
  auto labels = judge.label_rows(question, prediction, gold);
  if (labels.size() != gold.rows.size()) {
    throw Error(ErrorCode::JudgeOutputMalformed, judge.kind() + " judge returned " + std::to_string(labels.size()) +
                                                     " labels for " + std::to_string(gold.rows.size()) +
                                                     " gold rows");
  }
  return labels;
}

double score_instance(const std::vector<RowLabel>& labels) {
  if (labels.empty()) throw Error(ErrorCode::EmptyLabels, "cannot score an instance without labels");
  double sum = 0;
  for (auto l : labels) sum += label_score(l);
  return sum / static_cast<double>(labels.size());
}

}  // namespace sqlctx
