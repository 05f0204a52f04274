#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sqlctx/executor.hpp"

namespace sqlctx {

enum class RowLabel { ExactMatch, PartialMatch, NoMatch };

/// 100, 50 or 0.
int label_score(RowLabel label);
/// "Exact Match", "Partial Match", "No Match".
std::string_view to_string(RowLabel label);
/// Accepts the display names and the compact forms (ExactMatch, exact).
std::optional<RowLabel> parse_label(std::string_view text);

/// Answer text used when a model declines to answer.
inline constexpr std::string_view kNoAnswer = "No answer.";

/// Case-insensitive "no answer" anywhere in the text.
bool signals_no_answer(std::string_view prediction);

/// Labels gold rows against a prediction. Implementations only see non-empty golds.
class Judge {
 public:
  virtual ~Judge() = default;
  virtual std::string kind() const = 0;
  virtual std::vector<RowLabel> label_rows(std::string_view question, std::string_view prediction,
                                           const ResultSet& gold) = 0;
};

/// Dependency-free judge: a gold row is ExactMatch if every non-Null cell is
/// found in the prediction, PartialMatch if some are, NoMatch otherwise. Text
/// cells match as case-folded, punctuation-stripped word sequences; numeric
/// cells match numbers written in the prediction (thousands separators allowed)
/// within a relative tolerance of 1e-6, or, for Real cells, when the written
/// number is the cell rounded to the digits shown.
class DeterministicJudge : public Judge {
 public:
  std::string kind() const override { return "deterministic"; }
  std::vector<RowLabel> label_rows(std::string_view question, std::string_view prediction,
                                   const ResultSet& gold) override;
  static RowLabel label_row(std::string_view prediction, const Row& row);
};

/// One label per gold row; an empty gold yields one label, ExactMatch iff the
/// prediction signals no answer. Throws JudgeOutputMalformed if the judge
/// returns the wrong number of labels.
std::vector<RowLabel> judge_rows(std::string_view question, std::string_view prediction, const ResultSet& gold,
                                 Judge& judge);

/// Mean label score in percent. Throws EmptyLabels.
double score_instance(const std::vector<RowLabel>& labels);

/// Lower-case ASCII letters and digits with single spaces; other ASCII is a
/// separator, non-ASCII bytes are kept.
std::string normalize_text(std::string_view text);

struct WrittenNumber {
  double value = 0.0;
  int decimals = 0;
};
std::vector<WrittenNumber> extract_numbers(std::string_view text);

}  // namespace sqlctx
