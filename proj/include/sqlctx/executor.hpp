#pragma once

#include <string>
#include <vector>

#include "sqlctx/database.hpp"
#include "sqlctx/sql_ast.hpp"

namespace sqlctx {

struct ResultSet {
  std::vector<std::string> columns;
  std::vector<Row> rows;
  /// True iff the top-level query has ORDER BY.
  bool ordered = false;

  friend bool operator==(const ResultSet&, const ResultSet&) = default;
};

/// Evaluates a query over an in-memory database.
///
/// Semantics: bag semantics for SELECT/JOIN/WHERE; comparisons involving Null
/// are false; Integer is promoted to Real when mixed; LIKE is case-insensitive;
/// ORDER BY is stable over ingest order; set operations deduplicate. A bare
/// column next to exactly one MIN/MAX aggregate takes its value from the row
/// holding the extreme, otherwise from the first row of the group.
ResultSet execute(const QueryAst& query, const Database& db);

/// Compares two results; row order matters only when both are ordered.
/// Numeric cells match within `rel_tol` (Integer and Real are interchangeable).
bool results_match(const ResultSet& a, const ResultSet& b, double rel_tol = 1e-9);

/// Header line plus one CSV record per row; Null renders as an empty field.
std::string serialize_result(const ResultSet& result);

/// SQL LIKE with % and _ wildcards, ASCII case-insensitive.
bool like_match(std::string_view text, std::string_view pattern);

}  // namespace sqlctx
