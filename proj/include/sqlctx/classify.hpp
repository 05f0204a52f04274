#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "sqlctx/sql_ast.hpp"

namespace sqlctx {

enum class QueryType { Aggregation, MaxMin, Join, Comparison, Ranking };
enum class Difficulty { Easy, Medium, Hard };

std::string_view to_string(QueryType type);
std::string_view to_string(Difficulty difficulty);
std::optional<QueryType> parse_query_type(std::string_view name);
std::optional<Difficulty> parse_difficulty(std::string_view name);

/// Comparison fires on WHERE predicates only: <, <=, >, >= against a constant
/// or a subquery, BETWEEN against constants, and =, <>, IN against numeric
/// constants. Text equality (`County = 'Sonoma'`) is a lookup, not a comparison.
std::set<QueryType> classify_types(const QueryAst& ast);

/// Counts behind a difficulty label, exposed for reports and debugging.
struct ComplexityProfile {
  std::set<std::string> component1_keywords;  // distinct kinds among WHERE, GROUP BY, ...
  std::set<std::string> component2_keywords;  // EXCEPT, UNION, INTERSECT, NESTED
  int aggregates = 0;
  int select_columns = 0;
  int where_conditions = 0;
  int joins = 0;
  int group_by_columns = 0;

  int other_factors() const;
};

ComplexityProfile complexity_profile(const QueryAst& ast);
Difficulty classify_difficulty(const QueryAst& ast);

/// Lower-cased names of every table in FROM/JOIN clauses, subqueries included.
std::set<std::string> referenced_tables(const QueryAst& ast);

struct QuerySpec {
  std::string id;
  std::string database;
  std::string question;
  std::string sql;
  QueryAst ast;
  std::set<QueryType> types;
  Difficulty difficulty = Difficulty::Easy;
};

/// Parses and labels one question. Throws on SQL errors.
QuerySpec make_query_spec(std::string id, std::string database, std::string question,
                          std::string sql);

struct SuiteRecord {
  std::string id;
  std::string database;
  std::string question;
  std::string sql;
  std::vector<std::string> types;  // as annotated in the file, possibly empty
  std::string difficulty;
};

/// Line-delimited JSON question suite.
std::vector<SuiteRecord> read_suite(const std::filesystem::path& path);
void write_suite(const std::vector<SuiteRecord>& records, const std::filesystem::path& path);

}  // namespace sqlctx
