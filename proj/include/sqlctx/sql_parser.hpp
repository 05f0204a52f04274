#pragma once

#include <string>
#include <string_view>

#include "sqlctx/sql_ast.hpp"

namespace sqlctx {

/// Parses the supported SELECT subset. Throws Error(SyntaxError) with the
/// byte offset and the expected tokens, or Error(UnsupportedConstruct) naming
/// the construct (CROSS APPLY, LEFT JOIN, CASE, window functions, DML, ...).
QueryAst parse_sql(std::string_view text);

/// Canonical SQL text; parse_sql(to_sql(q)) == q.
std::string to_sql(const QueryAst& query);
std::string to_sql(const Expr& expr);

}  // namespace sqlctx
