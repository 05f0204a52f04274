#include "sqlctx/classify.hpp"

#include <fstream>
#include <functional>

#include <nlohmann/json.hpp>

#include "sqlctx/database.hpp"
#include "sqlctx/error.hpp"
#include "sqlctx/sql_parser.hpp"

namespace sqlctx {

using json = nlohmann::json;

std::string_view to_string(QueryType type) {
  switch (type) {
    case QueryType::Aggregation: return "Aggregation";
    case QueryType::MaxMin: return "MaxMin";
    case QueryType::Join: return "Join";
    case QueryType::Comparison: return "Comparison";
    case QueryType::Ranking: return "Ranking";
  }
  return "?";
}

std::string_view to_string(Difficulty difficulty) {
  switch (difficulty) {
    case Difficulty::Easy: return "Easy";
    case Difficulty::Medium: return "Medium";
    case Difficulty::Hard: return "Hard";
  }
  return "?";
}

std::optional<QueryType> parse_query_type(std::string_view name) {
  for (auto t : {QueryType::Aggregation, QueryType::MaxMin, QueryType::Join, QueryType::Comparison,
                 QueryType::Ranking}) {
    if (iequals(name, to_string(t))) return t;
  }
  if (iequals(name, "Max/Min")) return QueryType::MaxMin;
  return std::nullopt;
}

std::optional<Difficulty> parse_difficulty(std::string_view name) {
  for (auto d : {Difficulty::Easy, Difficulty::Medium, Difficulty::Hard}) {
    if (iequals(name, to_string(d))) return d;
  }
  return std::nullopt;
}

namespace {

using SelectVisitor = std::function<void(const Select&)>;

void visit_expr_subqueries(const Expr& e, const SelectVisitor& fn);

void visit_selects(const Query& q, const SelectVisitor& fn) {
  if (q.is_set_operation()) {
    visit_selects(*q.left, fn);
    visit_selects(*q.right, fn);
    return;
  }
  const Select& s = q.select;
  fn(s);
  auto sub = [&](const Expr& e) { visit_expr_subqueries(e, fn); };
  for (const auto& item : s.items) sub(item.expr);
  for (const auto& j : s.joins) {
    if (j.on) sub(*j.on);
  }
  if (s.where) sub(*s.where);
  for (const auto& g : s.group_by) sub(g);
  if (s.having) sub(*s.having);
  for (const auto& k : s.order_by) sub(k.expr);
}

void visit_expr_subqueries(const Expr& e, const SelectVisitor& fn) {
  for (const auto& a : e.args) visit_expr_subqueries(a, fn);
  if (e.subquery) visit_selects(*e.subquery, fn);
}

/// Walks an expression without descending into subqueries.
void visit_local(const Expr& e, const std::function<void(const Expr&)>& fn) {
  fn(e);
  for (const auto& a : e.args) visit_local(a, fn);
}

bool has_column_or_subquery(const Expr& e) {
  bool found = false;
  visit_local(e, [&](const Expr& x) {
    if (x.kind == ExprKind::Column || x.subquery) found = true;
  });
  return found;
}

bool is_constant(const Expr& e) { return !has_column_or_subquery(e) && e.kind != ExprKind::Star; }

bool has_text_literal(const Expr& e) {
  bool found = false;
  visit_local(e, [&](const Expr& x) {
    if (x.kind == ExprKind::Literal && x.literal.kind() == Kind::Text) found = true;
  });
  return found;
}

bool is_numeric_constant(const Expr& e) { return is_constant(e) && !has_text_literal(e); }

// Ordering tests against constants or subqueries always count; equality tests only count
// against numbers, since `County = 'Sonoma'` is a lookup rather than a comparison.
bool compares_against_values(const Expr& e) {
  switch (e.kind) {
    case ExprKind::Binary: {
      if (!is_comparison(e.binary)) return false;
      bool ordering = e.binary != BinaryOp::Eq && e.binary != BinaryOp::Ne;
      auto counts = [&](const Expr& side) {
        if (ordering) return is_constant(side) || side.kind == ExprKind::Subquery;
        return is_numeric_constant(side);
      };
      return counts(e.args[0]) || counts(e.args[1]);
    }
    case ExprKind::Quantified:
      return e.binary != BinaryOp::Eq && e.binary != BinaryOp::Ne;
    case ExprKind::Between:
      return is_constant(e.args[1]) && is_constant(e.args[2]);
    case ExprKind::InList: {
      for (std::size_t i = 1; i < e.args.size(); ++i) {
        if (!is_numeric_constant(e.args[i])) return false;
      }
      return true;
    }
    default: return false;
  }
}

template <class Pred>
bool any_select_expr(const QueryAst& ast, Pred pred) {
  bool found = false;
  visit_selects(ast, [&](const Select& s) {
    auto check = [&](const Expr& e) {
      visit_local(e, [&](const Expr& x) {
        if (pred(x)) found = true;
      });
    };
    for (const auto& item : s.items) check(item.expr);
    if (s.where) check(*s.where);
    if (s.having) check(*s.having);
    for (const auto& k : s.order_by) check(k.expr);
    for (const auto& g : s.group_by) check(g);
  });
  return found;
}

int count_aggregates(const Select& s) {
  int n = 0;
  auto count = [&](const Expr& e) {
    visit_local(e, [&](const Expr& x) {
      if (x.kind == ExprKind::Aggregate) ++n;
    });
  };
  for (const auto& item : s.items) count(item.expr);
  if (s.having) count(*s.having);
  for (const auto& k : s.order_by) count(k.expr);
  return n;
}

/// Leaf predicates after flattening AND / OR / NOT.
int count_conditions(const Expr& e) {
  if (e.kind == ExprKind::Binary && (e.binary == BinaryOp::And || e.binary == BinaryOp::Or)) {
    return count_conditions(e.args[0]) + count_conditions(e.args[1]);
  }
  if (e.kind == ExprKind::Unary && e.unary == UnaryOp::Not) return count_conditions(e.args[0]);
  return 1;
}

void top_level_selects(const Query& q, std::vector<const Select*>& out) {
  if (q.is_set_operation()) {
    top_level_selects(*q.left, out);
    top_level_selects(*q.right, out);
  } else {
    out.push_back(&q.select);
  }
}

}  // namespace

std::set<QueryType> classify_types(const QueryAst& ast) {
  std::set<QueryType> types;
  auto is_agg = [](AggregateFn fn) {
    return fn == AggregateFn::Count || fn == AggregateFn::Sum || fn == AggregateFn::Avg;
  };
  if (any_select_expr(ast, [&](const Expr& x) { return x.kind == ExprKind::Aggregate && is_agg(x.aggregate); })) {
    types.insert(QueryType::Aggregation);
  }
  if (any_select_expr(ast, [&](const Expr& x) { return x.kind == ExprKind::Aggregate && !is_agg(x.aggregate); })) {
    types.insert(QueryType::MaxMin);
  }
  bool join = false, comparison = false, ranking = false;
  visit_selects(ast, [&](const Select& s) {
    if (!s.joins.empty()) join = true;
    if (!s.order_by.empty() && s.limit) ranking = true;
    if (s.where) {
      visit_local(*s.where, [&](const Expr& x) {
        if (compares_against_values(x)) comparison = true;
      });
    }
  });
  if (join) types.insert(QueryType::Join);
  if (comparison) types.insert(QueryType::Comparison);
  if (ranking) types.insert(QueryType::Ranking);
  return types;
}

int ComplexityProfile::other_factors() const {
  return (aggregates > 1) + (select_columns > 2) + (where_conditions > 1) + (joins > 1) +
         (group_by_columns > 1);
}

ComplexityProfile complexity_profile(const QueryAst& ast) {
  ComplexityProfile p;
  if (ast.is_set_operation()) {
    std::function<void(const Query&)> ops = [&](const Query& q) {
      if (!q.is_set_operation()) return;
      p.component2_keywords.insert(*q.set_op == SetOp::Union ? "UNION"
                                   : *q.set_op == SetOp::Except ? "EXCEPT"
                                                                : "INTERSECT");
      ops(*q.left);
      ops(*q.right);
    };
    ops(ast);
  }
  visit_selects(ast, [&](const Select& s) {
    if (s.where) p.component1_keywords.insert("WHERE");
    if (!s.group_by.empty()) p.component1_keywords.insert("GROUP BY");
    if (!s.order_by.empty()) p.component1_keywords.insert("ORDER BY");
    if (!s.joins.empty()) p.component1_keywords.insert("JOIN");
    if (s.having) p.component1_keywords.insert("HAVING");
  });
  if (any_select_expr(ast, [](const Expr& x) { return x.kind == ExprKind::Binary && x.binary == BinaryOp::Or; })) {
    p.component1_keywords.insert("OR");
  }
  if (any_select_expr(ast, [](const Expr& x) { return x.kind == ExprKind::Like; })) {
    p.component1_keywords.insert("LIKE");
  }
  if (any_select_expr(ast, [](const Expr& x) { return x.kind == ExprKind::Between; })) {
    p.component1_keywords.insert("BETWEEN");
  }
  if (any_select_expr(ast, [](const Expr& x) { return static_cast<bool>(x.subquery); })) {
    p.component2_keywords.insert("NESTED");
  }
  // join ON predicates can hold subqueries too
  visit_selects(ast, [&](const Select& s) {
    for (const auto& j : s.joins) {
      if (!j.on) continue;
      visit_local(*j.on, [&](const Expr& x) {
        if (x.subquery) p.component2_keywords.insert("NESTED");
      });
    }
  });

  std::vector<const Select*> tops;
  top_level_selects(ast, tops);
  for (const Select* s : tops) {
    p.aggregates = std::max(p.aggregates, count_aggregates(*s));
    p.select_columns = std::max(p.select_columns, static_cast<int>(s->items.size()));
    p.where_conditions = std::max(p.where_conditions, s->where ? count_conditions(*s->where) : 0);
    p.joins = std::max(p.joins, static_cast<int>(s->joins.size()));
    p.group_by_columns = std::max(p.group_by_columns, static_cast<int>(s->group_by.size()));
  }
  return p;
}

Difficulty classify_difficulty(const QueryAst& ast) {
  ComplexityProfile p = complexity_profile(ast);
  auto c1 = p.component1_keywords.size();
  bool c2 = !p.component2_keywords.empty();
  int other = p.other_factors();
  if (c1 <= 1 && !c2 && other == 0) return Difficulty::Easy;
  if (c1 <= 2 && !c2 && other <= 1) return Difficulty::Medium;
  return Difficulty::Hard;
}

std::set<std::string> referenced_tables(const QueryAst& ast) {
  std::set<std::string> tables;
  visit_selects(ast, [&](const Select& s) {
    tables.insert(to_lower(s.from.table));
    for (const auto& j : s.joins) tables.insert(to_lower(j.table.table));
  });
  return tables;
}

QuerySpec make_query_spec(std::string id, std::string database, std::string question,
                          std::string sql) {
  QuerySpec spec;
  spec.ast = parse_sql(sql);
  spec.id = std::move(id);
  spec.database = std::move(database);
  spec.question = std::move(question);
  spec.sql = std::move(sql);
  spec.types = classify_types(spec.ast);
  spec.difficulty = classify_difficulty(spec.ast);
  return spec;
}

std::vector<SuiteRecord> read_suite(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open suite " + path.string());
  std::vector<SuiteRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = json::parse(line);
      SuiteRecord r;
      r.id = j.at("id").get<std::string>();
      r.database = j.at("database").get<std::string>();
      r.question = j.at("question").get<std::string>();
      r.sql = j.at("sql").get<std::string>();
      r.types = j.value("types", std::vector<std::string>{});
      r.difficulty = j.value("difficulty", std::string());
      records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ManifestMalformed,
                  path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

void write_suite(const std::vector<SuiteRecord>& records, const std::filesystem::path& path) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    for (const auto& r : records) {
      json j = {{"id", r.id}, {"database", r.database}, {"question", r.question}, {"sql", r.sql}};
      if (!r.types.empty()) j["types"] = r.types;
      if (!r.difficulty.empty()) j["difficulty"] = r.difficulty;
      out << j.dump() << '\n';
    }
    if (!out) throw Error(ErrorCode::Io, "failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace sqlctx
