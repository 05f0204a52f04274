#include "sqlctx/sql_parser.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <set>

#include "sqlctx/database.hpp"
#include "sqlctx/error.hpp"

namespace sqlctx {

bool is_comparison(BinaryOp op) {
  switch (op) {
    case BinaryOp::Eq:
    case BinaryOp::Ne:
    case BinaryOp::Lt:
    case BinaryOp::Le:
    case BinaryOp::Gt:
    case BinaryOp::Ge: return true;
    default: return false;
  }
}

namespace {

enum class Tok { Ident, Keyword, Integer, Real, String, Symbol, End };

struct Token {
  Tok type = Tok::End;
  std::string text;  // keywords upper-cased; identifiers verbatim
  std::size_t pos = 0;
};

const std::set<std::string>& reserved() {
  static const std::set<std::string> words = {
      "SELECT", "FROM",   "WHERE",  "GROUP",   "BY",     "HAVING", "ORDER",     "ASC",
      "DESC",   "LIMIT",  "JOIN",   "INNER",   "ON",     "AS",     "AND",       "OR",
      "NOT",    "BETWEEN", "LIKE",  "IN",      "IS",     "NULL",   "EXISTS",    "ANY",
      "ALL",    "SOME",   "DISTINCT", "UNION", "EXCEPT", "INTERSECT", "COUNT", "SUM",
      "AVG",    "MIN",    "MAX",
      // recognized only to be rejected
      "CROSS",  "LEFT",   "RIGHT",  "FULL",    "OUTER",  "NATURAL", "USING",    "WITH",
      "CASE",   "OVER",   "OFFSET", "INSERT",  "UPDATE", "DELETE", "CREATE",    "DROP",
      "ALTER",  "WINDOW", "CAST",   "VALUES",  "INTO",   "APPLY",  "LATERAL",   "PARTITION"};
  return words;
}

std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

[[noreturn]] void syntax_error(std::size_t pos, std::size_t size, const std::string& expected,
                               const std::string& found) {
  std::string where = pos >= size ? "end of input" : "offset " + std::to_string(pos);
  throw Error(ErrorCode::SyntaxError,
              "at " + where + ": expected " + expected + (found.empty() ? "" : ", found '" + found + "'"));
}

std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '-' && i + 1 < s.size() && s[i + 1] == '-') {
      while (i < s.size() && s[i] != '\n') ++i;
      continue;
    }
    std::size_t start = i;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_')) ++i;
      std::string word(s.substr(start, i - start));
      std::string up = upper(word);
      if (reserved().count(up)) {
        out.push_back({Tok::Keyword, up, start});
      } else {
        out.push_back({Tok::Ident, word, start});
      }
      continue;
    }
    if (c == '`' || c == '[') {
      char close = c == '`' ? '`' : ']';
      ++i;
      std::size_t begin = i;
      while (i < s.size() && s[i] != close) ++i;
      if (i >= s.size()) syntax_error(s.size(), s.size(), std::string(1, close), "");
      out.push_back({Tok::Ident, std::string(s.substr(begin, i - begin)), start});
      ++i;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
      bool real = false;
      while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
      if (i < s.size() && s[i] == '.') {
        real = true;
        ++i;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
      }
      if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
        std::size_t j = i + 1;
        if (j < s.size() && (s[j] == '+' || s[j] == '-')) ++j;
        if (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) {
          real = true;
          i = j;
          while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
        }
      }
      out.push_back({real ? Tok::Real : Tok::Integer, std::string(s.substr(start, i - start)), start});
      continue;
    }
    if (c == '\'' || c == '"') {
      char quote = c;
      ++i;
      std::string text;
      while (true) {
        if (i >= s.size()) syntax_error(s.size(), s.size(), std::string("closing ") + quote, "");
        if (s[i] == quote) {
          if (i + 1 < s.size() && s[i + 1] == quote) {
            text.push_back(quote);
            i += 2;
            continue;
          }
          ++i;
          break;
        }
        text.push_back(s[i++]);
      }
      out.push_back({Tok::String, text, start});
      continue;
    }
    static const std::array<std::string_view, 4> two = {"<=", ">=", "<>", "!="};
    bool matched = false;
    for (auto op : two) {
      if (s.substr(i, 2) == op) {
        out.push_back({Tok::Symbol, std::string(op), start});
        i += 2;
        matched = true;
        break;
      }
    }
    if (matched) continue;
    if (std::string_view("(),.*+-/=<>;").find(c) != std::string_view::npos) {
      out.push_back({Tok::Symbol, std::string(1, c), start});
      ++i;
      continue;
    }
    syntax_error(start, s.size(), "a token", std::string(1, c));
  }
  out.push_back({Tok::End, "", s.size()});
  return out;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : size_(text.size()), toks_(tokenize(text)) {}

  QueryAst parse_statement() {
    QueryAst q = parse_query();
    accept_symbol(";");
    if (peek().type != Tok::End) fail("end of statement");
    return q;
  }

 private:
  std::size_t size_;
  std::vector<Token> toks_;
  std::size_t at_ = 0;

  const Token& peek(std::size_t ahead = 0) const {
    return toks_[std::min(at_ + ahead, toks_.size() - 1)];
  }
  Token next() {
    Token t = peek();
    if (at_ < toks_.size() - 1) ++at_;
    return t;
  }
  bool is_keyword(std::string_view kw, std::size_t ahead = 0) const {
    return peek(ahead).type == Tok::Keyword && peek(ahead).text == kw;
  }
  bool is_symbol(std::string_view sym, std::size_t ahead = 0) const {
    return peek(ahead).type == Tok::Symbol && peek(ahead).text == sym;
  }
  bool accept_keyword(std::string_view kw) {
    if (!is_keyword(kw)) return false;
    next();
    return true;
  }
  bool accept_symbol(std::string_view sym) {
    if (!is_symbol(sym)) return false;
    next();
    return true;
  }
  [[noreturn]] void fail(const std::string& expected) const {
    syntax_error(peek().pos, size_, expected, peek().text);
  }
  void expect_keyword(std::string_view kw) {
    if (!accept_keyword(kw)) fail(std::string(kw));
  }
  void expect_symbol(std::string_view sym) {
    if (!accept_symbol(sym)) fail("'" + std::string(sym) + "'");
  }

  [[noreturn]] void unsupported(const std::string& what) const {
    throw Error(ErrorCode::UnsupportedConstruct, what);
  }

  // Rejects keywords that are recognized but outside the subset.
  void reject_unsupported() const {
    const Token& t = peek();
    if (t.type != Tok::Keyword) return;
    const std::string& k = t.text;
    if (k == "CROSS" || k == "NATURAL" || k == "LEFT" || k == "RIGHT" || k == "FULL") {
      std::string what = k;
      const Token& n = peek(1);
      if (n.type == Tok::Keyword || n.type == Tok::Ident) what += " " + upper(n.text);
      unsupported(what);
    }
    if (k == "OUTER" || k == "USING" || k == "WITH" || k == "CASE" || k == "OVER" ||
        k == "OFFSET" || k == "INSERT" || k == "UPDATE" || k == "DELETE" || k == "CREATE" ||
        k == "DROP" || k == "ALTER" || k == "WINDOW" || k == "CAST" || k == "VALUES" ||
        k == "INTO" || k == "APPLY" || k == "LATERAL" || k == "PARTITION") {
      unsupported(k);
    }
  }

  std::string expect_identifier(const std::string& what) {
    reject_unsupported();
    if (peek().type != Tok::Ident) fail(what);
    return next().text;
  }

  QueryAst parse_query() {
    QueryAst q;
    q.select = parse_select();
    while (true) {
      reject_unsupported();
      std::optional<SetOp> op;
      if (accept_keyword("UNION")) {
        op = SetOp::Union;
      } else if (accept_keyword("EXCEPT")) {
        op = SetOp::Except;
      } else if (accept_keyword("INTERSECT")) {
        op = SetOp::Intersect;
      } else {
        break;
      }
      if (is_keyword("ALL")) unsupported("UNION ALL");
      QueryAst rhs;
      rhs.select = parse_select();
      QueryAst combined;
      combined.set_op = op;
      combined.left = Box<Query>(std::move(q));
      combined.right = Box<Query>(std::move(rhs));
      q = std::move(combined);
    }
    return q;
  }

  TableRef parse_table_ref() {
    TableRef ref;
    ref.table = expect_identifier("table name");
    if (accept_keyword("AS")) {
      ref.alias = expect_identifier("alias");
    } else if (peek().type == Tok::Ident) {
      ref.alias = next().text;
    }
    return ref;
  }

  Select parse_select() {
    Select s;
    reject_unsupported();
    expect_keyword("SELECT");
    s.distinct = accept_keyword("DISTINCT");
    do {
      s.items.push_back(parse_select_item());
    } while (accept_symbol(","));

    reject_unsupported();
    expect_keyword("FROM");
    s.from = parse_table_ref();
    while (true) {
      reject_unsupported();
      if (accept_symbol(",")) {
        s.joins.push_back({parse_table_ref(), std::nullopt});
        continue;
      }
      bool inner = accept_keyword("INNER");
      if (!accept_keyword("JOIN")) {
        if (inner) fail("JOIN");
        break;
      }
      Join j;
      j.table = parse_table_ref();
      reject_unsupported();
      if (accept_keyword("ON")) j.on = parse_expr();
      s.joins.push_back(std::move(j));
    }
    reject_unsupported();
    if (accept_keyword("WHERE")) s.where = parse_expr();
    reject_unsupported();
    if (accept_keyword("GROUP")) {
      expect_keyword("BY");
      do {
        s.group_by.push_back(parse_expr());
      } while (accept_symbol(","));
    }
    if (accept_keyword("HAVING")) s.having = parse_expr();
    reject_unsupported();
    if (accept_keyword("ORDER")) {
      expect_keyword("BY");
      do {
        OrderKey key{parse_expr(), false};
        if (accept_keyword("DESC")) {
          key.descending = true;
        } else {
          accept_keyword("ASC");
        }
        s.order_by.push_back(std::move(key));
      } while (accept_symbol(","));
    }
    reject_unsupported();
    if (accept_keyword("LIMIT")) {
      if (peek().type != Tok::Integer) fail("integer LIMIT");
      s.limit = std::stoll(next().text);
      reject_unsupported();
      if (is_symbol(",")) unsupported("LIMIT offset");
    }
    return s;
  }

  SelectItem parse_select_item() {
    SelectItem item;
    if (accept_symbol("*")) {
      item.expr.kind = ExprKind::Star;
      return item;
    }
    if (peek().type == Tok::Ident && is_symbol(".", 1) && is_symbol("*", 2)) {
      unsupported("qualified * in select list");
    }
    item.expr = parse_expr();
    if (accept_keyword("AS")) {
      item.alias = expect_identifier("alias");
    } else if (peek().type == Tok::Ident) {
      item.alias = next().text;
    }
    return item;
  }

  Expr parse_expr() { return parse_or(); }

  static Expr binary(BinaryOp op, Expr lhs, Expr rhs) {
    Expr e;
    e.kind = ExprKind::Binary;
    e.binary = op;
    e.args.push_back(std::move(lhs));
    e.args.push_back(std::move(rhs));
    return e;
  }

  Expr parse_or() {
    Expr lhs = parse_and();
    while (accept_keyword("OR")) lhs = binary(BinaryOp::Or, std::move(lhs), parse_and());
    return lhs;
  }

  Expr parse_and() {
    Expr lhs = parse_not();
    while (accept_keyword("AND")) lhs = binary(BinaryOp::And, std::move(lhs), parse_not());
    return lhs;
  }

  Expr parse_not() {
    if (accept_keyword("NOT")) {
      Expr e;
      e.kind = ExprKind::Unary;
      e.unary = UnaryOp::Not;
      e.args.push_back(parse_not());
      return e;
    }
    return parse_predicate();
  }

  std::optional<BinaryOp> comparison_op() const {
    if (peek().type != Tok::Symbol) return std::nullopt;
    const auto& t = peek().text;
    if (t == "=") return BinaryOp::Eq;
    if (t == "!=" || t == "<>") return BinaryOp::Ne;
    if (t == "<") return BinaryOp::Lt;
    if (t == "<=") return BinaryOp::Le;
    if (t == ">") return BinaryOp::Gt;
    if (t == ">=") return BinaryOp::Ge;
    return std::nullopt;
  }

  Box<Query> parse_parenthesized_query() {
    expect_symbol("(");
    Box<Query> q(parse_query());
    expect_symbol(")");
    return q;
  }

  Expr parse_predicate() {
    Expr lhs = parse_additive();
    reject_unsupported();
    if (auto op = comparison_op()) {
      next();
      if (is_keyword("ANY") || is_keyword("SOME") || is_keyword("ALL")) {
        Expr e;
        e.kind = ExprKind::Quantified;
        e.binary = *op;
        e.quantifier = is_keyword("ALL") ? Quantifier::All : Quantifier::Any;
        next();
        e.args.push_back(std::move(lhs));
        e.subquery = parse_parenthesized_query();
        return e;
      }
      return binary(*op, std::move(lhs), parse_additive());
    }
    bool negated = false;
    if (is_keyword("NOT") && (is_keyword("BETWEEN", 1) || is_keyword("LIKE", 1) || is_keyword("IN", 1))) {
      next();
      negated = true;
    }
    if (accept_keyword("BETWEEN")) {
      Expr e;
      e.kind = ExprKind::Between;
      e.negated = negated;
      e.args.push_back(std::move(lhs));
      e.args.push_back(parse_additive());
      expect_keyword("AND");
      e.args.push_back(parse_additive());
      return e;
    }
    if (accept_keyword("LIKE")) {
      Expr e;
      e.kind = ExprKind::Like;
      e.negated = negated;
      e.args.push_back(std::move(lhs));
      e.args.push_back(parse_additive());
      return e;
    }
    if (accept_keyword("IN")) {
      Expr e;
      e.negated = negated;
      e.args.push_back(std::move(lhs));
      if (is_symbol("(") && is_keyword("SELECT", 1)) {
        e.kind = ExprKind::InQuery;
        e.subquery = parse_parenthesized_query();
      } else {
        e.kind = ExprKind::InList;
        expect_symbol("(");
        do {
          e.args.push_back(parse_additive());
        } while (accept_symbol(","));
        expect_symbol(")");
      }
      return e;
    }
    if (accept_keyword("IS")) {
      Expr e;
      e.kind = ExprKind::IsNull;
      e.negated = accept_keyword("NOT");
      expect_keyword("NULL");
      e.args.push_back(std::move(lhs));
      return e;
    }
    return lhs;
  }

  Expr parse_additive() {
    Expr lhs = parse_multiplicative();
    while (true) {
      if (accept_symbol("+")) {
        lhs = binary(BinaryOp::Add, std::move(lhs), parse_multiplicative());
      } else if (accept_symbol("-")) {
        lhs = binary(BinaryOp::Sub, std::move(lhs), parse_multiplicative());
      } else {
        return lhs;
      }
    }
  }

  Expr parse_multiplicative() {
    Expr lhs = parse_unary();
    while (true) {
      if (accept_symbol("*")) {
        lhs = binary(BinaryOp::Mul, std::move(lhs), parse_unary());
      } else if (accept_symbol("/")) {
        lhs = binary(BinaryOp::Div, std::move(lhs), parse_unary());
      } else {
        return lhs;
      }
    }
  }

  Expr parse_unary() {
    if (accept_symbol("-")) {
      Expr e;
      e.kind = ExprKind::Unary;
      e.unary = UnaryOp::Neg;
      e.args.push_back(parse_unary());
      return e;
    }
    accept_symbol("+");
    return parse_primary();
  }

  Expr parse_primary() {
    reject_unsupported();
    const Token& t = peek();
    Expr e;
    switch (t.type) {
      case Tok::Integer: {
        std::int64_t v = 0;
        auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
        if (ec != std::errc{}) syntax_error(t.pos, size_, "integer within 64 bits", t.text);
        e.literal = Value(v);
        next();
        return e;
      }
      case Tok::Real: {
        double v = 0;
        std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
        e.literal = Value(v);
        next();
        return e;
      }
      case Tok::String:
        e.literal = Value(t.text);
        next();
        return e;
      case Tok::Ident: {
        std::string first = next().text;
        if (is_symbol("(")) unsupported("function " + upper(first));
        e.kind = ExprKind::Column;
        if (accept_symbol(".")) {
          e.qualifier = first;
          e.name = expect_identifier("column name");
        } else {
          e.name = first;
        }
        return e;
      }
      case Tok::Keyword: {
        if (accept_keyword("NULL")) return e;
        if (accept_keyword("EXISTS")) {
          e.kind = ExprKind::Exists;
          e.subquery = parse_parenthesized_query();
          return e;
        }
        static const std::array<std::pair<std::string_view, AggregateFn>, 5> aggs = {{
            {"COUNT", AggregateFn::Count},
            {"SUM", AggregateFn::Sum},
            {"AVG", AggregateFn::Avg},
            {"MIN", AggregateFn::Min},
            {"MAX", AggregateFn::Max},
        }};
        for (const auto& [name, fn] : aggs) {
          if (!accept_keyword(name)) continue;
          e.kind = ExprKind::Aggregate;
          e.aggregate = fn;
          expect_symbol("(");
          e.distinct = accept_keyword("DISTINCT");
          if (fn == AggregateFn::Count && !e.distinct && accept_symbol("*")) {
            // COUNT(*): no arguments
          } else {
            e.args.push_back(parse_expr());
          }
          expect_symbol(")");
          return e;
        }
        fail("expression");
      }
      case Tok::Symbol:
        if (is_symbol("(")) {
          if (is_keyword("SELECT", 1)) {
            e.kind = ExprKind::Subquery;
            e.subquery = parse_parenthesized_query();
            return e;
          }
          next();
          Expr inner = parse_expr();
          expect_symbol(")");
          return inner;
        }
        fail("expression");
      case Tok::End: fail("expression");
    }
    fail("expression");
  }
};

// ---------------------------------------------------------------------------
// Serialization

int precedence(const Expr& e) {
  switch (e.kind) {
    case ExprKind::Binary:
      switch (e.binary) {
        case BinaryOp::Or: return 1;
        case BinaryOp::And: return 2;
        case BinaryOp::Add:
        case BinaryOp::Sub: return 5;
        case BinaryOp::Mul:
        case BinaryOp::Div: return 6;
        default: return 4;
      }
    case ExprKind::Unary: return e.unary == UnaryOp::Not ? 3 : 7;
    case ExprKind::Between:
    case ExprKind::Like:
    case ExprKind::InList:
    case ExprKind::InQuery:
    case ExprKind::IsNull:
    case ExprKind::Quantified: return 4;
    default: return 8;
  }
}

std::string quote_string(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out.push_back('\'');
    out.push_back(c);
  }
  out.push_back('\'');
  return out;
}

std::string identifier(const std::string& name) {
  bool plain = !name.empty() && (std::isalpha(static_cast<unsigned char>(name[0])) || name[0] == '_');
  for (char c : name) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') plain = false;
  }
  if (plain && !reserved().count(upper(name))) return name;
  return "`" + name + "`";
}

std::string literal_sql(const Value& v) {
  switch (v.kind()) {
    case Kind::Null: return "NULL";
    case Kind::Integer: return std::to_string(v.as_integer());
    case Kind::Real: {
      std::string r = render(v);
      if (r.find_first_of(".eE") == std::string::npos) r += ".0";
      return r;
    }
    case Kind::Text: return quote_string(v.as_text());
  }
  return "NULL";
}

std::string_view op_text(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::Mul: return "*";
    case BinaryOp::Div: return "/";
    case BinaryOp::Eq: return "=";
    case BinaryOp::Ne: return "!=";
    case BinaryOp::Lt: return "<";
    case BinaryOp::Le: return "<=";
    case BinaryOp::Gt: return ">";
    case BinaryOp::Ge: return ">=";
    case BinaryOp::And: return "AND";
    case BinaryOp::Or: return "OR";
  }
  return "?";
}

std::string_view aggregate_name(AggregateFn fn) {
  switch (fn) {
    case AggregateFn::Count: return "COUNT";
    case AggregateFn::Sum: return "SUM";
    case AggregateFn::Avg: return "AVG";
    case AggregateFn::Min: return "MIN";
    case AggregateFn::Max: return "MAX";
  }
  return "?";
}

std::string wrap(const Expr& e, int min_prec) {
  std::string s = to_sql(e);
  return precedence(e) < min_prec ? "(" + s + ")" : s;
}

std::string select_sql(const Select& s) {
  std::string out = "SELECT ";
  if (s.distinct) out += "DISTINCT ";
  for (std::size_t i = 0; i < s.items.size(); ++i) {
    if (i) out += ", ";
    out += to_sql(s.items[i].expr);
    if (!s.items[i].alias.empty()) out += " AS " + identifier(s.items[i].alias);
  }
  auto table = [](const TableRef& t) {
    return identifier(t.table) + (t.alias.empty() ? "" : " AS " + identifier(t.alias));
  };
  out += " FROM " + table(s.from);
  for (const auto& j : s.joins) {
    if (!j.on) {
      out += ", " + table(j.table);
    } else {
      out += " JOIN " + table(j.table) + " ON " + to_sql(*j.on);
    }
  }
  if (s.where) out += " WHERE " + to_sql(*s.where);
  if (!s.group_by.empty()) {
    out += " GROUP BY ";
    for (std::size_t i = 0; i < s.group_by.size(); ++i) {
      if (i) out += ", ";
      out += to_sql(s.group_by[i]);
    }
  }
  if (s.having) out += " HAVING " + to_sql(*s.having);
  if (!s.order_by.empty()) {
    out += " ORDER BY ";
    for (std::size_t i = 0; i < s.order_by.size(); ++i) {
      if (i) out += ", ";
      out += to_sql(s.order_by[i].expr) + (s.order_by[i].descending ? " DESC" : " ASC");
    }
  }
  if (s.limit) out += " LIMIT " + std::to_string(*s.limit);
  return out;
}

// Structural checks that need no schema: aggregates stay out of WHERE and
// qualified columns name a table or alias in scope.
struct ScopeCheck {
  std::vector<std::vector<std::string>> scopes;

  void query(const Query& q) {
    if (q.is_set_operation()) {
      query(*q.left);
      query(*q.right);
      return;
    }
    const Select& s = q.select;
    std::vector<std::string> names;
    auto add = [&](const TableRef& t) {
      names.push_back(t.table);
      if (!t.alias.empty()) names.push_back(t.alias);
    };
    add(s.from);
    for (const auto& j : s.joins) add(j.table);
    scopes.push_back(std::move(names));
    for (const auto& item : s.items) expr(item.expr);
    for (const auto& j : s.joins) {
      if (j.on) expr(*j.on);
    }
    if (s.where) {
      if (contains_aggregate(*s.where)) {
        throw Error(ErrorCode::UnsupportedConstruct, "aggregate in WHERE (use HAVING)");
      }
      expr(*s.where);
    }
    for (const auto& g : s.group_by) expr(g);
    if (s.having) expr(*s.having);
    for (const auto& k : s.order_by) expr(k.expr);
    scopes.pop_back();
  }

  static bool contains_aggregate(const Expr& e) {
    if (e.kind == ExprKind::Aggregate) return true;
    for (const auto& a : e.args) {
      if (contains_aggregate(a)) return true;
    }
    return false;
  }

  void expr(const Expr& e) {
    if (e.kind == ExprKind::Column && !e.qualifier.empty()) {
      bool found = false;
      for (const auto& scope : scopes) {
        for (const auto& n : scope) {
          if (iequals(n, e.qualifier)) found = true;
        }
      }
      if (!found) {
        throw Error(ErrorCode::SyntaxError,
                    "qualifier '" + e.qualifier + "' does not name a table or alias in scope");
      }
    }
    if (e.kind == ExprKind::Aggregate) {
      for (const auto& a : e.args) {
        if (contains_aggregate(a)) throw Error(ErrorCode::UnsupportedConstruct, "nested aggregate");
      }
    }
    for (const auto& a : e.args) expr(a);
    if (e.subquery) query(*e.subquery);
  }
};

}  // namespace

QueryAst parse_sql(std::string_view text) {
  QueryAst q = Parser(text).parse_statement();
  ScopeCheck{}.query(q);
  return q;
}

std::string to_sql(const Expr& e) {
  switch (e.kind) {
    case ExprKind::Literal: return literal_sql(e.literal);
    case ExprKind::Column:
      return e.qualifier.empty() ? identifier(e.name) : identifier(e.qualifier) + "." + identifier(e.name);
    case ExprKind::Star: return "*";
    case ExprKind::Unary:
      if (e.unary == UnaryOp::Not) return "NOT " + wrap(e.args[0], 3);
      return "-" + wrap(e.args[0], 7);
    case ExprKind::Binary: {
      int p = precedence(e);
      if (is_comparison(e.binary)) {
        return wrap(e.args[0], 5) + " " + std::string(op_text(e.binary)) + " " + wrap(e.args[1], 5);
      }
      return wrap(e.args[0], p) + " " + std::string(op_text(e.binary)) + " " + wrap(e.args[1], p + 1);
    }
    case ExprKind::Between:
      return wrap(e.args[0], 5) + (e.negated ? " NOT" : "") + " BETWEEN " + wrap(e.args[1], 5) +
             " AND " + wrap(e.args[2], 5);
    case ExprKind::Like:
      return wrap(e.args[0], 5) + (e.negated ? " NOT" : "") + " LIKE " + wrap(e.args[1], 5);
    case ExprKind::InList: {
      std::string out = wrap(e.args[0], 5) + (e.negated ? " NOT" : "") + " IN (";
      for (std::size_t i = 1; i < e.args.size(); ++i) {
        if (i > 1) out += ", ";
        out += wrap(e.args[i], 5);
      }
      return out + ")";
    }
    case ExprKind::InQuery:
      return wrap(e.args[0], 5) + (e.negated ? " NOT" : "") + " IN (" + to_sql(*e.subquery) + ")";
    case ExprKind::IsNull: return wrap(e.args[0], 5) + (e.negated ? " IS NOT NULL" : " IS NULL");
    case ExprKind::Exists: return "EXISTS (" + to_sql(*e.subquery) + ")";
    case ExprKind::Quantified:
      return wrap(e.args[0], 5) + " " + std::string(op_text(e.binary)) +
             (e.quantifier == Quantifier::All ? " ALL (" : " ANY (") + to_sql(*e.subquery) + ")";
    case ExprKind::Subquery: return "(" + to_sql(*e.subquery) + ")";
    case ExprKind::Aggregate: {
      std::string out(aggregate_name(e.aggregate));
      out += "(";
      if (e.distinct) out += "DISTINCT ";
      out += e.args.empty() ? "*" : to_sql(e.args[0]);
      return out + ")";
    }
  }
  return {};
}

std::string to_sql(const QueryAst& q) {
  if (!q.is_set_operation()) return select_sql(q.select);
  std::string_view op = *q.set_op == SetOp::Union ? " UNION " : (*q.set_op == SetOp::Except ? " EXCEPT " : " INTERSECT ");
  return to_sql(*q.left) + std::string(op) + to_sql(*q.right);
}

}  // namespace sqlctx
