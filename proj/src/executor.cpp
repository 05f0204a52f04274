#include "sqlctx/executor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <unordered_map>

#include "sqlctx/csv.hpp"
#include "sqlctx/error.hpp"
#include "sqlctx/sql_parser.hpp"

namespace sqlctx {

bool like_match(std::string_view text, std::string_view pattern) {
  auto lower = [](char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); };
  // iterative wildcard match with single-star backtracking
  std::size_t t = 0, p = 0, star = std::string_view::npos, mark = 0;
  while (t < text.size()) {
    if (p < pattern.size() && (pattern[p] == '_' || lower(pattern[p]) == lower(text[t]))) {
      ++t;
      ++p;
    } else if (p < pattern.size() && pattern[p] == '%') {
      star = p++;
      mark = t;
    } else if (star != std::string_view::npos) {
      p = star + 1;
      t = ++mark;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '%') ++p;
  return p == pattern.size();
}

namespace {

using Tuple = std::vector<const Row*>;

struct Bound {
  std::string exposed;
  std::string table;
  const Table* data;
};

struct Frame {
  const std::vector<Bound>* bound = nullptr;
  const Tuple* tuple = nullptr;
  const std::vector<const Tuple*>* group = nullptr;  // set in aggregate context
  const Select* select = nullptr;
  const Row* projected = nullptr;  // output row, for alias references
  bool prefer_alias = false;       // ORDER BY resolves output names first
  const Frame* outer = nullptr;
};

bool truthy(const Value& v) {
  switch (v.kind()) {
    case Kind::Null: return false;
    case Kind::Integer: return v.as_integer() != 0;
    case Kind::Real: return v.as_real() != 0.0;
    case Kind::Text: throw Error(ErrorCode::TypeMismatch, "text value used as a condition");
  }
  return false;
}

Value boolean(bool b) { return Value(std::int64_t{b ? 1 : 0}); }

/// Three-way comparison for predicates; nullopt when either side is Null.
std::optional<int> compare_values(const Value& a, const Value& b) {
  if (a.is_null() || b.is_null()) return std::nullopt;
  if (a.is_numeric() != b.is_numeric()) {
    throw Error(ErrorCode::TypeMismatch,
                "cannot compare " + std::string(to_string(a.kind())) + " with " +
                    std::string(to_string(b.kind())));
  }
  return sort_compare(a, b);
}

bool apply_comparison(BinaryOp op, int c) {
  switch (op) {
    case BinaryOp::Eq: return c == 0;
    case BinaryOp::Ne: return c != 0;
    case BinaryOp::Lt: return c < 0;
    case BinaryOp::Le: return c <= 0;
    case BinaryOp::Gt: return c > 0;
    case BinaryOp::Ge: return c >= 0;
    default: return false;
  }
}

Value arithmetic(BinaryOp op, const Value& a, const Value& b) {
  if (a.is_null() || b.is_null()) return {};
  if (!a.is_numeric() || !b.is_numeric()) {
    throw Error(ErrorCode::TypeMismatch, "arithmetic on text");
  }
  if (op == BinaryOp::Div) {
    double d = b.as_number();
    if (d == 0.0) return {};
    return Value(a.as_number() / d);
  }
  if (a.kind() == Kind::Integer && b.kind() == Kind::Integer) {
    std::int64_t x = a.as_integer(), y = b.as_integer(), r = 0;
    bool overflow = false;
    switch (op) {
      case BinaryOp::Add: overflow = __builtin_add_overflow(x, y, &r); break;
      case BinaryOp::Sub: overflow = __builtin_sub_overflow(x, y, &r); break;
      case BinaryOp::Mul: overflow = __builtin_mul_overflow(x, y, &r); break;
      default: break;
    }
    if (!overflow) return Value(r);
  }
  double x = a.as_number(), y = b.as_number();
  switch (op) {
    case BinaryOp::Add: return Value(x + y);
    case BinaryOp::Sub: return Value(x - y);
    case BinaryOp::Mul: return Value(x * y);
    default: return {};
  }
}

/// Hashable identity for grouping/dedup: numeric values share one key space.
std::string key_of(const Value& v) {
  switch (v.kind()) {
    case Kind::Null: return "n";
    case Kind::Integer: return "d" + render(Value(static_cast<double>(v.as_integer())));
    case Kind::Real: return "d" + render(v);
    case Kind::Text: return "t" + v.as_text();
  }
  return {};
}

std::string key_of(const Row& row) {
  std::string k;
  for (const auto& v : row) {
    auto part = key_of(v);
    k += std::to_string(part.size());
    k += ':';
    k += part;
  }
  return k;
}

bool has_local_aggregate(const Expr& e) {
  if (e.kind == ExprKind::Aggregate) return true;
  for (const auto& a : e.args) {
    if (has_local_aggregate(a)) return true;
  }
  return false;
}

class Executor {
 public:
  explicit Executor(const Database& db) : db_(db) {}

  ResultSet run(const Query& q, const Frame* outer) {
    if (!q.is_set_operation()) return run_select(q.select, outer);
    ResultSet left = run(*q.left, outer);
    ResultSet right = run(*q.right, outer);
    if (left.columns.size() != right.columns.size()) {
      throw Error(ErrorCode::TypeMismatch, "set operation over queries with different column counts");
    }
    ResultSet out;
    out.columns = left.columns;
    std::unordered_map<std::string, bool> right_keys;
    for (const auto& r : right.rows) right_keys.emplace(key_of(r), true);
    std::unordered_map<std::string, bool> seen;
    auto emit = [&](const Row& r) {
      if (seen.emplace(key_of(r), true).second) out.rows.push_back(r);
    };
    switch (*q.set_op) {
      case SetOp::Union:
        for (const auto& r : left.rows) emit(r);
        for (const auto& r : right.rows) emit(r);
        break;
      case SetOp::Except:
        for (const auto& r : left.rows) {
          if (!right_keys.count(key_of(r))) emit(r);
        }
        break;
      case SetOp::Intersect:
        for (const auto& r : left.rows) {
          if (right_keys.count(key_of(r))) emit(r);
        }
        break;
    }
    return out;
  }

 private:
  const Database& db_;
  std::map<const Query*, ResultSet> uncorrelated_;
  std::map<const Query*, bool> correlated_;

  // ---- column resolution --------------------------------------------------

  static std::optional<Value> lookup_in_frame(const Frame& f, const Expr& col) {
    const std::vector<Bound>& bound = *f.bound;
    std::optional<std::pair<std::size_t, std::size_t>> hit;
    for (std::size_t b = 0; b < bound.size(); ++b) {
      if (!col.qualifier.empty() && !iequals(bound[b].exposed, col.qualifier) &&
          !iequals(bound[b].table, col.qualifier)) {
        continue;
      }
      if (auto c = bound[b].data->column_index(col.name)) {
        if (hit) {
          throw Error(ErrorCode::UnknownColumn, "ambiguous column '" + col.name + "'");
        }
        hit = {b, *c};
      }
    }
    if (!hit) return std::nullopt;
    if (!f.tuple) return Value{};
    return (*(*f.tuple)[hit->first])[hit->second];
  }

  static std::optional<Value> lookup_alias(const Frame& f, const Expr& col) {
    if (!f.projected || !col.qualifier.empty()) return std::nullopt;
    for (std::size_t i = 0; i < f.select->items.size(); ++i) {
      if (!f.select->items[i].alias.empty() && iequals(f.select->items[i].alias, col.name) &&
          i < f.projected->size()) {
        return (*f.projected)[i];
      }
    }
    return std::nullopt;
  }

  Value resolve(const Frame& frame, const Expr& col) {
    for (const Frame* f = &frame; f; f = f->outer) {
      if (f->prefer_alias) {
        if (auto v = lookup_alias(*f, col)) return *v;
      }
      if (auto v = lookup_in_frame(*f, col)) return *v;
      if (auto v = lookup_alias(*f, col)) return *v;
    }
    throw Error(ErrorCode::UnknownColumn,
                (col.qualifier.empty() ? "" : col.qualifier + ".") + col.name);
  }

  // ---- expressions ----------------------------------------------------------

  ResultSet subquery(const Query& q, const Frame& frame) {
    auto c = correlated_.find(&q);
    if (c == correlated_.end()) {
      try {
        ResultSet r = run(q, nullptr);
        correlated_[&q] = false;
        uncorrelated_[&q] = r;
        return r;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::UnknownColumn) throw;
        correlated_[&q] = true;
        return run(q, &frame);
      }
    }
    if (!c->second) return uncorrelated_.at(&q);
    return run(q, &frame);
  }

  Value aggregate(const Expr& e, const Frame& frame) {
    if (!frame.group) {
      throw Error(ErrorCode::TypeMismatch, "aggregate outside an aggregate context");
    }
    const auto& group = *frame.group;
    if (e.args.empty()) return Value(static_cast<std::int64_t>(group.size()));  // COUNT(*)

    std::vector<Value> values;
    std::unordered_map<std::string, bool> seen;
    for (const Tuple* t : group) {
      Frame row = frame;
      row.tuple = t;
      row.group = nullptr;
      Value v = eval(e.args[0], row);
      if (v.is_null()) continue;
      if (e.distinct && !seen.emplace(key_of(v), true).second) continue;
      values.push_back(std::move(v));
    }
    switch (e.aggregate) {
      case AggregateFn::Count: return Value(static_cast<std::int64_t>(values.size()));
      case AggregateFn::Sum:
      case AggregateFn::Avg: {
        if (values.empty()) return {};
        bool all_int = true;
        for (const auto& v : values) {
          if (!v.is_numeric()) throw Error(ErrorCode::TypeMismatch, "SUM/AVG over text");
          if (v.kind() != Kind::Integer) all_int = false;
        }
        if (e.aggregate == AggregateFn::Sum && all_int) {
          std::int64_t s = 0;
          bool overflow = false;
          for (const auto& v : values) overflow |= __builtin_add_overflow(s, v.as_integer(), &s);
          if (!overflow) return Value(s);
        }
        double s = 0;
        for (const auto& v : values) s += v.as_number();
        if (e.aggregate == AggregateFn::Sum) return Value(s);
        return Value(s / static_cast<double>(values.size()));
      }
      case AggregateFn::Min:
      case AggregateFn::Max: {
        if (values.empty()) return {};
        const Value* best = &values[0];
        for (const auto& v : values) {
          int c = sort_compare(v, *best);
          if ((e.aggregate == AggregateFn::Min && c < 0) || (e.aggregate == AggregateFn::Max && c > 0)) {
            best = &v;
          }
        }
        return *best;
      }
    }
    return {};
  }

  Value eval(const Expr& e, const Frame& frame) {
    switch (e.kind) {
      case ExprKind::Literal: return e.literal;
      case ExprKind::Column: return resolve(frame, e);
      case ExprKind::Star: throw Error(ErrorCode::TypeMismatch, "* used as a value");
      case ExprKind::Unary: {
        Value v = eval(e.args[0], frame);
        if (e.unary == UnaryOp::Not) return boolean(!truthy(v));
        if (v.is_null()) return {};
        if (v.kind() == Kind::Integer) return Value(-v.as_integer());
        if (v.kind() == Kind::Real) return Value(-v.as_real());
        throw Error(ErrorCode::TypeMismatch, "negation of text");
      }
      case ExprKind::Binary: {
        if (e.binary == BinaryOp::And) {
          return boolean(truthy(eval(e.args[0], frame)) && truthy(eval(e.args[1], frame)));
        }
        if (e.binary == BinaryOp::Or) {
          return boolean(truthy(eval(e.args[0], frame)) || truthy(eval(e.args[1], frame)));
        }
        Value a = eval(e.args[0], frame);
        Value b = eval(e.args[1], frame);
        if (is_comparison(e.binary)) {
          auto c = compare_values(a, b);
          return boolean(c && apply_comparison(e.binary, *c));
        }
        return arithmetic(e.binary, a, b);
      }
      case ExprKind::Between: {
        Value v = eval(e.args[0], frame);
        auto lo = compare_values(v, eval(e.args[1], frame));
        auto hi = compare_values(v, eval(e.args[2], frame));
        if (!lo || !hi) return boolean(false);
        bool inside = *lo >= 0 && *hi <= 0;
        return boolean(e.negated ? !inside : inside);
      }
      case ExprKind::Like: {
        Value v = eval(e.args[0], frame);
        Value p = eval(e.args[1], frame);
        if (v.is_null() || p.is_null()) return boolean(false);
        bool m = like_match(render(v), render(p));
        return boolean(e.negated ? !m : m);
      }
      case ExprKind::InList: {
        Value v = eval(e.args[0], frame);
        if (v.is_null()) return boolean(false);
        bool found = false;
        for (std::size_t i = 1; i < e.args.size() && !found; ++i) {
          auto c = compare_values(v, eval(e.args[i], frame));
          found = c && *c == 0;
        }
        return boolean(e.negated ? !found : found);
      }
      case ExprKind::InQuery: {
        Value v = eval(e.args[0], frame);
        ResultSet r = subquery(*e.subquery, frame);
        if (r.columns.size() != 1) throw Error(ErrorCode::NonScalarSubquery, "IN subquery must return one column");
        if (v.is_null()) return boolean(false);
        bool found = false;
        for (const auto& row : r.rows) {
          auto c = compare_values(v, row[0]);
          if (c && *c == 0) {
            found = true;
            break;
          }
        }
        return boolean(e.negated ? !found : found);
      }
      case ExprKind::IsNull: {
        bool n = eval(e.args[0], frame).is_null();
        return boolean(e.negated ? !n : n);
      }
      case ExprKind::Exists: {
        bool any = !subquery(*e.subquery, frame).rows.empty();
        return boolean(e.negated ? !any : any);
      }
      case ExprKind::Quantified: {
        Value v = eval(e.args[0], frame);
        ResultSet r = subquery(*e.subquery, frame);
        if (r.columns.size() != 1) throw Error(ErrorCode::NonScalarSubquery, "ANY/ALL subquery must return one column");
        if (v.is_null()) return boolean(false);
        bool any = false, all = true;
        for (const auto& row : r.rows) {
          auto c = compare_values(v, row[0]);
          if (!c) continue;
          bool ok = apply_comparison(e.binary, *c);
          any = any || ok;
          all = all && ok;
        }
        return boolean(e.quantifier == Quantifier::Any ? any : all);
      }
      case ExprKind::Subquery: {
        ResultSet r = subquery(*e.subquery, frame);
        if (r.columns.size() != 1) {
          throw Error(ErrorCode::NonScalarSubquery, "scalar subquery returns " +
                                                        std::to_string(r.columns.size()) + " columns");
        }
        if (r.rows.size() > 1) {
          throw Error(ErrorCode::NonScalarSubquery,
                      "scalar subquery returns " + std::to_string(r.rows.size()) + " rows");
        }
        return r.rows.empty() ? Value{} : r.rows[0][0];
      }
      case ExprKind::Aggregate: return aggregate(e, frame);
    }
    return {};
  }

  // ---- FROM / JOIN ----------------------------------------------------------

  std::vector<Bound> bind(const Select& s) {
    std::vector<Bound> bound;
    auto add = [&](const TableRef& ref) {
      const Table* t = db_.find(ref.table);
      if (!t) throw Error(ErrorCode::UnknownTable, ref.table);
      bound.push_back({ref.exposed_name(), ref.table, t});
    };
    add(s.from);
    for (const auto& j : s.joins) add(j.table);
    return bound;
  }

  /// If `on` contains (as a top-level AND conjunct) an equality between a
  /// column of the newly joined table and an expression over earlier tables,
  /// return (column index in new table, the other side).
  std::optional<std::pair<std::size_t, const Expr*>> hash_key(const Expr& on,
                                                              const std::vector<Bound>& bound,
                                                              std::size_t new_index) {
    if (on.kind == ExprKind::Binary && on.binary == BinaryOp::And) {
      if (auto k = hash_key(on.args[0], bound, new_index)) return k;
      return hash_key(on.args[1], bound, new_index);
    }
    if (on.kind != ExprKind::Binary || on.binary != BinaryOp::Eq) return std::nullopt;
    auto owner = [&](const Expr& col) -> std::optional<std::pair<std::size_t, std::size_t>> {
      if (col.kind != ExprKind::Column) return std::nullopt;
      std::optional<std::pair<std::size_t, std::size_t>> hit;
      for (std::size_t b = 0; b <= new_index; ++b) {
        if (!col.qualifier.empty() && !iequals(bound[b].exposed, col.qualifier) &&
            !iequals(bound[b].table, col.qualifier)) {
          continue;
        }
        if (auto c = bound[b].data->column_index(col.name)) {
          if (hit) return std::nullopt;
          hit = {b, *c};
        }
      }
      return hit;
    };
    auto l = owner(on.args[0]);
    auto r = owner(on.args[1]);
    if (l && r) {
      if (l->first == new_index && r->first < new_index) return std::make_pair(l->second, &on.args[1]);
      if (r->first == new_index && l->first < new_index) return std::make_pair(r->second, &on.args[0]);
    }
    return std::nullopt;
  }

  std::vector<Tuple> cross_filter(const Select& s, const std::vector<Bound>& bound, const Frame* outer) {
    std::vector<Tuple> tuples;
    for (const auto& row : bound[0].data->rows()) tuples.push_back({&row});

    for (std::size_t j = 0; j < s.joins.size(); ++j) {
      const std::size_t index = j + 1;
      const Table& table = *bound[index].data;
      const auto& on = s.joins[j].on;
      std::vector<Bound> partial(bound.begin(), bound.begin() + static_cast<long>(index) + 1);
      std::vector<Bound> earlier(bound.begin(), bound.begin() + static_cast<long>(index));

      std::optional<std::pair<std::size_t, const Expr*>> key;
      if (on) key = hash_key(*on, partial, index);
      std::unordered_map<std::string, std::vector<const Row*>> buckets;
      if (key) {
        for (const auto& row : table.rows()) {
          const Value& v = row[key->first];
          if (!v.is_null()) buckets[key_of(v)].push_back(&row);
        }
      }

      std::vector<Tuple> next;
      std::vector<const Row*> all;
      for (const auto& row : table.rows()) all.push_back(&row);
      for (const auto& t : tuples) {
        const std::vector<const Row*>* candidates = &all;
        if (key) {
          // the probe side only sees the tables joined so far
          Frame ef{&earlier, &t, nullptr, &s, nullptr, false, outer};
          Value probe_value = eval(*key->second, ef);
          static const std::vector<const Row*> none;
          if (probe_value.is_null()) {
            candidates = &none;
          } else {
            bool column_is_text = table.columns()[key->first].kind == Kind::Text;
            if ((probe_value.kind() == Kind::Text) != column_is_text) {
              throw Error(ErrorCode::TypeMismatch, "join compares text with a number");
            }
            auto it = buckets.find(key_of(probe_value));
            candidates = it == buckets.end() ? &none : &it->second;
          }
        }
        for (const Row* row : *candidates) {
          Tuple extended = t;
          extended.push_back(row);
          if (on) {
            Frame f{&partial, &extended, nullptr, &s, nullptr, false, outer};
            if (!truthy(eval(*on, f))) continue;
          }
          next.push_back(std::move(extended));
        }
      }
      tuples = std::move(next);
    }

    if (s.where) {
      std::vector<Tuple> kept;
      for (auto& t : tuples) {
        Frame f{&bound, &t, nullptr, &s, nullptr, false, outer};
        if (truthy(eval(*s.where, f))) kept.push_back(std::move(t));
      }
      tuples = std::move(kept);
    }
    return tuples;
  }

  // ---- SELECT -------------------------------------------------------------

  std::vector<std::string> column_names(const Select& s, const std::vector<Bound>& bound) {
    std::vector<std::string> names;
    for (const auto& item : s.items) {
      if (item.expr.kind == ExprKind::Star) {
        for (const auto& b : bound) {
          for (const auto& c : b.data->columns()) names.push_back(c.name);
        }
      } else {
        names.push_back(item.alias.empty() ? to_sql(item.expr) : item.alias);
      }
    }
    return names;
  }

  Row project(const Select& s, const Frame& f) {
    Row out;
    for (const auto& item : s.items) {
      if (item.expr.kind == ExprKind::Star) {
        for (std::size_t b = 0; b < f.bound->size(); ++b) {
          const auto& cols = (*f.bound)[b].data->columns();
          for (std::size_t c = 0; c < cols.size(); ++c) {
            out.push_back(f.tuple ? (*(*f.tuple)[b])[c] : Value{});
          }
        }
      } else {
        out.push_back(eval(item.expr, f));
      }
    }
    return out;
  }

  Row order_values(const Select& s, Frame f, const Row& projected) {
    f.projected = &projected;
    f.prefer_alias = true;
    Row keys;
    for (const auto& k : s.order_by) {
      if (k.expr.kind == ExprKind::Literal && k.expr.literal.kind() == Kind::Integer) {
        auto pos = k.expr.literal.as_integer();
        if (pos < 1 || pos > static_cast<std::int64_t>(projected.size())) {
          throw Error(ErrorCode::UnknownColumn, "ORDER BY position " + std::to_string(pos));
        }
        keys.push_back(projected[static_cast<std::size_t>(pos - 1)]);
      } else {
        keys.push_back(eval(k.expr, f));
      }
    }
    return keys;
  }

  /// Representative tuple of a group for bare columns.
  const Tuple* representative(const Select& s, const std::vector<const Tuple*>& group, Frame f) {
    if (group.empty()) return nullptr;
    const Expr* extreme = nullptr;
    int count = 0;
    std::function<void(const Expr&)> scan = [&](const Expr& e) {
      if (e.kind == ExprKind::Aggregate) {
        ++count;
        if (e.aggregate == AggregateFn::Min || e.aggregate == AggregateFn::Max) extreme = &e;
        return;
      }
      for (const auto& a : e.args) scan(a);
    };
    for (const auto& item : s.items) scan(item.expr);
    if (count != 1 || !extreme || extreme->args.empty()) return group.front();
    const Tuple* best = nullptr;
    Value best_value;
    for (const Tuple* t : group) {
      f.tuple = t;
      f.group = nullptr;
      Value v = eval(extreme->args[0], f);
      if (v.is_null()) continue;
      int c = best ? sort_compare(v, best_value) : 0;
      if (!best || (extreme->aggregate == AggregateFn::Min ? c < 0 : c > 0)) {
        best = t;
        best_value = v;
      }
    }
    return best ? best : group.front();
  }

  ResultSet run_select(const Select& s, const Frame* outer) {
    std::vector<Bound> bound = bind(s);
    std::vector<Tuple> tuples = cross_filter(s, bound, outer);

    bool aggregate_query = !s.group_by.empty() || (s.having && has_local_aggregate(*s.having));
    for (const auto& item : s.items) aggregate_query = aggregate_query || has_local_aggregate(item.expr);
    for (const auto& k : s.order_by) aggregate_query = aggregate_query || has_local_aggregate(k.expr);

    struct Output {
      Row row;
      Row keys;
    };
    std::vector<Output> outputs;

    if (aggregate_query) {
      std::vector<std::vector<const Tuple*>> groups;
      if (s.group_by.empty()) {
        groups.emplace_back();
        for (const auto& t : tuples) groups.back().push_back(&t);
      } else {
        std::unordered_map<std::string, std::size_t> index;
        for (const auto& t : tuples) {
          Frame f{&bound, &t, nullptr, &s, nullptr, false, outer};
          Row key;
          for (const auto& g : s.group_by) key.push_back(eval(g, f));
          auto [it, inserted] = index.emplace(key_of(key), groups.size());
          if (inserted) groups.emplace_back();
          groups[it->second].push_back(&t);
        }
      }
      for (const auto& group : groups) {
        Frame f{&bound, nullptr, &group, &s, nullptr, false, outer};
        f.tuple = representative(s, group, f);
        if (s.having && !truthy(eval(*s.having, f))) continue;
        Row row = project(s, f);
        Row keys = order_values(s, f, row);
        outputs.push_back({std::move(row), std::move(keys)});
      }
    } else {
      for (const auto& t : tuples) {
        Frame f{&bound, &t, nullptr, &s, nullptr, false, outer};
        Row row = project(s, f);
        Row keys = order_values(s, f, row);
        outputs.push_back({std::move(row), std::move(keys)});
      }
    }

    if (s.distinct) {
      std::unordered_map<std::string, bool> seen;
      std::vector<Output> unique;
      for (auto& o : outputs) {
        if (seen.emplace(key_of(o.row), true).second) unique.push_back(std::move(o));
      }
      outputs = std::move(unique);
    }
    if (!s.order_by.empty()) {
      std::stable_sort(outputs.begin(), outputs.end(), [&](const Output& a, const Output& b) {
        for (std::size_t i = 0; i < s.order_by.size(); ++i) {
          int c = sort_compare(a.keys[i], b.keys[i]);
          if (c != 0) return s.order_by[i].descending ? c > 0 : c < 0;
        }
        return false;
      });
    }
    if (s.limit && static_cast<std::int64_t>(outputs.size()) > *s.limit) {
      outputs.resize(static_cast<std::size_t>(std::max<std::int64_t>(0, *s.limit)));
    }

    ResultSet result;
    result.columns = column_names(s, bound);
    result.ordered = !s.order_by.empty();
    for (auto& o : outputs) result.rows.push_back(std::move(o.row));
    return result;
  }
};

bool cells_match(const Value& a, const Value& b, double rel_tol) {
  if (a.is_numeric() && b.is_numeric()) {
    double x = a.as_number(), y = b.as_number();
    return std::abs(x - y) <= rel_tol * std::max({1.0, std::abs(x), std::abs(y)});
  }
  return a == b;
}

bool rows_match(const Row& a, const Row& b, double rel_tol) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!cells_match(a[i], b[i], rel_tol)) return false;
  }
  return true;
}

}  // namespace

ResultSet execute(const QueryAst& query, const Database& db) {
  Executor ex(db);
  return ex.run(query, nullptr);
}

bool results_match(const ResultSet& a, const ResultSet& b, double rel_tol) {
  if (a.columns.size() != b.columns.size() || a.rows.size() != b.rows.size()) return false;
  if (a.ordered && b.ordered) {
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
      if (!rows_match(a.rows[i], b.rows[i], rel_tol)) return false;
    }
    return true;
  }
  auto less = [](const Row& x, const Row& y) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      int c = sort_compare(x[i], y[i]);
      if (c != 0) return c < 0;
    }
    return false;
  };
  auto x = a.rows, y = b.rows;
  std::sort(x.begin(), x.end(), less);
  std::sort(y.begin(), y.end(), less);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!rows_match(x[i], y[i], rel_tol)) return false;
  }
  return true;
}

std::string serialize_result(const ResultSet& result) {
  std::string out;
  for (std::size_t i = 0; i < result.columns.size(); ++i) {
    if (i) out += ',';
    out += csv::escape(result.columns[i]);
  }
  out += '\n';
  for (const auto& row : result.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += csv::escape(render(row[i]), row[i].kind() == Kind::Text && row[i].as_text().empty());
    }
    out += '\n';
  }
  return out;
}

}  // namespace sqlctx
