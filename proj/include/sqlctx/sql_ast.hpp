#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sqlctx/value.hpp"

namespace sqlctx {

/// Owning pointer with value semantics: deep copy, deep comparison.
template <class T>
class Box {
 public:
  Box() = default;
  Box(T value) : ptr_(std::make_unique<T>(std::move(value))) {}
  Box(const Box& other) : ptr_(other.ptr_ ? std::make_unique<T>(*other.ptr_) : nullptr) {}
  Box(Box&&) noexcept = default;
  Box& operator=(const Box& other) {
    if (this != &other) ptr_ = other.ptr_ ? std::make_unique<T>(*other.ptr_) : nullptr;
    return *this;
  }
  Box& operator=(Box&&) noexcept = default;

  explicit operator bool() const { return static_cast<bool>(ptr_); }
  const T& operator*() const { return *ptr_; }
  T& operator*() { return *ptr_; }
  const T* operator->() const { return ptr_.get(); }
  T* operator->() { return ptr_.get(); }
  const T* get() const { return ptr_.get(); }

  friend bool operator==(const Box& a, const Box& b) {
    if (!a.ptr_ || !b.ptr_) return !a.ptr_ && !b.ptr_;
    return *a.ptr_ == *b.ptr_;
  }

 private:
  std::unique_ptr<T> ptr_;
};

struct Query;

enum class ExprKind {
  Literal,
  Column,      // [qualifier.]name
  Star,        // only as COUNT(*) argument or select item
  Unary,       // NOT, unary minus
  Binary,      // arithmetic, comparison, AND, OR
  Between,     // args: value, low, high
  Like,        // args: value, pattern
  InList,      // args: value, items...
  InQuery,     // args: value; subquery
  IsNull,      // args: value
  Exists,      // subquery
  Quantified,  // args: value; op; ANY/ALL; subquery
  Subquery,    // scalar subquery
  Aggregate,   // name = COUNT/SUM/AVG/MIN/MAX; args: 0 (COUNT(*)) or 1
};

enum class BinaryOp { Add, Sub, Mul, Div, Eq, Ne, Lt, Le, Gt, Ge, And, Or };
enum class UnaryOp { Not, Neg };
enum class AggregateFn { Count, Sum, Avg, Min, Max };
enum class Quantifier { Any, All };

bool is_comparison(BinaryOp op);

struct Expr {
  ExprKind kind = ExprKind::Literal;
  Value literal;
  std::string qualifier;  // Column: table or alias (may be empty)
  std::string name;       // Column: column name
  BinaryOp binary = BinaryOp::Eq;
  UnaryOp unary = UnaryOp::Not;
  AggregateFn aggregate = AggregateFn::Count;
  Quantifier quantifier = Quantifier::Any;
  bool distinct = false;  // COUNT(DISTINCT x) etc.
  bool negated = false;   // NOT BETWEEN / NOT LIKE / NOT IN / IS NOT NULL / NOT EXISTS
  std::vector<Expr> args;
  Box<Query> subquery;

  friend bool operator==(const Expr&, const Expr&) = default;
};

struct SelectItem {
  Expr expr;
  std::string alias;

  friend bool operator==(const SelectItem&, const SelectItem&) = default;
};

struct TableRef {
  std::string table;
  std::string alias;

  /// Name other clauses use to qualify columns of this table.
  const std::string& exposed_name() const { return alias.empty() ? table : alias; }

  friend bool operator==(const TableRef&, const TableRef&) = default;
};

struct Join {
  TableRef table;
  std::optional<Expr> on;  // absent for a bare comma / JOIN without ON

  friend bool operator==(const Join&, const Join&) = default;
};

struct OrderKey {
  Expr expr;
  bool descending = false;

  friend bool operator==(const OrderKey&, const OrderKey&) = default;
};

struct Select {
  bool distinct = false;
  std::vector<SelectItem> items;
  TableRef from;
  std::vector<Join> joins;
  std::optional<Expr> where;
  std::vector<Expr> group_by;
  std::optional<Expr> having;
  std::vector<OrderKey> order_by;
  std::optional<std::int64_t> limit;

  friend bool operator==(const Select&, const Select&) = default;
};

enum class SetOp { Union, Except, Intersect };

/// Either a plain SELECT or a set operation over two queries. Chains are
/// left-nested: `a UNION b EXCEPT c` is `(a UNION b) EXCEPT c`.
struct Query {
  Select select;                 // used when set_op is empty
  std::optional<SetOp> set_op;
  Box<Query> left;
  Box<Query> right;

  bool is_set_operation() const { return set_op.has_value(); }

  friend bool operator==(const Query&, const Query&) = default;
};

using QueryAst = Query;

}  // namespace sqlctx
