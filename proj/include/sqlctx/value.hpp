#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace sqlctx {

enum class Kind { Null, Integer, Real, Text };

std::string_view to_string(Kind kind);
std::optional<Kind> parse_kind(std::string_view name);

struct Null {
  friend bool operator==(Null, Null) { return true; }
};

/// A single cell. Reals are always finite.
class Value {
 public:
  using Storage = std::variant<Null, std::int64_t, double, std::string>;

  Value() = default;
  Value(Null) {}
  Value(std::int64_t v) : data_(v) {}
  Value(int v) : data_(static_cast<std::int64_t>(v)) {}
  Value(double v);
  Value(std::string v) : data_(std::move(v)) {}
  Value(const char* v) : data_(std::string(v)) {}

  Kind kind() const { return static_cast<Kind>(data_.index()); }
  bool is_null() const { return kind() == Kind::Null; }
  bool is_numeric() const { return kind() == Kind::Integer || kind() == Kind::Real; }

  std::int64_t as_integer() const { return std::get<std::int64_t>(data_); }
  double as_real() const { return std::get<double>(data_); }
  const std::string& as_text() const { return std::get<std::string>(data_); }
  /// Integer or Real widened to double.
  double as_number() const;

  const Storage& storage() const { return data_; }

  /// Exact structural equality (kind and payload); 1 != 1.0 here.
  friend bool operator==(const Value& a, const Value& b) { return a.data_ == b.data_; }

 private:
  Storage data_;
};

/// Canonical text: integers in decimal, reals in shortest round-trip form
/// (411.0 renders as "411"), text verbatim, Null as the empty string.
std::string render(const Value& value);

/// Coerces a CSV cell to the declared kind. Empty text is Null.
/// Returns nullopt when the text is not a valid literal of that kind.
std::optional<Value> coerce(std::string_view text, Kind kind);

/// Total order used for sorting, grouping and DISTINCT: Null < numbers < text.
/// Integer and Real compare numerically.
int sort_compare(const Value& a, const Value& b);

/// Value equality used by GROUP BY / DISTINCT / set operations (numeric
/// promotion: 1 and 1.0 are the same key).
inline bool same_key(const Value& a, const Value& b) { return sort_compare(a, b) == 0; }

}  // namespace sqlctx
