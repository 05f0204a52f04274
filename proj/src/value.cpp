#include "sqlctx/value.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <stdexcept>

#include "sqlctx/error.hpp"

namespace sqlctx {

std::string_view to_string(Kind kind) {
  switch (kind) {
    case Kind::Null: return "null";
    case Kind::Integer: return "integer";
    case Kind::Real: return "real";
    case Kind::Text: return "text";
  }
  return "?";
}

std::optional<Kind> parse_kind(std::string_view name) {
  std::string lower;
  for (char c : name) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (lower == "integer" || lower == "int") return Kind::Integer;
  if (lower == "real" || lower == "float" || lower == "double") return Kind::Real;
  if (lower == "text" || lower == "string") return Kind::Text;
  return std::nullopt;
}

Value::Value(double v) : data_(v) {
  if (!std::isfinite(v)) throw std::invalid_argument("non-finite real value");
}

double Value::as_number() const {
  if (kind() == Kind::Integer) return static_cast<double>(as_integer());
  return as_real();
}

std::string render(const Value& value) {
  switch (value.kind()) {
    case Kind::Null: return {};
    case Kind::Integer: return std::to_string(value.as_integer());
    case Kind::Real: {
      std::array<char, 64> buf{};
      auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value.as_real());
      return std::string(buf.data(), end);
    }
    case Kind::Text: return value.as_text();
  }
  return {};
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

std::optional<Value> coerce(std::string_view text, Kind kind) {
  if (text.empty()) return Value{};
  switch (kind) {
    case Kind::Null: return std::nullopt;
    case Kind::Text: return Value(std::string(text));
    case Kind::Integer: {
      auto t = trim(text);
      if (!t.empty() && t.front() == '+') t.remove_prefix(1);
      std::int64_t v = 0;
      auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
      if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty()) return std::nullopt;
      return Value(v);
    }
    case Kind::Real: {
      auto t = trim(text);
      if (!t.empty() && t.front() == '+') t.remove_prefix(1);
      double v = 0;
      auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
      if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty() || !std::isfinite(v)) {
        return std::nullopt;
      }
      return Value(v);
    }
  }
  return std::nullopt;
}

int sort_compare(const Value& a, const Value& b) {
  auto rank = [](const Value& v) {
    switch (v.kind()) {
      case Kind::Null: return 0;
      case Kind::Integer:
      case Kind::Real: return 1;
      case Kind::Text: return 2;
    }
    return 3;
  };
  int ra = rank(a), rb = rank(b);
  if (ra != rb) return ra < rb ? -1 : 1;
  if (ra == 0) return 0;
  if (ra == 1) {
    if (a.kind() == Kind::Integer && b.kind() == Kind::Integer) {
      auto x = a.as_integer(), y = b.as_integer();
      return x < y ? -1 : (x > y ? 1 : 0);
    }
    double x = a.as_number(), y = b.as_number();
    return x < y ? -1 : (x > y ? 1 : 0);
  }
  int c = a.as_text().compare(b.as_text());
  return c < 0 ? -1 : (c > 0 ? 1 : 0);
}

}  // namespace sqlctx
