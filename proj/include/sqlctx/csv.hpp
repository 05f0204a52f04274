#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sqlctx::csv {

/// A parsed field; `quoted` distinguishes "" (empty text) from an empty field.
struct Field {
  std::string text;
  bool quoted = false;
};

using Record = std::vector<Field>;

/// RFC-4180 reader: comma separator, CRLF or LF line ends, doubled quotes.
std::vector<Record> parse(std::string_view content);

/// Quotes only when needed. `force_quote` keeps empty text distinct from Null.
std::string escape(std::string_view field, bool force_quote = false);

}  // namespace sqlctx::csv
