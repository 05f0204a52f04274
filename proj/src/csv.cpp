#include "sqlctx/csv.hpp"

#include "sqlctx/error.hpp"

namespace sqlctx::csv {

std::vector<Record> parse(std::string_view content) {
  std::vector<Record> records;
  Record current;
  Field field;
  bool in_quotes = false;
  bool field_started = false;
  bool record_has_data = false;
  std::size_t line = 1;

  auto end_field = [&] {
    current.push_back(std::move(field));
    field = Field{};
    field_started = false;
  };
  auto end_record = [&] {
    if (record_has_data || !current.empty()) {
      end_field();
      records.push_back(std::move(current));
    }
    current.clear();
    field = Field{};
    field_started = false;
    record_has_data = false;
  };

  for (std::size_t i = 0; i < content.size(); ++i) {
    char c = content[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field.text.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.text.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started) {
          throw Error(ErrorCode::ManifestMalformed,
                      "stray quote inside unquoted CSV field at line " + std::to_string(line));
        }
        in_quotes = true;
        field.quoted = true;
        field_started = true;
        record_has_data = true;
        break;
      case ',':
        end_field();
        record_has_data = true;
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        ++line;
        break;
      default:
        if (field.quoted) {
          throw Error(ErrorCode::ManifestMalformed,
                      "text after closing quote at line " + std::to_string(line));
        }
        field.text.push_back(c);
        field_started = true;
        record_has_data = true;
    }
  }
  if (in_quotes) {
    throw Error(ErrorCode::ManifestMalformed, "unterminated quoted CSV field");
  }
  end_record();
  return records;
}

std::string escape(std::string_view field, bool force_quote) {
  bool needs = force_quote || field.find_first_of(",\"\r\n") != std::string_view::npos;
  if (!needs) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace sqlctx::csv
