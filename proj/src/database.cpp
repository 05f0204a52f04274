#include "sqlctx/database.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sqlctx/csv.hpp"
#include "sqlctx/error.hpp"

namespace sqlctx {

namespace fs = std::filesystem;
using json = nlohmann::json;

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i]))) {
      return false;
    }
  }
  return true;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// ---------------------------------------------------------------------------
// Table

Table::Table(std::string name, std::vector<Column> columns)
    : name_(std::move(name)), columns_(std::move(columns)) {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    for (std::size_t j = i + 1; j < columns_.size(); ++j) {
      if (iequals(columns_[i].name, columns_[j].name)) {
        throw Error(ErrorCode::ManifestMalformed,
                    "duplicate column '" + columns_[j].name + "' in table " + name_);
      }
    }
  }
}

std::optional<std::size_t> Table::column_index(std::string_view column) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (iequals(columns_[i].name, column)) return i;
  }
  return std::nullopt;
}

void Table::add_row(Row row) {
  if (row.size() != columns_.size()) {
    throw Error(ErrorCode::ManifestMalformed,
                "row arity " + std::to_string(row.size()) + " != " +
                    std::to_string(columns_.size()) + " columns in table " + name_);
  }
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (!row[i].is_null() && row[i].kind() != columns_[i].kind) {
      throw Error(ErrorCode::TypeCoercionFailure,
                  "table " + name_ + ", row " + std::to_string(rows_.size()) + ", column " +
                      columns_[i].name + ": expected " + std::string(to_string(columns_[i].kind)));
    }
  }
  rows_.push_back(std::move(row));
}

Table Table::select_rows(const std::vector<std::size_t>& indices) const {
  Table out(name_, columns_);
  out.rows_.reserve(indices.size());
  for (auto i : indices) out.rows_.push_back(rows_.at(i));
  return out;
}

// ---------------------------------------------------------------------------
// Database

const Table* Database::find(std::string_view table) const {
  for (const auto& t : tables_) {
    if (iequals(t.name(), table)) return &t;
  }
  return nullptr;
}

const Table& Database::at(std::string_view table) const {
  if (const auto* t = find(table)) return *t;
  throw Error(ErrorCode::UnknownTable, std::string(table));
}

void Database::add_table(Table table) {
  if (find(table.name())) {
    throw Error(ErrorCode::ManifestMalformed, "duplicate table " + table.name());
  }
  tables_.push_back(std::move(table));
}

void Database::replace_table(Table table) {
  for (auto& t : tables_) {
    if (iequals(t.name(), table.name())) {
      t = std::move(table);
      return;
    }
  }
  throw Error(ErrorCode::UnknownTable, table.name());
}

std::size_t Database::total_rows() const {
  std::size_t n = 0;
  for (const auto& t : tables_) n += t.size();
  return n;
}

void Database::validate() const {
  auto check = [&](const ColumnRef& ref) {
    const Table* t = find(ref.table);
    if (!t || !t->column_index(ref.column)) {
      throw Error(ErrorCode::ManifestMalformed,
                  "foreign key endpoint " + ref.table + "." + ref.column + " does not exist");
    }
  };
  for (const auto& fk : foreign_keys) {
    check(fk.child);
    check(fk.parent);
  }
}

// ---------------------------------------------------------------------------
// Manifest I/O

namespace {

std::string read_file(const fs::path& path, ErrorCode missing) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(missing, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ColumnRef parse_column_ref(const std::string& text) {
  auto dot = text.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == text.size()) {
    throw Error(ErrorCode::ManifestMalformed, "expected table.column, got '" + text + "'");
  }
  return {text.substr(0, dot), text.substr(dot + 1)};
}

Table load_table(const json& spec, const fs::path& base) {
  std::vector<Column> columns;
  for (const auto& c : spec.at("columns")) {
    auto kind = parse_kind(c.at("kind").get<std::string>());
    if (!kind) {
      throw Error(ErrorCode::ManifestMalformed,
                  "unknown kind '" + c.at("kind").get<std::string>() + "'");
    }
    columns.push_back({c.at("name").get<std::string>(), *kind, c.value("required", false)});
  }
  Table table(spec.at("name").get<std::string>(), std::move(columns));

  fs::path file = base / spec.at("file").get<std::string>();
  auto records = csv::parse(read_file(file, ErrorCode::MissingTableFile));
  if (records.empty()) {
    throw Error(ErrorCode::ManifestMalformed, file.string() + ": missing header row");
  }
  const auto& header = records.front();
  if (header.size() != table.columns().size()) {
    throw Error(ErrorCode::ManifestMalformed, file.string() + ": header has " +
                                                  std::to_string(header.size()) + " fields, manifest declares " +
                                                  std::to_string(table.columns().size()));
  }
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (!iequals(header[i].text, table.columns()[i].name)) {
      throw Error(ErrorCode::ManifestMalformed, file.string() + ": header field '" + header[i].text +
                                                    "' does not match column '" +
                                                    table.columns()[i].name + "'");
    }
  }
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() != table.columns().size()) {
      throw Error(ErrorCode::ManifestMalformed, file.string() + ": record " + std::to_string(r - 1) +
                                                    " has " + std::to_string(rec.size()) + " fields");
    }
    Row row;
    row.reserve(rec.size());
    for (std::size_t c = 0; c < rec.size(); ++c) {
      const auto& column = table.columns()[c];
      std::optional<Value> v;
      if (rec[c].quoted && rec[c].text.empty() && column.kind == Kind::Text) {
        v = Value(std::string());
      } else {
        v = coerce(rec[c].text, column.kind);
      }
      if (!v) {
        throw Error(ErrorCode::TypeCoercionFailure,
                    "table " + table.name() + ", row " + std::to_string(r - 1) + ", column " +
                        column.name + ": '" + rec[c].text + "' is not " +
                        std::string(to_string(column.kind)));
      }
      row.push_back(std::move(*v));
    }
    table.add_row(std::move(row));
  }
  return table;
}

}  // namespace

DatabaseBundle load_database(const fs::path& manifest_path) {
  json manifest;
  try {
    manifest = json::parse(read_file(manifest_path, ErrorCode::ManifestMalformed));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ManifestMalformed, manifest_path.string() + ": " + e.what());
  }
  const fs::path base = manifest_path.parent_path();
  DatabaseBundle bundle;
  try {
    bundle.db.name = manifest.at("name").get<std::string>();
    const auto& tables = manifest.at("tables");
    if (!tables.is_array() || tables.empty()) {
      throw Error(ErrorCode::ManifestMalformed, "manifest declares no tables");
    }
    for (const auto& t : tables) bundle.db.add_table(load_table(t, base));

    for (const auto& fk : manifest.value("foreign_keys", json::array())) {
      bundle.db.foreign_keys.push_back({parse_column_ref(fk.at("child").get<std::string>()),
                                        parse_column_ref(fk.at("parent").get<std::string>())});
    }
    for (const auto& m : manifest.value("mappings", json::array())) {
      bundle.mappings.push_back({parse_column_ref(m.at("id_column").get<std::string>()),
                                 m.at("name_column").get<std::string>(),
                                 m.value("output_column", std::string()), m.value("replace", false)});
    }
    if (manifest.contains("templates")) {
      auto text = read_file(base / manifest.at("templates").get<std::string>(),
                            ErrorCode::ManifestMalformed);
      auto templates = json::parse(text);
      for (auto it = templates.begin(); it != templates.end(); ++it) {
        bundle.templates[it.key()] = it.value().get<std::vector<std::string>>();
      }
    }
    if (manifest.contains("dummy_documents")) {
      std::istringstream in(read_file(base / manifest.at("dummy_documents").get<std::string>(),
                                      ErrorCode::ManifestMalformed));
      std::string line;
      while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) bundle.db.dummy_documents.push_back(line);
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ManifestMalformed, manifest_path.string() + ": " + e.what());
  }
  bundle.db.validate();
  return bundle;
}

void save_database(const DatabaseBundle& bundle, const fs::path& directory) {
  fs::create_directories(directory);
  json manifest;
  manifest["name"] = bundle.db.name;
  manifest["tables"] = json::array();
  for (const auto& table : bundle.db.tables()) {
    json t;
    t["name"] = table.name();
    t["file"] = table.name() + ".csv";
    t["columns"] = json::array();
    for (const auto& c : table.columns()) {
      t["columns"].push_back({{"name", c.name}, {"kind", to_string(c.kind)}, {"required", c.required}});
    }
    manifest["tables"].push_back(t);

    std::ofstream out(directory / (table.name() + ".csv"), std::ios::binary);
    for (std::size_t i = 0; i < table.columns().size(); ++i) {
      if (i) out << ',';
      out << csv::escape(table.columns()[i].name);
    }
    out << '\n';
    for (const auto& row : table.rows()) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out << ',';
        const auto& v = row[i];
        out << csv::escape(render(v), v.kind() == Kind::Text && v.as_text().empty());
      }
      out << '\n';
    }
    if (!out) throw Error(ErrorCode::Io, "failed writing " + (directory / (table.name() + ".csv")).string());
  }
  manifest["foreign_keys"] = json::array();
  for (const auto& fk : bundle.db.foreign_keys) {
    manifest["foreign_keys"].push_back({{"child", fk.child.table + "." + fk.child.column},
                                        {"parent", fk.parent.table + "." + fk.parent.column}});
  }
  manifest["mappings"] = json::array();
  for (const auto& m : bundle.mappings) {
    manifest["mappings"].push_back({{"id_column", m.id_column.table + "." + m.id_column.column},
                                    {"name_column", m.name_column},
                                    {"output_column", m.output_column},
                                    {"replace", m.replace}});
  }
  manifest["templates"] = "templates.json";
  {
    json templates = json::object();
    for (const auto& [table, variants] : bundle.templates) templates[table] = variants;
    std::ofstream(directory / "templates.json") << templates.dump(2) << '\n';
  }
  manifest["dummy_documents"] = "dummy_documents.txt";
  {
    std::ofstream out(directory / "dummy_documents.txt");
    for (const auto& d : bundle.db.dummy_documents) out << d << '\n';
  }
  std::ofstream(directory / "manifest.json") << manifest.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Preprocessing

Database denormalize(const Database& db, const std::vector<NameMapping>& mappings) {
  Database out = db;
  for (const auto& mapping : mappings) {
    auto fk = std::find_if(db.foreign_keys.begin(), db.foreign_keys.end(), [&](const ForeignKey& k) {
      return iequals(k.child.table, mapping.id_column.table) &&
             iequals(k.child.column, mapping.id_column.column);
    });
    if (fk == db.foreign_keys.end()) {
      // a replacing mapping drops its key; seeing its output column means it already ran
      const Table* child = out.find(mapping.id_column.table);
      if (child && !mapping.output_column.empty() && child->column_index(mapping.output_column) &&
          !child->column_index(mapping.id_column.column)) {
        continue;
      }
      throw Error(ErrorCode::UnknownForeignKey,
                  mapping.id_column.table + "." + mapping.id_column.column);
    }
    const Table& parent = db.at(fk->parent.table);
    const Table& child = out.at(fk->child.table);
    std::string output = mapping.output_column.empty()
                             ? parent.name() + "_" + mapping.name_column
                             : mapping.output_column;

    auto id_idx = child.column_index(fk->child.column);
    if (child.column_index(output)) continue;  // already applied
    if (!id_idx) throw Error(ErrorCode::UnknownForeignKey, "missing id column " + fk->child.column);

    auto key_idx = parent.column_index(fk->parent.column);
    auto name_idx = parent.column_index(mapping.name_column);
    if (!key_idx || !name_idx) {
      throw Error(ErrorCode::UnknownForeignKey,
                  "parent column missing in " + parent.name() + " for mapping " + output);
    }

    std::vector<Column> columns;
    for (std::size_t i = 0; i < child.columns().size(); ++i) {
      if (!(mapping.replace && i == *id_idx)) columns.push_back(child.columns()[i]);
      if (i == *id_idx) {
        columns.push_back({output, parent.columns()[*name_idx].kind, child.columns()[i].required});
      }
    }
    Table mapped(child.name(), columns);
    for (std::size_t r = 0; r < child.rows().size(); ++r) {
      const Row& row = child.rows()[r];
      const Value& id = row[*id_idx];
      Value name;
      if (!id.is_null()) {
        auto hit = std::find_if(parent.rows().begin(), parent.rows().end(),
                                [&](const Row& p) { return same_key(p[*key_idx], id); });
        if (hit == parent.rows().end()) {
          throw Error(ErrorCode::DanglingReference,
                      child.name() + " row " + std::to_string(r) + ": " + fk->child.column + "=" +
                          render(id) + " has no row in " + parent.name());
        }
        name = (*hit)[*name_idx];
      }
      Row next;
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (!(mapping.replace && i == *id_idx)) next.push_back(row[i]);
        if (i == *id_idx) next.push_back(name);
      }
      mapped.add_row(std::move(next));
    }
    out.replace_table(std::move(mapped));
    if (mapping.replace) {
      std::erase_if(out.foreign_keys, [&](const ForeignKey& k) {
        return iequals(k.child.table, fk->child.table) && iequals(k.child.column, fk->child.column);
      });
    }
  }
  return out;
}

Database filter_complete_rows(const Database& db, std::vector<FilterReport>* report) {
  Database out;
  out.name = db.name;
  out.foreign_keys = db.foreign_keys;
  out.dummy_documents = db.dummy_documents;
  for (const auto& table : db.tables()) {
    std::vector<std::size_t> keep;
    for (std::size_t r = 0; r < table.rows().size(); ++r) {
      const Row& row = table.rows()[r];
      bool complete = true;
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (table.columns()[c].required && row[c].is_null()) {
          complete = false;
          break;
        }
      }
      if (complete) keep.push_back(r);
    }
    if (report) report->push_back({table.name(), keep.size(), table.size() - keep.size()});
    out.add_table(table.select_rows(keep));
  }
  return out;
}

}  // namespace sqlctx
