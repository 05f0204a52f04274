#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sqlctx/value.hpp"

namespace sqlctx {

using Row = std::vector<Value>;

struct Column {
  std::string name;
  Kind kind = Kind::Text;
  /// Rows with a Null here are dropped by filter_complete_rows.
  bool required = false;

  friend bool operator==(const Column&, const Column&) = default;
};

/// Case-insensitive ASCII comparison for SQL identifiers.
bool iequals(std::string_view a, std::string_view b);
std::string to_lower(std::string_view s);

class Table {
 public:
  Table() = default;
  Table(std::string name, std::vector<Column> columns);

  const std::string& name() const { return name_; }
  const std::vector<Column>& columns() const { return columns_; }
  const std::vector<Row>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }

  /// Index of a column by case-insensitive name.
  std::optional<std::size_t> column_index(std::string_view column) const;

  /// Appends a row after checking arity and per-column kind.
  void add_row(Row row);

  /// Copy containing only the given row indices, in the order given.
  Table select_rows(const std::vector<std::size_t>& indices) const;

  friend bool operator==(const Table&, const Table&) = default;

 private:
  std::string name_;
  std::vector<Column> columns_;
  std::vector<Row> rows_;
};

struct ColumnRef {
  std::string table;
  std::string column;

  friend bool operator==(const ColumnRef&, const ColumnRef&) = default;
};

struct ForeignKey {
  ColumnRef child;
  ColumnRef parent;

  friend bool operator==(const ForeignKey&, const ForeignKey&) = default;
};

/// Adds the parent's human-readable column next to (or in place of) a child
/// identifier column.
struct NameMapping {
  ColumnRef id_column;          // child side, must be the child of a declared FK
  std::string name_column;      // column of the parent table to copy over
  std::string output_column;    // defaults to <parent table>_<name_column>
  bool replace = false;         // drop the id column after joining

  friend bool operator==(const NameMapping&, const NameMapping&) = default;
};

class Database {
 public:
  std::string name;
  std::vector<ForeignKey> foreign_keys;
  std::vector<std::string> dummy_documents;

  /// Tables keep insertion order; lookup is case-insensitive.
  const std::vector<Table>& tables() const { return tables_; }
  const Table* find(std::string_view table) const;
  const Table& at(std::string_view table) const;
  void add_table(Table table);
  void replace_table(Table table);
  std::size_t total_rows() const;

  /// Throws ManifestMalformed when an FK endpoint does not exist.
  void validate() const;

  friend bool operator==(const Database&, const Database&) = default;

 private:
  std::vector<Table> tables_;
};

/// Everything a manifest describes besides the tables themselves.
struct DatabaseBundle {
  Database db;
  std::vector<NameMapping> mappings;
  /// table name -> template variants, loaded from the manifest's template file
  std::map<std::string, std::vector<std::string>> templates;
};

/// Reads a manifest (JSON) plus the per-table CSV files it names.
DatabaseBundle load_database(const std::filesystem::path& manifest_path);

/// Writes a manifest + CSVs that load_database reads back to an equal bundle.
void save_database(const DatabaseBundle& bundle, const std::filesystem::path& directory);

Database denormalize(const Database& db, const std::vector<NameMapping>& mappings);

struct FilterReport {
  std::string table;
  std::size_t kept = 0;
  std::size_t removed = 0;
};

Database filter_complete_rows(const Database& db, std::vector<FilterReport>* report = nullptr);

}  // namespace sqlctx
