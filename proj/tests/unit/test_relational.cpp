#include <fstream>

#include "doctest.h"
#include "sqlctx/error.hpp"
#include "support/fixtures.hpp"

using namespace sqlctx;
using sqlctx::testing::fixture_dir;
using sqlctx::testing::scratch_dir;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::Io;
}

void write(const std::filesystem::path& p, const std::string& text) { std::ofstream(p) << text; }

Table numbers(const std::string& name, const std::vector<Value>& values, bool required) {
  Table t(name, {{"id", Kind::Integer, false}, {"v", Kind::Integer, required}});
  std::int64_t i = 0;
  for (const auto& v : values) t.add_row({Value(++i), v});
  return t;
}

}  // namespace

TEST_CASE("wine manifest loads three tables and 555 rows") {
  DatabaseBundle b = load_database(fixture_dir() / "wine_1" / "manifest.json");
  CHECK(b.db.tables().size() == 3);
  CHECK(b.db.total_rows() == 555);
  CHECK(b.db.foreign_keys.size() == 2);
  CHECK(b.db.dummy_documents.size() >= 10);
  CHECK(b.templates.at("wine").size() == 5);
}

TEST_CASE("manifest with zero tables is malformed") {
  auto dir = scratch_dir("zero_tables");
  write(dir / "manifest.json", R"({"name": "x", "tables": []})");
  CHECK(code_of([&] { load_database(dir / "manifest.json"); }) == ErrorCode::ManifestMalformed);
}

TEST_CASE("missing table file and bad cell") {
  auto dir = scratch_dir("bad_cell");
  write(dir / "manifest.json",
        R"({"name": "x", "tables": [{"name": "t", "file": "t.csv",
            "columns": [{"name": "a", "kind": "integer"}, {"name": "b", "kind": "text"}]}]})");
  CHECK(code_of([&] { load_database(dir / "manifest.json"); }) == ErrorCode::MissingTableFile);

  write(dir / "t.csv", "a,b\n1,x\nabc,y\n");
  try {
    load_database(dir / "manifest.json");
    FAIL("expected TypeCoercionFailure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TypeCoercionFailure);
    std::string what = e.what();
    CHECK(what.find("t") != std::string::npos);
    CHECK(what.find("row 1") != std::string::npos);
    CHECK(what.find("column a") != std::string::npos);
  }
}

TEST_CASE("load, save, load round-trips") {
  for (const char* name : {"wine_1", "college_2", "flight_4", "routes12"}) {
    CAPTURE(name);
    DatabaseBundle a = load_database(fixture_dir() / name / "manifest.json");
    auto dir = scratch_dir(std::string("roundtrip_") + name);
    save_database(a, dir);
    DatabaseBundle b = load_database(dir / "manifest.json");
    CHECK(a.db == b.db);
    CHECK(a.mappings == b.mappings);
    CHECK(a.templates == b.templates);
  }
}

TEST_CASE("denormalize adds name columns") {
  DatabaseBundle b = load_database(fixture_dir() / "college_2" / "manifest.json");
  Database d = denormalize(b.db, b.mappings);
  const Table& advisor = d.at("advisor");
  CHECK(advisor.column_index("instructor_name"));
  CHECK(advisor.column_index("student_name"));
  CHECK_FALSE(advisor.column_index("i_ID"));
  const Table& teaches = d.at("teaches");
  auto id = teaches.column_index("ID");
  auto nm = teaches.column_index("instructor_name");
  REQUIRE(id);
  REQUIRE(nm);
  CHECK(*nm == *id + 1);

  // every copied name matches the parent row
  const Table& instructor = d.at("instructor");
  for (const auto& row : teaches.rows()) {
    bool hit = false;
    for (const auto& p : instructor.rows()) {
      if (same_key(p[*instructor.column_index("ID")], row[*id])) {
        hit = p[*instructor.column_index("name")] == row[*nm];
      }
    }
    CHECK(hit);
  }

  SUBCASE("empty mappings are the identity") { CHECK(denormalize(b.db, {}) == b.db); }
  SUBCASE("idempotent") { CHECK(denormalize(d, b.mappings) == d); }
}

TEST_CASE("denormalize errors") {
  Database db;
  db.name = "x";
  db.add_table(Table("parent", {{"id", Kind::Integer, false}, {"name", Kind::Text, true}}));
  Table child("child", {{"pid", Kind::Integer, false}});
  child.add_row({Value(1)});
  child.add_row({Value(99)});
  db.add_table(child);
  Table p = db.at("parent");
  p.add_row({Value(1), Value("one")});
  db.replace_table(p);

  NameMapping m{{"child", "pid"}, "name", "", false};
  CHECK(code_of([&] { denormalize(db, {m}); }) == ErrorCode::UnknownForeignKey);

  db.foreign_keys.push_back({{"child", "pid"}, {"parent", "id"}});
  try {
    denormalize(db, {m});
    FAIL("expected DanglingReference");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DanglingReference);
    CHECK(std::string(e.what()).find("row 1") != std::string::npos);
  }
}

TEST_CASE("filter_complete_rows") {
  Database db;
  db.name = "x";
  db.add_table(numbers("five", {Value(1), Value(), Value(3), Value(), Value(5)}, true));
  db.add_table(numbers("clean", {Value(1), Value(2)}, true));
  db.add_table(numbers("nulls", {Value(), Value()}, true));
  db.add_table(numbers("optional", {Value(), Value(2)}, false));

  std::vector<FilterReport> report;
  Database out = filter_complete_rows(db, &report);
  CHECK(out.at("five").size() == 3);
  CHECK(out.at("clean") == db.at("clean"));
  CHECK(out.at("nulls").size() == 0);
  CHECK(out.at("optional").size() == 2);
  REQUIRE(report.size() == 4);
  CHECK(report[0].removed == 2);
  CHECK(report[2].kept == 0);

  // output is an order-preserving subsequence
  const auto& in_rows = db.at("five").rows();
  std::size_t j = 0;
  for (const auto& row : out.at("five").rows()) {
    while (j < in_rows.size() && !(in_rows[j] == row)) ++j;
    CHECK(j < in_rows.size());
    ++j;
  }
}

TEST_CASE("value coercion and ordering") {
  CHECK(coerce("", Kind::Integer)->is_null());
  CHECK(coerce("411", Kind::Real)->as_real() == 411.0);
  CHECK(render(Value(411.0)) == "411");
  CHECK(render(Value(0.1)) == "0.1");
  CHECK_FALSE(coerce("abc", Kind::Integer));
  CHECK_FALSE(coerce("nan", Kind::Real));
  CHECK_FALSE(coerce("inf", Kind::Real));
  CHECK(sort_compare(Value(), Value(1)) < 0);
  CHECK(sort_compare(Value(2), Value(1.5)) > 0);
  CHECK(sort_compare(Value(9), Value("a")) < 0);
  CHECK(same_key(Value(1), Value(1.0)));
}
