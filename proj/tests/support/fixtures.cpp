#include "support/fixtures.hpp"

#include <map>
#include <stdexcept>

namespace sqlctx::testing {

std::filesystem::path fixture_dir() { return SQLCTX_FIXTURE_DIR; }

Database prepared_database(const std::string& name) {
  static std::map<std::string, Database> cache;
  auto it = cache.find(name);
  if (it == cache.end()) {
    DatabaseBundle bundle = load_database(fixture_dir() / name / "manifest.json");
    Database db = filter_complete_rows(denormalize(bundle.db, bundle.mappings), nullptr);
    it = cache.emplace(name, std::move(db)).first;
  }
  return it->second;
}

std::vector<SuiteRecord> fixture_suite() { return read_suite(fixture_dir() / "suite.jsonl"); }

std::map<std::string, std::vector<std::string>> fixture_templates(const std::string& name) {
  return load_database(fixture_dir() / name / "manifest.json").templates;
}

QuerySpec suite_spec(const std::string& id) {
  for (const auto& r : fixture_suite()) {
    if (r.id == id) return make_query_spec(r.id, r.database, r.question, r.sql);
  }
  throw std::runtime_error("no suite entry " + id);
}

std::filesystem::path scratch_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("sqlctx_test_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace sqlctx::testing
