#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sqlctx/classify.hpp"
#include "sqlctx/database.hpp"

namespace sqlctx::testing {

std::filesystem::path fixture_dir();

/// Loads a fixture database and applies its mappings and the completeness filter.
Database prepared_database(const std::string& name);

std::vector<SuiteRecord> fixture_suite();

std::map<std::string, std::vector<std::string>> fixture_templates(const std::string& name);

/// Parsed and labelled suite entry by id.
QuerySpec suite_spec(const std::string& id);

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& tag);

}  // namespace sqlctx::testing
