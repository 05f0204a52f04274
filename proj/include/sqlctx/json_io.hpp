#pragma once

#include <nlohmann/json.hpp>

#include "sqlctx/executor.hpp"

namespace sqlctx {

nlohmann::json value_to_json(const Value& value);
Value value_from_json(const nlohmann::json& j);

/// {"columns": [...], "rows": [[...]], "ordered": bool}
nlohmann::json result_to_json(const ResultSet& result);
ResultSet result_from_json(const nlohmann::json& j);

}  // namespace sqlctx
