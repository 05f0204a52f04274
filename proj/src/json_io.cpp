#include "sqlctx/json_io.hpp"

#include "sqlctx/error.hpp"

namespace sqlctx {

nlohmann::json value_to_json(const Value& value) {
  switch (value.kind()) {
    case Kind::Null: return nullptr;
    case Kind::Integer: return value.as_integer();
    case Kind::Real: return value.as_real();
    case Kind::Text: return value.as_text();
  }
  return nullptr;
}

Value value_from_json(const nlohmann::json& j) {
  if (j.is_null()) return {};
  if (j.is_number_integer()) return Value(j.get<std::int64_t>());
  if (j.is_number_float()) return Value(j.get<double>());
  if (j.is_string()) return Value(j.get<std::string>());
  throw Error(ErrorCode::InvalidConfig, "unsupported JSON cell " + j.dump());
}

nlohmann::json result_to_json(const ResultSet& result) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : result.rows) {
    nlohmann::json r = nlohmann::json::array();
    for (const auto& v : row) r.push_back(value_to_json(v));
    rows.push_back(std::move(r));
  }
  return {{"columns", result.columns}, {"rows", std::move(rows)}, {"ordered", result.ordered}};
}

ResultSet result_from_json(const nlohmann::json& j) {
  ResultSet r;
  r.columns = j.at("columns").get<std::vector<std::string>>();
  for (const auto& row : j.at("rows")) {
    Row out;
    for (const auto& v : row) out.push_back(value_from_json(v));
    r.rows.push_back(std::move(out));
  }
  r.ordered = j.value("ordered", false);
  return r;
}

}  // namespace sqlctx
