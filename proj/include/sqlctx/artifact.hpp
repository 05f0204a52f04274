#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace sqlctx {

std::string sha256_hex(std::string_view bytes);
/// Hash of a file's bytes; throws Error(StaleInputHash) when it is missing.
std::string sha256_file(const std::filesystem::path& path);

/// Writes via a sibling temporary file and rename, so readers never observe a
/// partial file and a failed write leaves nothing behind.
void write_text_atomic(const std::filesystem::path& path, std::string_view content);

/// Line-delimited JSON artifact. The first line is a header
/// {"artifact": kind, "inputs": {...}} recording the hashes of upstream files.
struct Artifact {
  std::string kind;
  nlohmann::json inputs = nlohmann::json::object();
  std::vector<nlohmann::json> records;
};

std::string serialize_artifact(const Artifact& artifact);
void write_artifact(const std::filesystem::path& path, const Artifact& artifact);
/// Throws StaleInputHash if the file is missing or is not a `kind` artifact.
Artifact read_artifact(const std::filesystem::path& path, std::string_view kind);

}  // namespace sqlctx
