#include "sqlctx/artifact.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <sstream>

#include "sqlctx/error.hpp"

namespace sqlctx {

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr)) {
    throw Error(ErrorCode::Io, "SHA-256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::StaleInputHash, "missing input " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return sha256_hex(buffer.str());
}

void write_text_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
      std::error_code ignored;
      std::filesystem::remove(tmp, ignored);
      throw Error(ErrorCode::Io, "failed writing " + path.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

std::string serialize_artifact(const Artifact& artifact) {
  std::string out = nlohmann::json{{"artifact", artifact.kind}, {"inputs", artifact.inputs}}.dump();
  out += '\n';
  for (const auto& r : artifact.records) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

void write_artifact(const std::filesystem::path& path, const Artifact& artifact) {
  write_text_atomic(path, serialize_artifact(artifact));
}

Artifact read_artifact(const std::filesystem::path& path, std::string_view kind) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::StaleInputHash, "missing upstream file " + path.string());
  Artifact a;
  std::string line;
  bool header = true;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Io, path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
    if (header) {
      if (!j.is_object() || j.value("artifact", "") != kind) {
        throw Error(ErrorCode::StaleInputHash, path.string() + " is not a " + std::string(kind) + " file");
      }
      a.kind = kind;
      a.inputs = j.value("inputs", nlohmann::json::object());
      header = false;
    } else {
      a.records.push_back(std::move(j));
    }
  }
  if (header) throw Error(ErrorCode::StaleInputHash, path.string() + " has no header");
  return a;
}

}  // namespace sqlctx
