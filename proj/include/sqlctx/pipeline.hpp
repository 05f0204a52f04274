#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sqlctx/artifact.hpp"
#include "sqlctx/corpus.hpp"
#include "sqlctx/gateway.hpp"
#include "sqlctx/metrics.hpp"

namespace sqlctx {

struct GridSpec {
  std::vector<std::size_t> context_lengths;
  InfoSpec info;
  std::vector<PositionStrategy> positions;
  std::vector<std::uint64_t> seeds;
  int replicates = 1;

  /// Throws InvalidConfig: lists nonempty, lengths strictly increasing, every
  /// cell a valid CorpusConfig.
  void validate() const;
};

nlohmann::json grid_to_json(const GridSpec& grid);
GridSpec grid_from_json(const nlohmann::json& j);

struct RunManifest {
  std::vector<std::filesystem::path> databases;  // manifest files or their directories
  std::filesystem::path suite;
  GridSpec grid;
  std::optional<EndpointConfig> endpoint;
  PromptMode mode = PromptMode::CoT;
  bool reasoning_model = false;
  std::size_t retrieve_tokens = 0;  // 0 disables retrieval
  std::string retriever = "lexical";
  int concurrency = 1;
  std::string judge = "deterministic";  // or "model"
  std::optional<EndpointConfig> judge_endpoint;

  void validate() const;
};

/// Relative paths resolve against `base_dir`.
RunManifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
/// Reads a JSON run configuration; relative paths resolve against its directory.
RunManifest load_manifest(const std::filesystem::path& path);

/// Path of the manifest file for a database argument (a file or a directory
/// holding manifest.json).
std::filesystem::path manifest_path(const std::filesystem::path& database);

struct PreparedDatabase {
  Database db;
  Templates templates;
  std::string content_hash;  // over every file in the database directory
  std::vector<FilterReport> filter;
};

/// Load, denormalize and filter, keyed by database name.
PreparedDatabase prepare_database(const std::filesystem::path& database);
std::map<std::string, PreparedDatabase> prepare_databases(const std::vector<std::filesystem::path>& databases);

/// Problems found in a suite; empty when it is valid.
std::vector<std::string> validate_suite(const std::vector<SuiteRecord>& suite,
                                        const std::map<std::string, PreparedDatabase>& databases);

// ---------------------------------------------------------------------------
// Artifacts. Each records the hashes of its inputs in the header.

inline constexpr std::string_view kInstancesArtifact = "instances";
inline constexpr std::string_view kRunArtifact = "run";
inline constexpr std::string_view kEvalArtifact = "eval";

struct GenerateStats {
  std::size_t instances = 0;
  std::size_t empty_gold = 0;
  // per context length: {instances, relevant tokens, total tokens}
  std::map<std::size_t, std::array<std::size_t, 3>> by_length;
};

/// One instance per (question x length x position x seed x replicate). Output
/// depends only on the manifest contents and input files.
Artifact generate_instances(const RunManifest& manifest, GenerateStats* stats = nullptr);

std::string describe(const GenerateStats& stats);

struct RunOptions {
  EndpointConfig endpoint;
  PromptMode mode = PromptMode::CoT;
  bool reasoning_model = false;
  std::size_t retrieve_tokens = 0;
  std::string retriever = "lexical";
  int concurrency = 1;
};

/// Builds a client for an endpoint: "mock:echo" and "mock:no-answer" answer
/// in-process from the given (context, question, gold) triples.
std::unique_ptr<ChatClient> make_chat_client(const EndpointConfig& endpoint,
                                             const std::vector<BenchmarkInstance>& known = {});

std::vector<BenchmarkInstance> instances_of(const Artifact& artifact);

/// Queries the model for every instance, `concurrency` requests at a time.
/// Records keep the instance order. `instances_hash` is the hash of the file
/// the instances came from.
Artifact run_instances(const Artifact& instances, const std::string& instances_hash, const RunOptions& options);

/// Labels every run record. Throws StaleInputHash when the run was made from
/// other instances than `instances_hash`.
Artifact judge_run(const Artifact& instances, const std::string& instances_hash, const Artifact& run,
                   const std::string& run_hash, Judge& judge, int concurrency = 1);

/// Throws StaleInputHash when `eval` was not judged against these instances.
EvalReport report_eval(const Artifact& instances, const std::string& instances_hash, const Artifact& eval);

/// Runs `task(i)` for i in [0, n) on up to `workers` threads; rethrows the
/// first failure after all workers stop.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& task);

}  // namespace sqlctx
