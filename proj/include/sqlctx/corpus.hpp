#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sqlctx/classify.hpp"
#include "sqlctx/database.hpp"
#include "sqlctx/executor.hpp"
#include "sqlctx/tokens.hpp"

namespace sqlctx {

using Templates = std::map<std::string, std::vector<std::string>>;

enum class PositionStrategy { Uniform, Beginning, Middle, End, Bimodal };

std::string_view to_string(PositionStrategy position);
std::optional<PositionStrategy> parse_position(std::string_view name);

/// One verbalized row (or dummy sentence). Dummy documents have an empty table.
struct Document {
  std::string text;
  std::string table;
  std::size_t row = 0;  // row index in the table, or index into the dummy pool
  bool relevant = false;
  std::size_t tokens = 0;

  friend bool operator==(const Document&, const Document&) = default;
};

struct InfoSpec {
  std::optional<std::size_t> amount;  // fixed |c_q| in tokens
  std::optional<double> density;      // |c_q| / |c|

  friend bool operator==(const InfoSpec&, const InfoSpec&) = default;
};

struct CorpusConfig {
  std::size_t context_tokens = 0;
  InfoSpec info;
  PositionStrategy position = PositionStrategy::Uniform;
  std::uint64_t seed = 0;

  /// Throws InvalidConfig unless exactly one info mode is set, the density is in
  /// (0, 1], and 0 < resolved info budget <= context_tokens.
  void validate() const;
  /// amount, or floor(density * context_tokens).
  std::size_t info_budget() const;

  friend bool operator==(const CorpusConfig&, const CorpusConfig&) = default;
};

struct Partition {
  std::vector<std::string> relevant;    // D_q, in database order
  std::vector<std::string> irrelevant;  // D_not_q
};

/// Splits tables by whether the query references them. Throws UnknownTable.
Partition partition_tables(const Database& db, const QuerySpec& spec);

/// Substitutes `{column}` placeholders with rendered cells. Newlines in the
/// result are replaced by spaces so one document is always one line.
std::string verbalize_row(const Table& table, const Row& row, std::string_view template_text);

/// Column equality between two tables of the query (from ON clauses and
/// WHERE equalities), used to keep sampled join partners together.
struct JoinLink {
  std::string left_table, left_column;
  std::string right_table, right_column;
};

std::vector<JoinLink> join_links(const QueryAst& ast, const Database& db);

struct SampleResult {
  std::vector<Document> documents;  // in sampling order
  bool infeasible = false;          // budget > 0 but the first candidate did not fit
  /// Tokens of the first candidate that was refused, if the pool was not exhausted.
  std::optional<std::size_t> refused_tokens;
};

/// Draws rows without replacement. Each step picks a table with probability
/// proportional to its remaining rows; within a table, rows sharing a join-key
/// value with rows already drawn from a linked table come first. Each row is
/// verbalized with the table's template variants in a seeded rotation.
/// Accumulation stops before the first document that would exceed `budget`.
SampleResult sample_documents(const Database& db, const std::vector<std::string>& tables,
                              std::size_t budget, const Templates& templates,
                              const TokenCounter& counter, std::uint64_t seed,
                              const std::vector<JoinLink>& links = {});

/// Cycles the dummy pool (seeded order) until the next one would exceed `budget`.
std::vector<Document> fill_with_dummies(const std::vector<std::string>& pool, std::size_t budget,
                                        const TokenCounter& counter, std::uint64_t seed);

struct Arrangement {
  std::vector<Document> documents;
  std::vector<std::size_t> relevant_positions;  // 0-based, ascending
};

/// Relevant documents are shuffled with `seed`, then placed:
/// Beginning/End as one block, Middle after ceil(I/2) irrelevant documents,
/// Bimodal with ceil(R/2) at the head and the rest at the tail, Uniform at
/// 0-based slots floor(k*N/(R+1)) - 1 for k = 1..R (N = I + R).
Arrangement arrange_documents(std::vector<Document> relevant, std::vector<Document> irrelevant,
                              PositionStrategy position, std::uint64_t seed);

std::string join_documents(const std::vector<Document>& documents);

std::string assemble_context(const std::vector<Document>& relevant, const std::vector<Document>& irrelevant,
                             PositionStrategy position, std::uint64_t seed);

struct Provenance {
  std::map<std::string, std::vector<std::size_t>> relevant_rows;    // ascending row ids
  std::map<std::string, std::vector<std::size_t>> irrelevant_rows;  // ascending row ids
  std::vector<std::size_t> dummy_documents;                         // pool indices, in use order
  std::vector<std::size_t> relevant_positions;
  std::size_t document_count = 0;
  std::size_t relevant_tokens = 0;
  std::size_t irrelevant_tokens = 0;
  std::size_t total_tokens = 0;
  int attempts = 1;               // sampling rounds spent looking for a nonempty gold
  std::uint64_t sample_seed = 0;  // seed of the round that was kept

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct BenchmarkInstance {
  std::string instance_id;
  std::string database;
  std::string query_id;
  std::string question;
  std::string sql;
  std::vector<std::string> types;
  std::string difficulty;
  CorpusConfig config;
  std::string context;
  ResultSet gold;
  Provenance provenance;

  /// Context split back into its documents.
  std::vector<std::string> documents() const;

  friend bool operator==(const BenchmarkInstance&, const BenchmarkInstance&) = default;
};

struct BuildOptions {
  TokenCounter counter;
  int max_attempts = 6;  // first draw plus five resamples when gold is empty
};

/// Runs partition, sampling, execution on the sampled subtables and placement.
BenchmarkInstance build_instance(const Database& db, const Templates& templates, const QuerySpec& spec,
                                 const CorpusConfig& config, const BuildOptions& options = {});

/// D_q' rebuilt from provenance: the referenced tables restricted to sampled rows.
Database sampled_database(const Database& db, const Provenance& provenance);

std::string instance_id(const std::string& query_id, const CorpusConfig& config);

nlohmann::json instance_to_json(const BenchmarkInstance& instance);
BenchmarkInstance instance_from_json(const nlohmann::json& j);

}  // namespace sqlctx
