#include "sqlctx/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "sqlctx/error.hpp"
#include "sqlctx/executor.hpp"
#include "sqlctx/random.hpp"
#include "sqlctx/sql_parser.hpp"

namespace sqlctx {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <typename T>
T field(const json& j, const char* key, const char* where) {
  if (!j.contains(key)) throw Error(ErrorCode::InvalidConfig, std::string(where) + ": missing \"" + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string(where) + "." + key + ": " + e.what());
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

void GridSpec::validate() const {
  if (context_lengths.empty()) throw Error(ErrorCode::InvalidConfig, "grid.context_lengths is empty");
  if (positions.empty()) throw Error(ErrorCode::InvalidConfig, "grid.positions is empty");
  if (seeds.empty()) throw Error(ErrorCode::InvalidConfig, "grid.seeds is empty");
  if (replicates < 1) throw Error(ErrorCode::InvalidConfig, "grid.replicates must be at least 1");
  for (std::size_t k = 1; k < context_lengths.size(); ++k)
    if (context_lengths[k] <= context_lengths[k - 1])
      throw Error(ErrorCode::InvalidConfig, "grid.context_lengths must be strictly increasing");
  for (std::size_t length : context_lengths) {
    CorpusConfig cell;
    cell.context_tokens = length;
    cell.info = info;
    cell.validate();
  }
}

json grid_to_json(const GridSpec& grid) {
  json info = json::object();
  if (grid.info.amount) info["amount"] = *grid.info.amount;
  if (grid.info.density) info["density"] = *grid.info.density;
  json positions = json::array();
  for (auto p : grid.positions) positions.push_back(std::string(to_string(p)));
  return {{"context_lengths", grid.context_lengths},
          {"info", info},
          {"positions", positions},
          {"seeds", grid.seeds},
          {"replicates", grid.replicates}};
}

GridSpec grid_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "grid must be an object");
  GridSpec grid;
  grid.context_lengths = field<std::vector<std::size_t>>(j, "context_lengths", "grid");
  json info = field<json>(j, "info", "grid");
  if (!info.is_object()) throw Error(ErrorCode::InvalidConfig, "grid.info must be an object");
  if (info.contains("amount")) grid.info.amount = field<std::size_t>(info, "amount", "grid.info");
  if (info.contains("density")) grid.info.density = field<double>(info, "density", "grid.info");
  for (const auto& name : field<std::vector<std::string>>(j, "positions", "grid")) {
    auto p = parse_position(name);
    if (!p) throw Error(ErrorCode::InvalidConfig, "unknown position \"" + name + "\"");
    grid.positions.push_back(*p);
  }
  grid.seeds = field<std::vector<std::uint64_t>>(j, "seeds", "grid");
  if (j.contains("replicates")) grid.replicates = field<int>(j, "replicates", "grid");
  return grid;
}

void RunManifest::validate() const {
  if (databases.empty()) throw Error(ErrorCode::InvalidConfig, "no databases configured");
  if (suite.empty()) throw Error(ErrorCode::InvalidConfig, "no suite configured");
  grid.validate();
  if (endpoint) endpoint->validate();
  if (judge_endpoint) judge_endpoint->validate();
  if (concurrency < 1) throw Error(ErrorCode::InvalidConfig, "concurrency must be at least 1");
  if (retriever != "lexical" && retriever != "endpoint")
    throw Error(ErrorCode::InvalidConfig, "retriever must be lexical or endpoint");
  if (judge != "deterministic" && judge != "model")
    throw Error(ErrorCode::InvalidConfig, "judge must be deterministic or model");
  if (judge == "model" && !judge_endpoint && !endpoint)
    throw Error(ErrorCode::InvalidConfig, "model judge needs an endpoint");
}

RunManifest manifest_from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "run configuration must be a JSON object");
  RunManifest m;
  for (const auto& d : field<std::vector<std::string>>(j, "databases", "config"))
    m.databases.push_back(resolve(base_dir, d));
  m.suite = resolve(base_dir, field<std::string>(j, "suite", "config"));
  m.grid = grid_from_json(field<json>(j, "grid", "config"));
  if (j.contains("endpoint")) m.endpoint = endpoint_from_json(j.at("endpoint"));
  if (j.contains("mode")) {
    auto mode = parse_prompt_mode(field<std::string>(j, "mode", "config"));
    if (!mode) throw Error(ErrorCode::InvalidConfig, "mode must be cot or direct");
    m.mode = *mode;
  }
  if (j.contains("reasoning_model")) m.reasoning_model = field<bool>(j, "reasoning_model", "config");
  if (j.contains("retrieve_tokens")) m.retrieve_tokens = field<std::size_t>(j, "retrieve_tokens", "config");
  if (j.contains("retriever")) m.retriever = field<std::string>(j, "retriever", "config");
  if (j.contains("concurrency")) m.concurrency = field<int>(j, "concurrency", "config");
  if (j.contains("judge")) {
    const json& judge = j.at("judge");
    if (judge.is_string()) {
      m.judge = judge.get<std::string>();
    } else if (judge.is_object()) {
      m.judge = judge.value("kind", std::string("model"));
      if (judge.contains("endpoint")) m.judge_endpoint = endpoint_from_json(judge.at("endpoint"));
    } else {
      throw Error(ErrorCode::InvalidConfig, "judge must be a string or an object");
    }
  }
  return m;
}

RunManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read run configuration " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::InvalidConfig, path.string() + " is not valid JSON");
  return manifest_from_json(j, path.parent_path());
}

fs::path manifest_path(const fs::path& database) {
  return fs::is_directory(database) ? database / "manifest.json" : database;
}

// ---------------------------------------------------------------------------
// Databases and suites

PreparedDatabase prepare_database(const fs::path& database) {
  fs::path manifest = manifest_path(database);
  DatabaseBundle bundle = load_database(manifest);
  PreparedDatabase out;
  out.db = filter_complete_rows(denormalize(bundle.db, bundle.mappings), &out.filter);
  out.templates = std::move(bundle.templates);

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(manifest.parent_path()))
    if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::string material;
  for (const auto& f : files) material += f.filename().string() + ':' + sha256_file(f) + '\n';
  out.content_hash = sha256_hex(material);
  return out;
}

std::map<std::string, PreparedDatabase> prepare_databases(const std::vector<fs::path>& databases) {
  std::map<std::string, PreparedDatabase> out;
  for (const auto& d : databases) {
    PreparedDatabase prepared = prepare_database(d);
    std::string name = prepared.db.name;
    if (!out.emplace(name, std::move(prepared)).second)
      throw Error(ErrorCode::InvalidConfig, "database " + name + " configured twice");
  }
  return out;
}

std::vector<std::string> validate_suite(const std::vector<SuiteRecord>& suite,
                                        const std::map<std::string, PreparedDatabase>& databases) {
  std::vector<std::string> problems;
  std::set<std::string> ids;
  for (const auto& record : suite) {
    auto fail = [&](const std::string& message) { problems.push_back(record.id + ": " + message); };
    if (!ids.insert(record.id).second) fail("duplicate id");
    auto db = databases.find(record.database);
    if (db == databases.end()) {
      fail("unknown database " + record.database);
      continue;
    }
    QuerySpec spec;
    try {
      spec = make_query_spec(record.id, record.database, record.question, record.sql);
    } catch (const Error& e) {
      fail(e.what());
      continue;
    }
    if (spec.types.empty()) fail("query has no type (types must be nonempty)");
    if (!record.types.empty()) {
      std::set<std::string> annotated(record.types.begin(), record.types.end()), derived;
      for (auto t : spec.types) derived.insert(std::string(to_string(t)));
      if (annotated != derived) fail("annotated types differ from the derived ones");
    }
    if (!record.difficulty.empty() && record.difficulty != to_string(spec.difficulty))
      fail("annotated difficulty " + record.difficulty + " differs from derived " +
           std::string(to_string(spec.difficulty)));
    try {
      execute(spec.ast, db->second.db);
    } catch (const Error& e) {
      fail(e.what());
    }
    for (const auto& table : referenced_tables(spec.ast)) {
      const Table* t = db->second.db.find(table);
      if (!t) continue;  // already reported by execute
      bool has_template = false;
      for (const auto& [name, variants] : db->second.templates)
        if (iequals(name, t->name()) && !variants.empty()) has_template = true;
      if (!has_template) fail("no verbalization template for table " + t->name());
    }
  }
  return problems;
}

// ---------------------------------------------------------------------------
// Generate

Artifact generate_instances(const RunManifest& manifest, GenerateStats* stats) {
  manifest.validate();
  auto databases = prepare_databases(manifest.databases);
  auto suite = read_suite(manifest.suite);
  auto problems = validate_suite(suite, databases);
  if (!problems.empty()) throw Error(ErrorCode::InvalidConfig, "invalid suite: " + problems.front());

  Artifact artifact;
  artifact.kind = std::string(kInstancesArtifact);
  json db_hashes = json::object();
  for (const auto& [name, prepared] : databases) db_hashes[name] = prepared.content_hash;
  artifact.inputs = {{"grid", grid_to_json(manifest.grid)},
                     {"suite", sha256_file(manifest.suite)},
                     {"databases", db_hashes}};

  GenerateStats local;
  for (const auto& record : suite) {
    const PreparedDatabase& db = databases.at(record.database);
    QuerySpec spec = make_query_spec(record.id, record.database, record.question, record.sql);
    for (std::size_t length : manifest.grid.context_lengths)
      for (PositionStrategy position : manifest.grid.positions)
        for (std::uint64_t seed : manifest.grid.seeds)
          for (int r = 0; r < manifest.grid.replicates; ++r) {
            CorpusConfig config;
            config.context_tokens = length;
            config.info = manifest.grid.info;
            config.position = position;
            config.seed = r == 0 ? seed : derive_seed(seed, static_cast<std::uint64_t>(r));
            BenchmarkInstance instance = build_instance(db.db, db.templates, spec, config);
            ++local.instances;
            if (instance.gold.rows.empty()) ++local.empty_gold;
            auto& cell = local.by_length[length];
            ++cell[0];
            cell[1] += instance.provenance.relevant_tokens;
            cell[2] += instance.provenance.total_tokens;
            artifact.records.push_back(instance_to_json(instance));
          }
  }
  if (stats) *stats = local;
  return artifact;
}

std::string describe(const GenerateStats& stats) {
  std::ostringstream out;
  out << stats.instances << " instances, " << stats.empty_gold << " with empty gold\n";
  out << "length\tinstances\tmean_relevant_tokens\tmean_total_tokens\n";
  for (const auto& [length, cell] : stats.by_length) {
    double n = static_cast<double>(std::max<std::size_t>(cell[0], 1));
    out << length << '\t' << cell[0] << '\t' << format_score(static_cast<double>(cell[1]) / n) << '\t'
        << format_score(static_cast<double>(cell[2]) / n) << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Run

std::unique_ptr<ChatClient> make_chat_client(const EndpointConfig& endpoint,
                                             const std::vector<BenchmarkInstance>& known) {
  const std::string prefix = "mock:";
  if (endpoint.base_url.rfind(prefix, 0) == 0) {
    auto behavior = parse_mock_behavior(endpoint.base_url.substr(prefix.size()));
    if (!behavior) throw Error(ErrorCode::InvalidConfig, "unknown mock endpoint " + endpoint.base_url);
    auto responder = std::make_shared<MockResponder>(*behavior);
    for (const auto& instance : known) responder->add(instance);
    return std::make_unique<MockChatClient>(responder, endpoint.model);
  }
  return std::make_unique<HttpChatClient>(endpoint);
}

std::vector<BenchmarkInstance> instances_of(const Artifact& artifact) {
  std::vector<BenchmarkInstance> out;
  out.reserve(artifact.records.size());
  for (const auto& r : artifact.records) out.push_back(instance_from_json(r));
  return out;
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& task) {
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n && !failed; i = next++) {
      try {
        task(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), std::max<std::size_t>(n, 1));
  std::vector<std::thread> threads;
  for (std::size_t k = 1; k < count; ++k) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

Artifact run_instances(const Artifact& instances_artifact, const std::string& instances_hash,
                       const RunOptions& options) {
  options.endpoint.validate();
  if (options.concurrency < 1) throw Error(ErrorCode::InvalidConfig, "concurrency must be at least 1");
  std::vector<BenchmarkInstance> instances = instances_of(instances_artifact);
  const bool mock = options.endpoint.base_url.rfind("mock:", 0) == 0;

  std::unique_ptr<Retriever> retriever;
  if (options.retrieve_tokens > 0) {
    if (options.retriever == "lexical") {
      retriever = std::make_unique<LexicalRetriever>();
    } else if (options.retriever == "endpoint") {
      if (mock) throw Error(ErrorCode::InvalidConfig, "the endpoint retriever needs an HTTP endpoint");
      retriever = std::make_unique<EmbeddingRetriever>(options.endpoint);
    } else {
      throw Error(ErrorCode::InvalidConfig, "retriever must be lexical or endpoint");
    }
  }

  // Contexts the model will see, after optional retrieval.
  std::vector<std::optional<RetrievalResult>> retrieved(instances.size());
  std::vector<BenchmarkInstance> shown = instances;
  if (retriever) {
    for (std::size_t k = 0; k < instances.size(); ++k) {
      retrieved[k] = retrieve(instances[k].documents(), instances[k].question, options.retrieve_tokens, *retriever);
      shown[k].context = retrieved[k]->context;
    }
  }

  auto client = make_chat_client(options.endpoint, shown);
  std::vector<json> records(instances.size());
  parallel_for(instances.size(), options.concurrency, [&](std::size_t k) {
    std::string prompt = render_prompt(shown[k], options.mode, options.reasoning_model);
    auto started = std::chrono::steady_clock::now();
    ModelResponse response = query_model(*client, prompt);
    if (mock)
      response.latency_ms =
          std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started).count();
    json record = {{"instance_id", instances[k].instance_id},
                   {"model", client->model_name()},
                   {"mode", std::string(to_string(options.mode))},
                   {"prompt_hash", sha256_hex(prompt)},
                   {"raw_response", response.raw},
                   {"answer", response.answer},
                   {"answer_marker_found", response.marker_found},
                   {"attempts", response.attempts},
                   {"latency_ms", response.latency_ms}};
    if (retrieved[k]) {
      auto quality = retrieval_quality(retrieved[k]->kept, instances[k].provenance.relevant_positions);
      record["retrieval"] = {{"retriever", retriever->kind()},
                             {"budget", options.retrieve_tokens},
                             {"tokens", retrieved[k]->tokens},
                             {"kept", retrieved[k]->kept},
                             {"precision", quality.precision},
                             {"recall", quality.recall}};
    }
    records[k] = std::move(record);
  });

  Artifact run;
  run.kind = std::string(kRunArtifact);
  json endpoint = endpoint_to_json(options.endpoint);
  run.inputs = {{"instances", instances_hash},
                {"endpoint", endpoint},
                {"mode", std::string(to_string(options.mode))},
                {"reasoning_model", options.reasoning_model},
                {"retrieve_tokens", options.retrieve_tokens},
                {"retriever", options.retrieve_tokens ? options.retriever : std::string()}};
  run.records = std::move(records);
  return run;
}

// ---------------------------------------------------------------------------
// Judge and report

Artifact judge_run(const Artifact& instances_artifact, const std::string& instances_hash, const Artifact& run,
                   const std::string& run_hash, Judge& judge, int concurrency) {
  if (run.inputs.value("instances", std::string()) != instances_hash)
    throw Error(ErrorCode::StaleInputHash, "run file was produced from different instances");
  std::map<std::string, BenchmarkInstance> by_id;
  for (auto& instance : instances_of(instances_artifact)) by_id.emplace(instance.instance_id, std::move(instance));

  std::vector<json> records(run.records.size());
  parallel_for(run.records.size(), concurrency, [&](std::size_t k) {
    const json& r = run.records[k];
    std::string id = r.value("instance_id", std::string());
    auto it = by_id.find(id);
    if (it == by_id.end()) throw Error(ErrorCode::StaleInputHash, "run record for unknown instance " + id);
    std::string answer = r.value("answer", std::string());
    auto labels = judge_rows(it->second.question, answer, it->second.gold, judge);
    json names = json::array();
    for (auto l : labels) names.push_back(std::string(to_string(l)));
    records[k] = {{"instance_id", id},
                  {"labels", names},
                  {"accuracy", score_instance(labels)},
                  {"judge_kind", judge.kind()}};
  });

  Artifact eval;
  eval.kind = std::string(kEvalArtifact);
  eval.inputs = {{"instances", instances_hash}, {"run", run_hash}, {"judge", judge.kind()}};
  eval.records = std::move(records);
  return eval;
}

EvalReport report_eval(const Artifact& instances_artifact, const std::string& instances_hash, const Artifact& eval) {
  if (eval.inputs.value("instances", std::string()) != instances_hash)
    throw Error(ErrorCode::StaleInputHash, "eval file was judged against different instances");
  std::map<std::string, BenchmarkInstance> by_id;
  for (auto& instance : instances_of(instances_artifact)) by_id.emplace(instance.instance_id, std::move(instance));
  std::vector<ScoredInstance> scored;
  for (const auto& r : eval.records) {
    std::string id = r.value("instance_id", std::string());
    auto it = by_id.find(id);
    if (it == by_id.end()) throw Error(ErrorCode::StaleInputHash, "eval record for unknown instance " + id);
    const BenchmarkInstance& instance = it->second;
    scored.push_back({id, instance.config.context_tokens, instance.types, instance.difficulty,
                      std::string(to_string(instance.config.position)), r.at("accuracy").get<double>()});
  }
  return build_report(scored, eval.inputs.value("judge", std::string()));
}

}  // namespace sqlctx
