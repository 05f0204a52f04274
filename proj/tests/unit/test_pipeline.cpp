#include <atomic>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "sqlctx/error.hpp"
#include "sqlctx/pipeline.hpp"
#include "support/fixtures.hpp"

using namespace sqlctx;
using sqlctx::testing::fixture_dir;
using sqlctx::testing::scratch_dir;
namespace fs = std::filesystem;

namespace {

RunManifest small_manifest(const fs::path& suite = fixture_dir() / "suite.jsonl") {
  RunManifest m;
  m.databases = {fixture_dir() / "wine_1", fixture_dir() / "college_2", fixture_dir() / "flight_4"};
  m.suite = suite;
  m.grid.context_lengths = {1000, 2000};
  m.grid.info.density = 0.5;
  m.grid.positions = {PositionStrategy::Uniform, PositionStrategy::Middle};
  m.grid.seeds = {4};
  return m;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int cli(const std::string& args) {
  std::string command = std::string(SQLCTX_CLI) + " " + args + " >/dev/null 2>&1";
  int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::Io;
}

/// Writes `a` into `dir` as a JSON run configuration and returns its path.
fs::path write_config(const fs::path& dir, const nlohmann::json& a) {
  fs::path p = dir / "run.json";
  std::ofstream(p) << a.dump(2);
  return p;
}

nlohmann::json config_json(const RunManifest& m) {
  nlohmann::json dbs = nlohmann::json::array();
  for (const auto& d : m.databases) dbs.push_back(d.string());
  return {{"databases", dbs}, {"suite", m.suite.string()}, {"grid", grid_to_json(m.grid)}};
}

}  // namespace

TEST_CASE("grid and manifest validation") {
  RunManifest m = small_manifest();
  CHECK_NOTHROW(m.validate());

  auto bad = m;
  bad.grid.context_lengths = {2000, 2000};
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::InvalidConfig);
  bad.grid.context_lengths = {4000, 2000};
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::InvalidConfig);
  bad = m;
  bad.grid.positions.clear();
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::InvalidConfig);
  bad = m;
  bad.grid.info = InfoSpec{};
  bad.grid.info.amount = 1500;  // larger than the 1000-token cell
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::InvalidConfig);
  bad = m;
  bad.grid.info.density = 1.5;
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::InvalidConfig);
  bad = m;
  bad.judge = "model";
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::InvalidConfig);

  nlohmann::json j = {{"databases", {"db/wine_1"}},
                      {"suite", "suite.jsonl"},
                      {"grid", grid_to_json(m.grid)},
                      {"mode", "direct"},
                      {"judge", {{"kind", "model"}, {"endpoint", {{"base_url", "mock:echo"}}}}}};
  RunManifest parsed = manifest_from_json(j, "/base");
  CHECK(parsed.databases.front() == fs::path("/base/db/wine_1"));
  CHECK(parsed.suite == fs::path("/base/suite.jsonl"));
  CHECK(parsed.mode == PromptMode::Direct);
  CHECK(parsed.judge == "model");
  REQUIRE(parsed.judge_endpoint);
  CHECK(parsed.judge_endpoint->base_url == "mock:echo");
  CHECK(grid_to_json(grid_from_json(grid_to_json(m.grid))) == grid_to_json(m.grid));

  j["mode"] = "chatty";
  CHECK(code_of([&] { manifest_from_json(j, "/base"); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([&] { manifest_from_json(nlohmann::json{{"suite", "x"}}, "/base"); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("suite validation reports each problem") {
  auto dbs = prepare_databases({fixture_dir() / "wine_1"});
  CHECK(validate_suite(read_suite(fixture_dir() / "suite_sparse.jsonl"), dbs).empty());
  std::vector<SuiteRecord> suite = {
      {"a", "wine_1", "q", "SELECT COUNT(*) FROM wine WHERE Price > 10", {}, ""},
      {"a", "wine_1", "q", "SELECT COUNT(*) FROM wine WHERE Price > 10", {}, ""},
      {"b", "nowhere", "q", "SELECT 1 FROM wine", {}, ""},
      {"c", "wine_1", "q", "SELEC Name FROM wine", {}, ""},
      {"d", "wine_1", "q", "SELECT Name FROM wine WHERE Vintage > 2000", {}, ""},
      {"e", "wine_1", "q", "SELECT Name FROM wine WHERE Price > 10", {"Ranking"}, ""},
      {"f", "wine_1", "q", "SELECT Name FROM wine WHERE Price > 10", {}, "Hard"},
      {"g", "wine_1", "q", "SELECT Name FROM wine", {}, ""},
  };
  auto problems = validate_suite(suite, dbs);
  auto mentions = [&](const std::string& prefix, const std::string& text) {
    for (const auto& p : problems)
      if (p.rfind(prefix + ":", 0) == 0 && p.find(text) != std::string::npos) return true;
    return false;
  };
  CHECK(mentions("a", "duplicate"));
  CHECK(mentions("b", "unknown database"));
  CHECK(mentions("c", "SyntaxError"));
  CHECK(mentions("d", "UnknownColumn"));
  CHECK(mentions("e", "types"));
  CHECK(mentions("f", "difficulty"));
  CHECK(mentions("g", "no type"));
}

TEST_CASE("generate covers the grid deterministically") {
  RunManifest m = small_manifest();
  GenerateStats stats;
  Artifact a = generate_instances(m, &stats);
  std::size_t questions = read_suite(m.suite).size();
  CHECK(a.records.size() == questions * 2 * 2);
  CHECK(stats.instances == a.records.size());
  CHECK(serialize_artifact(generate_instances(m)) == serialize_artifact(a));
  CHECK(describe(stats).find("1000\t") != std::string::npos);

  std::set<std::string> ids;
  for (const auto& inst : instances_of(a)) {
    ids.insert(inst.instance_id);
    CHECK(inst.provenance.total_tokens <= inst.config.context_tokens);
  }
  CHECK(ids.size() == a.records.size());

  auto replicated = m;
  replicated.grid.replicates = 3;
  replicated.grid.context_lengths = {1000};
  replicated.grid.positions = {PositionStrategy::End};
  Artifact r = generate_instances(replicated);
  CHECK(r.records.size() == questions * 3);
  std::set<std::string> rids;
  for (const auto& rec : r.records) rids.insert(rec.at("instance_id").get<std::string>());
  CHECK(rids.size() == r.records.size());

  auto other_seed = m;
  other_seed.grid.seeds = {5};
  CHECK(generate_instances(other_seed).inputs != a.inputs);
}

TEST_CASE("reference-shaped grid: five lengths at density 0.5, uniform") {
  RunManifest m = small_manifest();
  m.grid.context_lengths = {4000, 8000, 16000, 32000, 64000};
  m.grid.positions = {PositionStrategy::Uniform};
  m.grid.seeds = {1};
  Artifact a = generate_instances(m);
  CHECK(a.records.size() == read_suite(m.suite).size() * 5);
  for (const auto& inst : instances_of(a)) CHECK(inst.provenance.total_tokens <= inst.config.context_tokens);
}

TEST_CASE("amount 2k grid keeps relevant tokens within 2000") {
  RunManifest m = small_manifest();
  m.grid.context_lengths = {4000, 8000};
  m.grid.info = InfoSpec{};
  m.grid.info.amount = 2000;
  for (const auto& inst : instances_of(generate_instances(m))) {
    CHECK(inst.provenance.relevant_tokens <= 2000);
    CHECK(inst.provenance.total_tokens <= inst.config.context_tokens);
  }
}

TEST_CASE("run, judge and report over the in-process mocks") {
  RunManifest m = small_manifest(fixture_dir() / "suite_sparse.jsonl");
  m.databases = {fixture_dir() / "wine_1"};
  m.grid.seeds = {1, 2, 3};
  Artifact instances = generate_instances(m);
  const std::string ih = sha256_hex(serialize_artifact(instances));
  auto by_id = instances_of(instances);

  RunOptions options;
  options.endpoint.base_url = "mock:echo";
  options.concurrency = 3;
  Artifact run = run_instances(instances, ih, options);
  REQUIRE(run.records.size() == instances.records.size());
  for (std::size_t k = 0; k < run.records.size(); ++k) {
    CHECK(run.records[k].at("instance_id") == instances.records[k].at("instance_id"));
    CHECK(run.records[k].at("prompt_hash").get<std::string>().size() == 64);
    CHECK(run.records[k].at("attempts") == 1);
  }
  DeterministicJudge judge;
  Artifact eval = judge_run(instances, ih, run, sha256_hex(serialize_artifact(run)), judge, 2);
  for (const auto& rec : eval.records) CHECK(rec.at("accuracy").get<double>() == 100.0);
  EvalReport report = report_eval(instances, ih, eval);
  for (const auto& row : report.rows) {
    CHECK(row.scores.avg == 100.0);
    for (const auto& [length, score] : row.scores.per_length) CHECK(score == 100.0);
  }

  options.endpoint.base_url = "mock:no-answer";
  Artifact declined = run_instances(instances, ih, options);
  Artifact declined_eval = judge_run(instances, ih, declined, "x", judge);
  std::size_t empty = 0;
  for (std::size_t k = 0; k < by_id.size(); ++k) {
    bool gold_empty = by_id[k].gold.rows.empty();
    empty += gold_empty;
    CHECK(declined_eval.records[k].at("accuracy").get<double>() == (gold_empty ? 100.0 : 0.0));
  }
  CHECK(empty > 0);
  CHECK(empty < by_id.size());

  // Retrieval records its budget and quality figures.
  options.endpoint.base_url = "mock:echo";
  options.retrieve_tokens = 300;
  Artifact rag = run_instances(instances, ih, options);
  for (const auto& rec : rag.records) {
    REQUIRE(rec.contains("retrieval"));
    CHECK(rec["retrieval"]["tokens"].get<std::size_t>() <= 300);
    CHECK(rec["retrieval"]["recall"].get<double>() <= 1.0);
  }
  options.retriever = "endpoint";
  CHECK(code_of([&] { run_instances(instances, ih, options); }) == ErrorCode::InvalidConfig);

  // Chain checks.
  CHECK(code_of([&] { judge_run(instances, "other", run, "x", judge); }) == ErrorCode::StaleInputHash);
  CHECK(code_of([&] { report_eval(instances, "other", eval); }) == ErrorCode::StaleInputHash);
}

TEST_CASE("report reproduces the reference aggregate columns from injected scores") {
  const std::vector<double> scores = {64.0, 61.0, 57.5, 55.1, 44.8};
  Artifact instances{std::string(kInstancesArtifact), {}, {}};
  Artifact eval{std::string(kEvalArtifact), {{"instances", "h"}, {"judge", "injected"}}, {}};
  std::size_t length = 4000;
  for (std::size_t k = 0; k < scores.size(); ++k, length *= 2) {
    BenchmarkInstance inst;
    inst.instance_id = "q" + std::to_string(k);
    inst.types = {"Aggregation"};
    inst.difficulty = "Easy";
    inst.config.context_tokens = length;
    inst.config.info.amount = 2000;
    inst.config.position = PositionStrategy::Uniform;
    instances.records.push_back(instance_to_json(inst));
    eval.records.push_back({{"instance_id", inst.instance_id}, {"accuracy", scores[k]}});
  }
  std::string tsv = render_tsv(report_eval(instances, "h", eval));
  CHECK(tsv.find("overall\tall\t5\t64.0\t61.0\t57.5\t55.1\t44.8\t56.5\t53.5\t59.4\n") != std::string::npos);
}

TEST_CASE("parallel_for visits every index once and rethrows") {
  std::vector<std::atomic<int>> hits(257);
  parallel_for(hits.size(), 4, [&](std::size_t i) { ++hits[i]; });
  for (const auto& h : hits) CHECK(h.load() == 1);
  parallel_for(0, 4, [&](std::size_t) { FAIL("no work expected"); });
  CHECK_THROWS_AS(parallel_for(50, 3,
                               [](std::size_t i) {
                                 if (i == 17) throw Error(ErrorCode::Io, "boom");
                               }),
                  Error);
}

TEST_CASE("command line: chaining, exit codes, byte-identical generate") {
  fs::path dir = scratch_dir("cli");
  RunManifest m = small_manifest(fixture_dir() / "suite_sparse.jsonl");
  m.databases = {fixture_dir() / "wine_1"};
  auto j = config_json(m);
  j["endpoint"] = {{"base_url", "mock:echo"}, {"backoff_ms", 1}, {"max_retries", 1}};
  fs::path config = write_config(dir, j);
  const std::string base = "--config " + config.string() + " --out " + (dir / "out").string();

  CHECK(cli(base + " suite validate") == 0);
  CHECK(cli(base + " judge") == 1);  // nothing has been run yet
  CHECK(cli(base + " generate") == 0);
  std::string first = slurp(dir / "out" / "instances.jsonl");
  CHECK(cli(base + " generate") == 0);
  CHECK(slurp(dir / "out" / "instances.jsonl") == first);
  CHECK(cli(base + " judge") == 1);  // still no run file
  CHECK(cli(base + " run --endpoint mock:echo --concurrency 2") == 0);
  CHECK(cli(base + " judge") == 0);
  CHECK(cli(base + " report --tsv") == 0);
  CHECK(slurp(dir / "out" / "report.tsv").find("overall\tall\t") != std::string::npos);

  // Regenerating with another seed invalidates the run file.
  CHECK(cli(base + " --seed 99 generate") == 0);
  CHECK(slurp(dir / "out" / "instances.jsonl") != first);
  CHECK(cli(base + " judge") == 1);
  CHECK(cli(base + " report") == 1);

  CHECK(cli(base + " run --endpoint http://127.0.0.1:9 --model m") == 2);
  CHECK(cli(base + " run --endpoint mock:echo --mode fast") == 1);
  CHECK(cli("--out " + (dir / "x").string() + " generate") == 1);  // no config

  // A suite with an untyped question fails validation.
  std::ofstream(dir / "bad.jsonl") << R"({"id": "b", "database": "wine_1", "question": "q", "sql": "SELECT Name FROM wine"})"
                                   << '\n';
  CHECK(cli("suite validate --suite " + (dir / "bad.jsonl").string() + " --database " +
            (fixture_dir() / "wine_1").string()) == 1);

  CHECK(cli("--out " + (dir / "ingested").string() + " ingest " + (fixture_dir() / "wine_1").string()) == 0);
  CHECK(fs::exists(dir / "ingested" / "wine_1" / "manifest.json"));
}
