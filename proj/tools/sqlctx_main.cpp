#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sqlctx/error.hpp"
#include "sqlctx/pipeline.hpp"

namespace fs = std::filesystem;
using namespace sqlctx;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kEnvironment = 2;

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::EndpointTimeout:
    case ErrorCode::EndpointRejected:
    case ErrorCode::RetriesExhausted:
    case ErrorCode::JudgeUnavailable:
    case ErrorCode::MissingTableFile:
    case ErrorCode::Io:
      return kEnvironment;
    default:
      return kValidation;
  }
}

struct Globals {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
};

RunManifest require_manifest(const Globals& g) {
  if (g.config.empty()) throw Error(ErrorCode::InvalidConfig, "--config is required");
  RunManifest m = load_manifest(g.config);
  if (g.seed) m.grid.seeds = {*g.seed};
  return m;
}

std::optional<RunManifest> optional_manifest(const Globals& g) {
  if (g.config.empty()) return std::nullopt;
  return require_manifest(g);
}

fs::path or_default(const std::string& given, const Globals& g, const char* name) {
  return given.empty() ? fs::path(g.out) / name : fs::path(given);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Long-context holistic reasoning benchmark builder over relational data"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "Run configuration (JSON)");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--seed", g.seed, "Replace the grid's seeds with this one");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Load, denormalize and filter databases, then write them out");
  std::vector<std::string> ingest_paths;
  ingest->add_option("databases", ingest_paths, "Database manifests or directories")->required();

  // suite validate
  auto* suite = app.add_subcommand("suite", "Question suite tools");
  suite->require_subcommand(1);
  auto* validate = suite->add_subcommand("validate", "Parse, label and execute every suite question");
  std::string suite_path;
  std::vector<std::string> suite_dbs;
  validate->add_option("--suite", suite_path, "Suite file (defaults to the configured one)");
  validate->add_option("--database", suite_dbs, "Database manifests or directories");

  // generate
  auto* generate = app.add_subcommand("generate", "Build benchmark instances for every grid cell");
  std::optional<int> replicates;
  generate->add_option("--replicates", replicates, "Instances per grid cell")->check(CLI::PositiveNumber);

  // run
  auto* run = app.add_subcommand("run", "Query a model for every instance");
  std::string run_instances_path, run_path, endpoint, model, mode, retriever, api_key_env;
  std::optional<int> concurrency;
  std::optional<std::size_t> retrieve_tokens;
  bool reasoning_model = false;
  run->add_option("--instances", run_instances_path, "Instance file (default OUT/instances.jsonl)");
  run->add_option("--run-file", run_path, "Run file to write (default OUT/run.jsonl)");
  run->add_option("--endpoint", endpoint, "Base URL, or mock:echo / mock:no-answer");
  run->add_option("--model", model, "Model name sent to the endpoint");
  run->add_option("--mode", mode, "Prompt mode")->check(CLI::IsMember({"cot", "direct"}));
  run->add_option("--concurrency", concurrency, "Requests in flight")->check(CLI::PositiveNumber);
  run->add_option("--retrieve-tokens", retrieve_tokens, "Retrieve this many context tokens before prompting");
  run->add_option("--retriever", retriever, "Retriever")->check(CLI::IsMember({"lexical", "endpoint"}));
  run->add_option("--api-key-env", api_key_env, "Environment variable holding the API token");
  run->add_flag("--reasoning-model", reasoning_model, "Drop the reasoning scaffold from the CoT prompt");

  // judge
  auto* judge = app.add_subcommand("judge", "Label every model answer against its gold rows");
  std::string judge_instances_path, judge_run_path, eval_path, judge_kind, judge_endpoint, judge_model;
  std::optional<int> judge_concurrency;
  judge->add_option("--instances", judge_instances_path, "Instance file (default OUT/instances.jsonl)");
  judge->add_option("--run-file", judge_run_path, "Run file (default OUT/run.jsonl)");
  judge->add_option("--eval-file", eval_path, "Eval file to write (default OUT/eval.jsonl)");
  judge->add_option("--judge", judge_kind, "Judge")->check(CLI::IsMember({"deterministic", "model"}));
  judge->add_option("--judge-endpoint", judge_endpoint, "Endpoint for the model judge");
  judge->add_option("--judge-model", judge_model, "Model name for the model judge");
  judge->add_option("--concurrency", judge_concurrency, "Requests in flight")->check(CLI::PositiveNumber);

  // report
  auto* report = app.add_subcommand("report", "Per-length scores with Avg and weighted averages");
  std::string report_instances_path, report_eval_path;
  bool tsv = false;
  report->add_option("--instances", report_instances_path, "Instance file (default OUT/instances.jsonl)");
  report->add_option("--eval-file", report_eval_path, "Eval file (default OUT/eval.jsonl)");
  report->add_flag("--tsv", tsv, "Tab-separated output");

  // mock-serve
  auto* serve = app.add_subcommand("mock-serve", "Serve a mock chat-completions endpoint over HTTP");
  std::string serve_instances_path, behavior = "echo", host = "127.0.0.1";
  int port = 8080;
  serve->add_option("--instances", serve_instances_path, "Instances whose gold answers the mock knows");
  serve->add_option("--behavior", behavior, "echo or no-answer")->check(CLI::IsMember({"echo", "no-answer"}));
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (ingest->parsed()) {
      for (const auto& path : ingest_paths) {
        fs::path manifest = manifest_path(path);
        DatabaseBundle bundle = load_database(manifest);
        std::vector<FilterReport> filter;
        bundle.db = filter_complete_rows(denormalize(bundle.db, bundle.mappings), &filter);
        fs::path target = fs::path(g.out) / bundle.db.name;
        save_database(bundle, target);
        std::cout << bundle.db.name << ": " << bundle.db.tables().size() << " tables, " << bundle.db.total_rows()
                  << " rows -> " << target.string() << '\n';
        for (const auto& f : filter)
          std::cout << "  " << f.table << ": kept " << f.kept << ", removed " << f.removed << '\n';
      }
      return kOk;
    }

    if (validate->parsed()) {
      auto manifest = optional_manifest(g);
      fs::path suite_file = !suite_path.empty() ? fs::path(suite_path) : manifest ? manifest->suite : fs::path();
      if (suite_file.empty()) throw Error(ErrorCode::InvalidConfig, "--suite or --config is required");
      std::vector<fs::path> dbs(suite_dbs.begin(), suite_dbs.end());
      if (dbs.empty() && manifest) dbs = manifest->databases;
      auto problems = validate_suite(read_suite(suite_file), prepare_databases(dbs));
      for (const auto& p : problems) std::cerr << p << '\n';
      if (!problems.empty()) {
        std::cerr << problems.size() << " problem(s)\n";
        return kValidation;
      }
      std::cout << "suite ok: " << read_suite(suite_file).size() << " questions\n";
      return kOk;
    }

    if (generate->parsed()) {
      RunManifest manifest = require_manifest(g);
      if (replicates) manifest.grid.replicates = *replicates;
      GenerateStats stats;
      Artifact artifact = generate_instances(manifest, &stats);
      fs::path target = fs::path(g.out) / "instances.jsonl";
      write_artifact(target, artifact);
      std::cerr << describe(stats);
      std::cout << target.string() << '\n';
      return kOk;
    }

    if (run->parsed()) {
      auto manifest = optional_manifest(g);
      RunOptions options;
      if (manifest) {
        if (manifest->endpoint) options.endpoint = *manifest->endpoint;
        options.mode = manifest->mode;
        options.reasoning_model = manifest->reasoning_model;
        options.retrieve_tokens = manifest->retrieve_tokens;
        options.retriever = manifest->retriever;
        options.concurrency = manifest->concurrency;
      }
      if (!endpoint.empty()) options.endpoint.base_url = endpoint;
      if (!model.empty()) options.endpoint.model = model;
      if (!api_key_env.empty()) options.endpoint.auth_env = api_key_env;
      if (!mode.empty()) options.mode = *parse_prompt_mode(mode);
      if (reasoning_model) options.reasoning_model = true;
      if (retrieve_tokens) options.retrieve_tokens = *retrieve_tokens;
      if (!retriever.empty()) options.retriever = retriever;
      if (concurrency) options.concurrency = *concurrency;
      if (options.endpoint.base_url.empty()) throw Error(ErrorCode::InvalidConfig, "--endpoint is required");

      fs::path instances_file = or_default(run_instances_path, g, "instances.jsonl");
      Artifact instances = read_artifact(instances_file, kInstancesArtifact);
      Artifact result = run_instances(instances, sha256_file(instances_file), options);
      fs::path target = or_default(run_path, g, "run.jsonl");
      write_artifact(target, result);
      std::cout << target.string() << '\n';
      return kOk;
    }

    if (judge->parsed()) {
      auto manifest = optional_manifest(g);
      std::string kind = !judge_kind.empty() ? judge_kind : manifest ? manifest->judge : "deterministic";
      fs::path instances_file = or_default(judge_instances_path, g, "instances.jsonl");
      fs::path run_file = or_default(judge_run_path, g, "run.jsonl");
      Artifact run_artifact = read_artifact(run_file, kRunArtifact);
      Artifact instances = read_artifact(instances_file, kInstancesArtifact);
      int workers = judge_concurrency ? *judge_concurrency : manifest ? manifest->concurrency : 1;

      std::unique_ptr<ChatClient> client;
      std::unique_ptr<Judge> chosen;
      if (kind == "model") {
        EndpointConfig config;
        if (manifest && manifest->judge_endpoint) config = *manifest->judge_endpoint;
        else if (manifest && manifest->endpoint) config = *manifest->endpoint;
        if (!judge_endpoint.empty()) config.base_url = judge_endpoint;
        if (!judge_model.empty()) config.model = judge_model;
        if (config.base_url.empty()) throw Error(ErrorCode::InvalidConfig, "--judge-endpoint is required");
        client = make_chat_client(config);
        chosen = std::make_unique<ModelJudge>(*client);
      } else {
        chosen = std::make_unique<DeterministicJudge>();
      }
      Artifact eval = judge_run(instances, sha256_file(instances_file), run_artifact, sha256_file(run_file), *chosen,
                                workers);
      fs::path target = or_default(eval_path, g, "eval.jsonl");
      write_artifact(target, eval);
      std::cout << target.string() << '\n';
      return kOk;
    }

    if (report->parsed()) {
      fs::path instances_file = or_default(report_instances_path, g, "instances.jsonl");
      fs::path eval_file = or_default(report_eval_path, g, "eval.jsonl");
      Artifact eval = read_artifact(eval_file, kEvalArtifact);
      Artifact instances = read_artifact(instances_file, kInstancesArtifact);
      EvalReport result = report_eval(instances, sha256_file(instances_file), eval);
      std::string text = tsv ? render_tsv(result) : render_text(result);
      write_text_atomic(fs::path(g.out) / (tsv ? "report.tsv" : "report.txt"), text);
      std::cout << text;
      return kOk;
    }

    if (serve->parsed()) {
      auto parsed = parse_mock_behavior(behavior);
      auto responder = std::make_shared<MockResponder>(*parsed);
      if (!serve_instances_path.empty())
        for (const auto& instance : instances_of(read_artifact(serve_instances_path, kInstancesArtifact)))
          responder->add(instance);
      MockServer server(responder);
      std::cout << "serving mock endpoint on http://" << host << ':' << port << std::endl;
      server.listen(host, port);
      return kOk;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kEnvironment;
  }
  return kOk;
}
