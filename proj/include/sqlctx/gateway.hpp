#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sqlctx/corpus.hpp"
#include "sqlctx/judge.hpp"
#include "sqlctx/tokens.hpp"

namespace sqlctx {

// ---------------------------------------------------------------------------
// Prompts

enum class PromptMode { CoT, Direct };

std::string_view to_string(PromptMode mode);  // "cot" / "direct"
std::optional<PromptMode> parse_prompt_mode(std::string_view name);

/// Fills the answer template. `reasoning_model` drops the reasoning scaffold
/// from the CoT template (models that reason internally).
std::string render_prompt(std::string_view context, std::string_view question, PromptMode mode,
                          bool reasoning_model = false);
std::string render_prompt(const BenchmarkInstance& instance, PromptMode mode, bool reasoning_model = false);

/// Rows of a gold result as the judge sees them: a JSON list of {"id", "values"}.
std::string gold_for_prompt(const ResultSet& gold);

/// Fills the evaluation template used by the model judge.
std::string render_judge_prompt(std::string_view question, std::string_view prediction, const ResultSet& gold);

struct ExtractedAnswer {
  std::string answer;
  std::optional<std::string> reasoning;
  bool marker_found = false;  // false: the whole response was taken as the answer
  bool no_answer = false;     // answer was mapped to kNoAnswer
};

/// Text after the last "**Answer:**" marker, trimmed. Responses that say
/// "no answer" there map to kNoAnswer.
ExtractedAnswer extract_answer(std::string_view raw);

// ---------------------------------------------------------------------------
// Endpoints

struct EndpointConfig {
  std::string base_url;                    // scheme://host[:port], or "mock:echo" / "mock:no-answer"
  std::string model = "model";
  std::string path = "/v1/chat/completions";
  std::string embeddings_path = "/v1/embeddings";
  std::string auth_env;                    // environment variable holding the token; empty disables auth
  std::string auth_header = "Authorization";
  std::string auth_prefix = "Bearer ";
  double temperature = 0.0;
  int max_tokens = 4096;
  std::chrono::milliseconds timeout{120000};
  int max_retries = 4;
  std::chrono::milliseconds backoff{500};  // doubled after every failed attempt
  double max_requests_per_second = 0.0;    // 0 disables rate limiting

  /// Throws InvalidConfig (temperature must be 0, counts non-negative, URL set).
  void validate() const;
};

nlohmann::json endpoint_to_json(const EndpointConfig& config);
/// Missing keys keep their defaults.
EndpointConfig endpoint_from_json(const nlohmann::json& j);

struct ModelResponse {
  std::string raw;
  std::optional<std::string> reasoning;
  std::string answer;
  bool marker_found = false;
  int attempts = 1;
  long long latency_ms = 0;
  std::optional<long long> prompt_tokens;
  std::optional<long long> completion_tokens;
};

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual std::string model_name() const = 0;
  /// Raw completion text plus request metadata; `answer` is filled by query_model.
  virtual ModelResponse complete(const std::string& prompt) = 0;
};

/// Chat-completions over HTTP(S). Retries connection failures, 429 and 5xx
/// with exponential backoff; other statuses raise EndpointRejected at once.
/// When every attempt timed out the error is EndpointTimeout, otherwise
/// RetriesExhausted.
class HttpChatClient : public ChatClient {
 public:
  explicit HttpChatClient(EndpointConfig config);
  std::string model_name() const override { return config_.model; }
  ModelResponse complete(const std::string& prompt) override;

  /// POSTs `body` to `path` with retries and returns the parsed JSON reply.
  nlohmann::json post_json(const std::string& path, const nlohmann::json& body, int* attempts = nullptr);

  const EndpointConfig& config() const { return config_; }

 private:
  struct RateLimiter {
    std::mutex mutex;
    std::chrono::steady_clock::time_point next{};
  };
  void throttle();

  EndpointConfig config_;
  std::shared_ptr<RateLimiter> limiter_;  // shared by copies of the client
};

/// Sends the prompt and extracts the answer.
ModelResponse query_model(ChatClient& client, const std::string& prompt);

// ---------------------------------------------------------------------------
// Mock model

enum class MockBehavior { Echo, NoAnswer };

std::string_view to_string(MockBehavior behavior);
std::optional<MockBehavior> parse_mock_behavior(std::string_view name);

/// Answers prompts it recognizes by (context, question). Echo lists the gold
/// rows verbatim ("a, b; c, d"), or "No answer." for an empty gold; NoAnswer
/// always declines. Judge prompts are answered with the deterministic judge's
/// labels, so a model judge backed by the mock agrees with the rule judge.
class MockResponder {
 public:
  explicit MockResponder(MockBehavior behavior = MockBehavior::Echo) : behavior_(behavior) {}

  void add(const BenchmarkInstance& instance);
  void add(std::string_view context, std::string_view question, const ResultSet& gold);

  std::string respond(std::string_view prompt) const;
  MockBehavior behavior() const { return behavior_; }

  /// The verbatim listing used by the echo behaviour.
  static std::string echo_answer(const ResultSet& gold);

 private:
  MockBehavior behavior_;
  std::map<std::string, ResultSet> gold_;  // key: hash of (context, question)
};

/// In-process client around a responder; shared state is read-only.
class MockChatClient : public ChatClient {
 public:
  explicit MockChatClient(std::shared_ptr<const MockResponder> responder, std::string model = "mock")
      : responder_(std::move(responder)), model_(std::move(model)) {}
  std::string model_name() const override { return model_; }
  ModelResponse complete(const std::string& prompt) override;

 private:
  std::shared_ptr<const MockResponder> responder_;
  std::string model_;
};

/// Deterministic embedding used by the mock server: hashed bag of normalized
/// terms, L2-normalized.
std::vector<double> mock_embedding(std::string_view text, std::size_t dims = 64);

/// Chat-completions and embeddings over loopback HTTP, backed by a responder.
/// `fail_first(n, status)` makes the next n requests fail with that status.
class MockServer {
 public:
  explicit MockServer(std::shared_ptr<const MockResponder> responder);
  ~MockServer();
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  /// Binds to host on an ephemeral port (or `port` when nonzero) and serves in
  /// a background thread.
  void start(const std::string& host = "127.0.0.1", int port = 0);
  /// Blocks serving on the calling thread.
  void listen(const std::string& host, int port);
  void stop();

  int port() const { return port_; }
  std::string base_url() const;

  void fail_first(int count, int status = 429);
  int requests_served() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

// ---------------------------------------------------------------------------
// Model judge

/// Judge backed by a chat model using the evaluation prompt. Endpoint failures
/// surface as JudgeUnavailable; unparseable replies as JudgeOutputMalformed.
class ModelJudge : public Judge {
 public:
  explicit ModelJudge(ChatClient& client) : client_(client) {}
  std::string kind() const override { return "model:" + client_.model_name(); }
  std::vector<RowLabel> label_rows(std::string_view question, std::string_view prediction,
                                   const ResultSet& gold) override;

  /// Parses the first JSON list in `reply` into one label per id 1..n.
  static std::vector<RowLabel> parse_labels(std::string_view reply, std::size_t n);

 private:
  ChatClient& client_;
};

// ---------------------------------------------------------------------------
// Retrieval

class Retriever {
 public:
  virtual ~Retriever() = default;
  virtual std::string kind() const = 0;
  /// One similarity per document.
  virtual std::vector<double> score(std::string_view question, const std::vector<std::string>& documents) = 0;
};

/// Similarity = number of distinct normalized terms shared with the question,
/// ignoring a short list of English stop words.
class LexicalRetriever : public Retriever {
 public:
  std::string kind() const override { return "lexical"; }
  std::vector<double> score(std::string_view question, const std::vector<std::string>& documents) override;

  static std::vector<std::string> terms(std::string_view text);
};

/// Cosine similarity of vectors from an OpenAI-style embeddings endpoint.
class EmbeddingRetriever : public Retriever {
 public:
  explicit EmbeddingRetriever(EndpointConfig config, std::size_t batch_size = 64)
      : client_(std::move(config)), batch_size_(batch_size) {}
  std::string kind() const override { return "endpoint"; }
  std::vector<double> score(std::string_view question, const std::vector<std::string>& documents) override;

 private:
  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts);
  HttpChatClient client_;
  std::size_t batch_size_;
};

struct RetrievalResult {
  std::vector<std::size_t> kept;  // document indices, ascending
  std::string context;            // kept documents joined in original order
  std::size_t tokens = 0;
};

/// Ranks documents by descending score (ties by original order) and admits
/// them until the next one would exceed the budget. Throws BudgetInfeasible on
/// a zero budget or when no document fits.
RetrievalResult retrieve(const std::vector<std::string>& documents, std::string_view question,
                         std::size_t token_budget, Retriever& retriever, const TokenCounter& counter = {});

struct RetrievalQuality {
  double precision = 0.0;  // kept relevant / kept
  double recall = 0.0;     // kept relevant / relevant; 1 when nothing is relevant
};

RetrievalQuality retrieval_quality(const std::vector<std::size_t>& kept,
                                   const std::vector<std::size_t>& relevant_positions);

}  // namespace sqlctx
