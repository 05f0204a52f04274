#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "sqlctx/gateway.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <set>
#include <thread>

#include <httplib.h>

#include "sqlctx/artifact.hpp"
#include "sqlctx/error.hpp"
#include "sqlctx/json_io.hpp"

namespace sqlctx {

using nlohmann::json;

namespace {

constexpr std::string_view kCotTemplate =
    R"(You'll be given a set of sentences to read through carefully. Once you've reviewed them, I'll ask you a question related to the information in those sentences. Your job is to think critically about the details, analyze the sentences in relation to the question, and then provide your answer. If the information clearly supports a partial answer, provide that. However, if the evidence is unclear or insufficient, it is okay to respond with "No answer."

**Input:**
- **Sentences:**
```
{context}
```

- **Question:**
```
{question}
```

**Response:**
- **Reasoning:**
  - [Describe how you thought through the sentences and how they helped you reach your conclusion. If the evidence is unclear or insufficient to provide a reliable answer, explain why. Your reasoning should not exceed 10,000 words.]
- **Answer:** [Provide an answer only if it is clearly supported by the information in the sentences. If the evidence is unclear or insufficient, respond with "No answer."])";

constexpr std::string_view kReasoningScaffold =
    "- **Reasoning:**\n"
    "  - [Describe how you thought through the sentences and how they helped you reach your conclusion. If the "
    "evidence is unclear or insufficient to provide a reliable answer, explain why. Your reasoning should not "
    "exceed 10,000 words.]\n";

constexpr std::string_view kDirectTemplate =
    R"(You'll be given a set of sentences to review carefully. Once you've reviewed them, I'll ask you a question related to the information in those sentences. Your task is to provide a direct, clear answer based only on what is clearly supported by the information. If the evidence does not fully support the answer, provide a partial answer. If the information is unclear or insufficient, respond with "No answer." Do not provide explanations or reasoning.

**Input:**
- **Sentences:**
```
{context}
```

- **Question:**
```
{question}
```

**Response:**
- **Answer:** [Provide only the direct final answer. If the information supports only part of the answer, provide a partial answer. If the evidence is unclear or insufficient, respond with "No answer." Do not include reasoning.])";

constexpr std::string_view kJudgeTemplate =
    R"(You will be given a question along with a response generated by an assistant and the corresponding ground truth data. Your task is to assess the response based on its accuracy and completeness in comparison to the ground truth. For each entry in the ground truth, determine whether the information provided by the assistant is an "Exact Match," a "Partial Match," or a "No Match."

#### **Evaluation Criteria:**
- **Exact Match**: The assistant's response precisely matches the ground truth in both content and detail.
- **Partial Match**: The assistant's response includes some correct information but is either incomplete, incorrectly ordered, or contains inaccuracies.
- **No Match**: The assistant's response does not accurately reflect the ground truth or is missing entirely.

#### **Special Cases:**
**Ground Truth is None**:  
- If the ground truth is `None` (represented as an empty list `[]`):
  - **Exact Match**: If the assistant's response indicates that there is no information or content.
  - **No Match**: If the assistant's response provides any information when the ground truth is `None`.

#### **Output Format:**

- The output should be a list of objects where each object contains:
  - An `"id"` that matches the `id` of the corresponding ground truth entry.
  - A `"label"` indicating whether the assistant's response is an `"Exact Match"`, `"Partial Match"`, or `"No Match"`.

- The number of output objects should match the number of entries in the ground truth.

---

### **Examples:**

{examples}

====== Your task starts here ======

**Question:**
```
{question}
```

**Assistant’s Response:**
```
{pred}
```

**Ground Truth:**
```
{gold}
```

**Output Format:**
```
{output_format}
```)";

constexpr std::string_view kJudgeExamples =
    R"(**Question:** Which grape varieties have wines priced above 50, and how many such wines does each have?
**Assistant's Response:** Zinfandel has 4 such wines and Syrah has 2.
**Ground Truth:** [{"id": 1, "values": ["Zinfandel", 4]}, {"id": 2, "values": ["Syrah", 3]}, {"id": 3, "values": ["Merlot", 1]}]
**Output:** [{"id": 1, "label": "Exact Match"}, {"id": 2, "label": "Partial Match"}, {"id": 3, "label": "No Match"}]

**Question:** Which instructors in the Physics department earn more than 120000?
**Assistant's Response:** No answer.
**Ground Truth:** []
**Output:** [{"id": 1, "label": "Exact Match"}])";

constexpr std::string_view kAnswerMarker = "**Answer:**";
constexpr std::string_view kReasoningMarker = "**Reasoning:**";
constexpr std::string_view kSentencesOpen = "- **Sentences:**\n```\n";
constexpr std::string_view kQuestionOpen = "\n```\n\n- **Question:**\n```\n";
constexpr std::string_view kResponseOpen = "\n```\n\n**Response:**";
constexpr std::string_view kJudgeQuestionOpen = "**Question:**\n```\n";
constexpr std::string_view kJudgePredOpen = "\n```\n\n**Assistant’s Response:**\n```\n";
constexpr std::string_view kJudgeGoldOpen = "\n```\n\n**Ground Truth:**\n```\n";
constexpr std::string_view kJudgeFormatOpen = "\n```\n\n**Output Format:**\n```\n";

/// Substitutes {name} placeholders in one pass, so substituted text is never rescanned.
std::string fill(std::string_view tmpl, const std::map<std::string, std::string_view>& values) {
  std::string out;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    std::size_t open = tmpl.find('{', pos);
    if (open == std::string_view::npos) break;
    std::size_t close = tmpl.find('}', open);
    if (close == std::string_view::npos) break;
    auto it = values.find(std::string(tmpl.substr(open + 1, close - open - 1)));
    if (it == values.end()) {
      out.append(tmpl.substr(pos, open + 1 - pos));
      pos = open + 1;
      continue;
    }
    out.append(tmpl.substr(pos, open - pos));
    out.append(it->second);
    pos = close + 1;
  }
  out.append(tmpl.substr(std::min(pos, tmpl.size())));
  return out;
}

std::string_view trim(std::string_view s) {
  auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
  while (!s.empty() && ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && ws(s.back())) s.remove_suffix(1);
  return s;
}

std::string prompt_key(std::string_view context, std::string_view question) {
  std::string material(context);
  material += '\0';
  material += question;
  return sha256_hex(material);
}

/// Text between `open` and the last `close` after it.
std::optional<std::string_view> between(std::string_view text, std::string_view open, std::string_view close) {
  std::size_t a = text.find(open);
  if (a == std::string_view::npos) return std::nullopt;
  a += open.size();
  std::size_t b = text.rfind(close);
  if (b == std::string_view::npos || b < a) return std::nullopt;
  return text.substr(a, b - a);
}

std::string render_cell(const Value& value) { return value.is_null() ? std::string("None") : render(value); }

}  // namespace

// ---------------------------------------------------------------------------
// Prompts

std::string_view to_string(PromptMode mode) { return mode == PromptMode::CoT ? "cot" : "direct"; }

std::optional<PromptMode> parse_prompt_mode(std::string_view name) {
  std::string n = to_lower(std::string(name));
  if (n == "cot") return PromptMode::CoT;
  if (n == "direct") return PromptMode::Direct;
  return std::nullopt;
}

std::string render_prompt(std::string_view context, std::string_view question, PromptMode mode,
                          bool reasoning_model) {
  std::string tmpl(mode == PromptMode::CoT ? kCotTemplate : kDirectTemplate);
  if (mode == PromptMode::CoT && reasoning_model) {
    std::size_t at = tmpl.find(kReasoningScaffold);
    if (at != std::string::npos) tmpl.erase(at, kReasoningScaffold.size());
  }
  return fill(tmpl, {{"context", context}, {"question", question}});
}

std::string render_prompt(const BenchmarkInstance& instance, PromptMode mode, bool reasoning_model) {
  return render_prompt(instance.context, instance.question, mode, reasoning_model);
}

std::string gold_for_prompt(const ResultSet& gold) {
  json rows = json::array();
  for (std::size_t k = 0; k < gold.rows.size(); ++k) {
    json values = json::array();
    for (const auto& cell : gold.rows[k]) values.push_back(value_to_json(cell));
    rows.push_back({{"id", k + 1}, {"values", values}});
  }
  return rows.dump();
}

std::string render_judge_prompt(std::string_view question, std::string_view prediction, const ResultSet& gold) {
  json format = json::array();
  for (std::size_t k = 0; k < std::max<std::size_t>(gold.rows.size(), 1); ++k)
    format.push_back({{"id", k + 1}, {"label", "Exact Match | Partial Match | No Match"}});
  std::string gold_text = gold_for_prompt(gold);
  std::string format_text = format.dump();
  return fill(kJudgeTemplate, {{"examples", kJudgeExamples},
                               {"question", question},
                               {"pred", prediction},
                               {"gold", gold_text},
                               {"output_format", format_text}});
}

ExtractedAnswer extract_answer(std::string_view raw) {
  ExtractedAnswer out;
  std::string_view answer = raw;
  std::size_t at = raw.rfind(kAnswerMarker);
  if (at != std::string_view::npos) {
    out.marker_found = true;
    answer = raw.substr(at + kAnswerMarker.size());
    std::size_t r = raw.rfind(kReasoningMarker, at);
    if (r != std::string_view::npos) {
      std::string_view reasoning = raw.substr(r + kReasoningMarker.size(), at - r - kReasoningMarker.size());
      reasoning = trim(reasoning);
      if (reasoning.size() >= 1 && reasoning.back() == '-') reasoning = trim(reasoning.substr(0, reasoning.size() - 1));
      if (!reasoning.empty()) out.reasoning = std::string(reasoning);
    }
  }
  answer = trim(answer);
  out.answer = std::string(answer);
  if (out.answer.empty() || signals_no_answer(out.answer)) {
    out.answer = std::string(kNoAnswer);
    out.no_answer = true;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Endpoint configuration

void EndpointConfig::validate() const {
  if (base_url.empty()) throw Error(ErrorCode::InvalidConfig, "endpoint base_url is empty");
  if (temperature != 0.0) throw Error(ErrorCode::InvalidConfig, "endpoint temperature must be 0.0");
  if (max_tokens <= 0) throw Error(ErrorCode::InvalidConfig, "endpoint max_tokens must be positive");
  if (max_retries < 0) throw Error(ErrorCode::InvalidConfig, "endpoint max_retries must be non-negative");
  if (timeout.count() <= 0) throw Error(ErrorCode::InvalidConfig, "endpoint timeout must be positive");
  if (max_requests_per_second < 0) throw Error(ErrorCode::InvalidConfig, "endpoint rate limit must be non-negative");
}

json endpoint_to_json(const EndpointConfig& c) {
  return {{"base_url", c.base_url},
          {"model", c.model},
          {"path", c.path},
          {"embeddings_path", c.embeddings_path},
          {"auth_env", c.auth_env},
          {"auth_header", c.auth_header},
          {"auth_prefix", c.auth_prefix},
          {"temperature", c.temperature},
          {"max_tokens", c.max_tokens},
          {"timeout_ms", c.timeout.count()},
          {"max_retries", c.max_retries},
          {"backoff_ms", c.backoff.count()},
          {"max_requests_per_second", c.max_requests_per_second}};
}

EndpointConfig endpoint_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "endpoint config must be an object");
  EndpointConfig c;
  try {
    c.base_url = j.value("base_url", c.base_url);
    c.model = j.value("model", c.model);
    c.path = j.value("path", c.path);
    c.embeddings_path = j.value("embeddings_path", c.embeddings_path);
    c.auth_env = j.value("auth_env", c.auth_env);
    c.auth_header = j.value("auth_header", c.auth_header);
    c.auth_prefix = j.value("auth_prefix", c.auth_prefix);
    c.temperature = j.value("temperature", c.temperature);
    c.max_tokens = j.value("max_tokens", c.max_tokens);
    c.timeout = std::chrono::milliseconds(j.value("timeout_ms", static_cast<long long>(c.timeout.count())));
    c.max_retries = j.value("max_retries", c.max_retries);
    c.backoff = std::chrono::milliseconds(j.value("backoff_ms", static_cast<long long>(c.backoff.count())));
    c.max_requests_per_second = j.value("max_requests_per_second", c.max_requests_per_second);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("endpoint config: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// HTTP client

HttpChatClient::HttpChatClient(EndpointConfig config) : config_(std::move(config)) {
  config_.validate();
  limiter_ = std::make_shared<RateLimiter>();
}

void HttpChatClient::throttle() {
  if (config_.max_requests_per_second <= 0) return;
  auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(1.0 / config_.max_requests_per_second));
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(limiter_->mutex);
    auto now = std::chrono::steady_clock::now();
    slot = std::max(now, limiter_->next);
    limiter_->next = slot + interval;
  }
  std::this_thread::sleep_until(slot);
}

json HttpChatClient::post_json(const std::string& path, const json& body, int* attempts_out) {
  httplib::Client client(config_.base_url);
  auto secs = [](std::chrono::milliseconds ms) {
    return std::pair<time_t, time_t>(ms.count() / 1000, (ms.count() % 1000) * 1000);
  };
  auto [s, us] = secs(config_.timeout);
  client.set_connection_timeout(s, us);
  client.set_read_timeout(s, us);
  client.set_write_timeout(s, us);

  httplib::Headers headers;
  if (!config_.auth_env.empty()) {
    if (const char* token = std::getenv(config_.auth_env.c_str()); token && *token)
      headers.emplace(config_.auth_header, config_.auth_prefix + token);
  }
  const std::string payload = body.dump();
  const int max_attempts = config_.max_retries + 1;
  bool all_timeouts = true;
  std::string last_failure;
  auto delay = config_.backoff;

  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    if (attempts_out) *attempts_out = attempt;
    throttle();
    auto started = std::chrono::steady_clock::now();
    auto res = client.Post(path, headers, payload, "application/json");
    if (!res) {
      auto elapsed = std::chrono::steady_clock::now() - started;
      bool timed_out = res.error() == httplib::Error::ConnectionTimeout ||
                       (res.error() == httplib::Error::Read && elapsed >= config_.timeout * 9 / 10);
      all_timeouts = all_timeouts && timed_out;
      last_failure = timed_out ? "timed out" : httplib::to_string(res.error());
    } else if (res->status == 429 || res->status >= 500) {
      all_timeouts = false;
      last_failure = "HTTP " + std::to_string(res->status) + ": " + res->body;
    } else if (res->status < 200 || res->status >= 300) {
      throw Error(ErrorCode::EndpointRejected, "HTTP " + std::to_string(res->status) + ": " + res->body);
    } else {
      json parsed = json::parse(res->body, nullptr, false);
      if (parsed.is_discarded())
        throw Error(ErrorCode::EndpointRejected, "HTTP " + std::to_string(res->status) + ": body is not JSON");
      return parsed;
    }
    if (attempt < max_attempts) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
  }
  if (all_timeouts)
    throw Error(ErrorCode::EndpointTimeout,
                config_.base_url + path + " timed out after " + std::to_string(max_attempts) + " attempt(s)");
  throw Error(ErrorCode::RetriesExhausted, config_.base_url + path + " failed after " +
                                               std::to_string(max_attempts) + " attempt(s): " + last_failure);
}

ModelResponse HttpChatClient::complete(const std::string& prompt) {
  json body = {{"model", config_.model},
               {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
               {"temperature", config_.temperature},
               {"max_tokens", config_.max_tokens}};
  ModelResponse out;
  auto started = std::chrono::steady_clock::now();
  json reply = post_json(config_.path, body, &out.attempts);
  out.latency_ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started).count();
  try {
    const json& content = reply.at("choices").at(0).at("message").at("content");
    out.raw = content.is_string() ? content.get<std::string>() : std::string();
    if (reply.contains("usage") && reply["usage"].is_object()) {
      const json& usage = reply["usage"];
      if (usage.contains("prompt_tokens")) out.prompt_tokens = usage["prompt_tokens"].get<long long>();
      if (usage.contains("completion_tokens")) out.completion_tokens = usage["completion_tokens"].get<long long>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::EndpointRejected, std::string("unexpected completion payload: ") + e.what());
  }
  return out;
}

ModelResponse query_model(ChatClient& client, const std::string& prompt) {
  ModelResponse response = client.complete(prompt);
  ExtractedAnswer extracted = extract_answer(response.raw);
  response.answer = extracted.answer;
  response.reasoning = extracted.reasoning;
  response.marker_found = extracted.marker_found;
  return response;
}

// ---------------------------------------------------------------------------
// Mock model

std::string_view to_string(MockBehavior behavior) { return behavior == MockBehavior::Echo ? "echo" : "no-answer"; }

std::optional<MockBehavior> parse_mock_behavior(std::string_view name) {
  std::string n = to_lower(std::string(name));
  if (n == "echo") return MockBehavior::Echo;
  if (n == "no-answer" || n == "noanswer") return MockBehavior::NoAnswer;
  return std::nullopt;
}

void MockResponder::add(const BenchmarkInstance& instance) { add(instance.context, instance.question, instance.gold); }

void MockResponder::add(std::string_view context, std::string_view question, const ResultSet& gold) {
  gold_[prompt_key(context, question)] = gold;
}

std::string MockResponder::echo_answer(const ResultSet& gold) {
  if (gold.rows.empty()) return std::string(kNoAnswer);
  std::string out;
  for (std::size_t r = 0; r < gold.rows.size(); ++r) {
    if (r) out += "; ";
    for (std::size_t c = 0; c < gold.rows[r].size(); ++c) {
      if (c) out += ", ";
      out += render_cell(gold.rows[r][c]);
    }
  }
  return out;
}

std::string MockResponder::respond(std::string_view prompt) const {
  if (prompt.substr(0, 40) == kJudgeTemplate.substr(0, 40)) {
    auto question = between(prompt, kJudgeQuestionOpen, kJudgePredOpen);
    auto pred = between(prompt, kJudgePredOpen, kJudgeGoldOpen);
    auto gold_text = between(prompt, kJudgeGoldOpen, kJudgeFormatOpen);
    if (!question || !pred || !gold_text) return "I cannot evaluate this.";
    // The question block is the last one before the response block.
    json rows = json::parse(*gold_text, nullptr, false);
    if (!rows.is_array()) return "I cannot evaluate this.";
    ResultSet gold;
    for (const auto& row : rows) {
      Row values;
      for (const auto& cell : row.at("values")) values.push_back(value_from_json(cell));
      gold.rows.push_back(std::move(values));
    }
    json labels = json::array();
    for (std::size_t k = 0; k < gold.rows.size(); ++k)
      labels.push_back({{"id", k + 1}, {"label", to_string(DeterministicJudge::label_row(*pred, gold.rows[k]))}});
    if (gold.rows.empty())
      labels.push_back({{"id", 1}, {"label", signals_no_answer(*pred) ? "Exact Match" : "No Match"}});
    return labels.dump();
  }

  if (behavior_ == MockBehavior::NoAnswer) return "- **Answer:** No answer.";
  auto context = between(prompt, kSentencesOpen, kQuestionOpen);
  std::optional<std::string_view> question;
  if (context) {
    std::size_t q = prompt.rfind(kQuestionOpen);
    std::size_t end = prompt.rfind(kResponseOpen);
    if (end != std::string_view::npos && end >= q + kQuestionOpen.size())
      question = prompt.substr(q + kQuestionOpen.size(), end - q - kQuestionOpen.size());
  }
  if (!context || !question) return "- **Answer:** No answer.";
  auto it = gold_.find(prompt_key(*context, *question));
  if (it == gold_.end()) return "- **Reasoning:** The question is not one I was given.\n- **Answer:** No answer.";
  return "- **Reasoning:** Listing the rows that answer the question.\n- **Answer:** " + echo_answer(it->second);
}

ModelResponse MockChatClient::complete(const std::string& prompt) {
  ModelResponse out;
  out.raw = responder_->respond(prompt);
  return out;
}

std::vector<double> mock_embedding(std::string_view text, std::size_t dims) {
  std::vector<double> v(dims, 0.0);
  for (const auto& term : LexicalRetriever::terms(text)) {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (unsigned char c : term) h = (h ^ c) * 1099511628211ULL;
    v[h % dims] += 1.0;
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (norm > 0) {
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
  }
  return v;
}

struct MockServer::Impl {
  std::shared_ptr<const MockResponder> responder;
  httplib::Server server;
  std::thread thread;
  std::atomic<int> failures_left{0};
  std::atomic<int> failure_status{429};
  std::atomic<int> served{0};

  bool maybe_fail(httplib::Response& res) {
    ++served;
    int left = failures_left.load();
    while (left > 0) {
      if (failures_left.compare_exchange_weak(left, left - 1)) {
        res.status = failure_status.load();
        res.set_content(R"({"error":"injected failure"})", "application/json");
        return true;
      }
    }
    return false;
  }
};

MockServer::MockServer(std::shared_ptr<const MockResponder> responder) : impl_(std::make_unique<Impl>()) {
  impl_->responder = std::move(responder);
  Impl* impl = impl_.get();
  impl->server.Post("/v1/chat/completions", [impl](const httplib::Request& req, httplib::Response& res) {
    if (impl->maybe_fail(res)) return;
    json body = json::parse(req.body, nullptr, false);
    std::string prompt;
    if (body.is_object() && body.contains("messages") && body["messages"].is_array()) {
      for (const auto& m : body["messages"])
        if (m.is_object() && m.value("role", "") == "user") prompt = m.value("content", "");
    }
    if (prompt.empty()) {
      res.status = 400;
      res.set_content(R"({"error":"no user message"})", "application/json");
      return;
    }
    std::string answer = impl->responder->respond(prompt);
    json reply = {{"id", "mock"},
                  {"object", "chat.completion"},
                  {"model", body.value("model", "mock")},
                  {"choices", json::array({{{"index", 0},
                                            {"message", {{"role", "assistant"}, {"content", answer}}},
                                            {"finish_reason", "stop"}}})},
                  {"usage",
                   {{"prompt_tokens", heuristic_token_count(prompt)},
                    {"completion_tokens", heuristic_token_count(answer)}}}};
    res.set_content(reply.dump(), "application/json");
  });
  impl->server.Post("/v1/embeddings", [impl](const httplib::Request& req, httplib::Response& res) {
    if (impl->maybe_fail(res)) return;
    json body = json::parse(req.body, nullptr, false);
    if (!body.is_object() || !body.contains("input")) {
      res.status = 400;
      res.set_content(R"({"error":"missing input"})", "application/json");
      return;
    }
    std::vector<std::string> inputs;
    if (body["input"].is_string()) inputs.push_back(body["input"].get<std::string>());
    else
      for (const auto& s : body["input"]) inputs.push_back(s.get<std::string>());
    json data = json::array();
    for (std::size_t k = 0; k < inputs.size(); ++k)
      data.push_back({{"object", "embedding"}, {"index", k}, {"embedding", mock_embedding(inputs[k])}});
    res.set_content(json{{"object", "list"}, {"data", data}}.dump(), "application/json");
  });
}

MockServer::~MockServer() { stop(); }

void MockServer::start(const std::string& host, int port) {
  if (port == 0) {
    port_ = impl_->server.bind_to_any_port(host);
  } else {
    port_ = impl_->server.bind_to_port(host, port) ? port : -1;
  }
  if (port_ <= 0) throw Error(ErrorCode::Io, "mock server could not bind " + host);
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void MockServer::listen(const std::string& host, int port) {
  port_ = port;
  if (!impl_->server.listen(host, port)) throw Error(ErrorCode::Io, "mock server could not listen on " + host);
}

void MockServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::string MockServer::base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }

void MockServer::fail_first(int count, int status) {
  impl_->failure_status = status;
  impl_->failures_left = count;
}

int MockServer::requests_served() const { return impl_->served.load(); }

// ---------------------------------------------------------------------------
// Model judge

std::vector<RowLabel> ModelJudge::parse_labels(std::string_view reply, std::size_t n) {
  for (std::size_t open = reply.find('['); open != std::string_view::npos; open = reply.find('[', open + 1)) {
    for (std::size_t close = reply.find(']', open); close != std::string_view::npos;
         close = reply.find(']', close + 1)) {
      json list = json::parse(reply.substr(open, close - open + 1), nullptr, false);
      if (list.is_discarded() || !list.is_array() || list.empty() || !list[0].is_object() ||
          !list[0].contains("label"))
        continue;
      std::vector<std::optional<RowLabel>> labels(n);
      for (std::size_t k = 0; k < list.size(); ++k) {
        const json& item = list[k];
        if (!item.is_object() || !item.contains("label") || !item["label"].is_string())
          throw Error(ErrorCode::JudgeOutputMalformed, "judge entry without a label");
        auto label = parse_label(item["label"].get<std::string>());
        if (!label) throw Error(ErrorCode::JudgeOutputMalformed, "unknown label " + item["label"].dump());
        std::size_t id = k + 1;
        if (item.contains("id")) {
          const json& jid = item["id"];
          if (jid.is_number_integer()) id = jid.get<std::size_t>();
          else if (jid.is_string()) id = static_cast<std::size_t>(std::atoll(jid.get<std::string>().c_str()));
        }
        if (id < 1 || id > n) throw Error(ErrorCode::JudgeOutputMalformed, "judge id out of range");
        labels[id - 1] = *label;
      }
      std::vector<RowLabel> out;
      for (std::size_t k = 0; k < n; ++k) {
        if (!labels[k]) throw Error(ErrorCode::JudgeOutputMalformed, "no label for id " + std::to_string(k + 1));
        out.push_back(*labels[k]);
      }
      return out;
    }
  }
  throw Error(ErrorCode::JudgeOutputMalformed, "no label list in judge reply");
}

std::vector<RowLabel> ModelJudge::label_rows(std::string_view question, std::string_view prediction,
                                             const ResultSet& gold) {
  std::string prompt = render_judge_prompt(question, prediction, gold);
  ModelResponse reply;
  try {
    reply = client_.complete(prompt);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::EndpointTimeout || e.code() == ErrorCode::EndpointRejected ||
        e.code() == ErrorCode::RetriesExhausted)
      throw Error(ErrorCode::JudgeUnavailable, e.what());
    throw;
  }
  return parse_labels(reply.raw, std::max<std::size_t>(gold.rows.size(), 1));
}

// ---------------------------------------------------------------------------
// Retrieval

std::vector<std::string> LexicalRetriever::terms(std::string_view text) {
  static const std::set<std::string> stop = {"a",    "an",   "the",  "of",    "in",   "on",   "at",   "to",
                                             "for",  "and",  "or",   "is",    "are",  "was",  "were", "be",
                                             "by",   "with", "what", "which", "who",  "whom", "how",  "do",
                                             "does", "did",  "that", "this",  "from", "as",   "it",   "its",
                                             "their", "there", "has", "have", "than", "s"};
  std::vector<std::string> out;
  std::string normalized = normalize_text(text);
  std::size_t pos = 0;
  while (pos < normalized.size()) {
    std::size_t end = normalized.find(' ', pos);
    if (end == std::string::npos) end = normalized.size();
    std::string term = normalized.substr(pos, end - pos);
    if (!term.empty() && !stop.count(term)) out.push_back(std::move(term));
    pos = end + 1;
  }
  return out;
}

std::vector<double> LexicalRetriever::score(std::string_view question, const std::vector<std::string>& documents) {
  auto q = terms(question);
  std::set<std::string> wanted(q.begin(), q.end());
  std::vector<double> out;
  out.reserve(documents.size());
  for (const auto& doc : documents) {
    auto d = terms(doc);
    std::set<std::string> have(d.begin(), d.end());
    std::size_t shared = 0;
    for (const auto& t : have) shared += wanted.count(t);
    out.push_back(static_cast<double>(shared));
  }
  return out;
}

std::vector<std::vector<double>> EmbeddingRetriever::embed(const std::vector<std::string>& texts) {
  std::vector<std::vector<double>> out;
  for (std::size_t start = 0; start < texts.size(); start += batch_size_) {
    std::size_t stop = std::min(texts.size(), start + batch_size_);
    json input(std::vector<std::string>(texts.begin() + start, texts.begin() + stop));
    json reply = client_.post_json(client_.config().embeddings_path, {{"model", client_.config().model}, {"input", input}});
    try {
      const json& data = reply.at("data");
      std::vector<std::vector<double>> batch(stop - start);
      for (std::size_t k = 0; k < data.size(); ++k) {
        std::size_t index = data[k].value("index", k);
        if (index >= batch.size()) throw Error(ErrorCode::EndpointRejected, "embedding index out of range");
        batch[index] = data[k].at("embedding").get<std::vector<double>>();
      }
      for (auto& v : batch) {
        if (v.empty()) throw Error(ErrorCode::EndpointRejected, "missing embedding in reply");
        out.push_back(std::move(v));
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::EndpointRejected, std::string("unexpected embeddings payload: ") + e.what());
    }
  }
  return out;
}

std::vector<double> EmbeddingRetriever::score(std::string_view question, const std::vector<std::string>& documents) {
  std::vector<std::string> texts{std::string(question)};
  texts.insert(texts.end(), documents.begin(), documents.end());
  auto vectors = embed(texts);
  auto cosine = [](const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t k = 0; k < std::min(a.size(), b.size()); ++k) {
      dot += a[k] * b[k];
      na += a[k] * a[k];
      nb += b[k] * b[k];
    }
    return na > 0 && nb > 0 ? dot / std::sqrt(na * nb) : 0.0;
  };
  std::vector<double> out;
  for (std::size_t k = 1; k < vectors.size(); ++k) out.push_back(cosine(vectors[0], vectors[k]));
  return out;
}

RetrievalResult retrieve(const std::vector<std::string>& documents, std::string_view question,
                         std::size_t token_budget, Retriever& retriever, const TokenCounter& counter) {
  if (token_budget == 0) throw Error(ErrorCode::BudgetInfeasible, "retrieval budget is zero");
  RetrievalResult out;
  if (documents.empty()) return out;
  std::vector<double> scores = retriever.score(question, documents);
  if (scores.size() != documents.size())
    throw Error(ErrorCode::EndpointRejected, "retriever returned " + std::to_string(scores.size()) +
                                                 " scores for " + std::to_string(documents.size()) + " documents");
  std::vector<std::size_t> order(documents.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  for (std::size_t index : order) {
    std::size_t tokens = counter(documents[index]);
    if (out.tokens + tokens > token_budget) break;
    out.tokens += tokens;
    out.kept.push_back(index);
  }
  if (out.kept.empty())
    throw Error(ErrorCode::BudgetInfeasible,
                "highest-ranked document needs more than " + std::to_string(token_budget) + " tokens");
  std::sort(out.kept.begin(), out.kept.end());
  for (std::size_t k = 0; k < out.kept.size(); ++k) {
    if (k) out.context += '\n';
    out.context += documents[out.kept[k]];
  }
  return out;
}

RetrievalQuality retrieval_quality(const std::vector<std::size_t>& kept,
                                   const std::vector<std::size_t>& relevant_positions) {
  std::set<std::size_t> relevant(relevant_positions.begin(), relevant_positions.end());
  std::size_t hits = 0;
  for (std::size_t k : kept) hits += relevant.count(k);
  RetrievalQuality q;
  q.precision = kept.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(kept.size());
  q.recall = relevant.empty() ? 1.0 : static_cast<double>(hits) / static_cast<double>(relevant.size());
  return q;
}

}  // namespace sqlctx
