#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "sqlctx/error.hpp"
#include "sqlctx/gateway.hpp"
#include "support/fixtures.hpp"

using namespace sqlctx;
using sqlctx::testing::fixture_dir;
using sqlctx::testing::fixture_templates;
using sqlctx::testing::prepared_database;
using sqlctx::testing::suite_spec;

namespace {

std::string read_prompt_fixture(const std::string& name) {
  std::ifstream in(fixture_dir() / "prompts" / (name + ".txt"), std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string replace_once(std::string text, const std::string& from, const std::string& to) {
  auto at = text.find(from);
  REQUIRE(at != std::string::npos);
  return text.replace(at, from.size(), to);
}

const ResultSet kKazanGold{{"name", "country", "sources"},
                           {{Value("Kazan International Airport"), Value("Russia"), Value(7)}},
                           true};
const ResultSet kChengduGold{{"name", "country", "sources"},
                             {{Value("Chengdu Shuangliu International Airport"), Value("China"), Value(40)}},
                             true};

// Model outputs transcribed from the qualitative examples, elisions kept as "...".
const std::string kFig6 =
    "**Reasoning:**\n... I need to analyze the provided sentences and identify all the flights mentioned, ...\n\n"
    "1. **Kazan International Airport, Russia:**\n   - Number of distinct source airports: 7\n\n"
    "After analyzing the data, Kazan International Airport in Russia receives flights from the highest number of "
    "distinct source airports, with a total of 7 distinct source airports.\n\n"
    "**Answer:** Kazan International Airport, Russia; 7 distinct source airports.";
const std::string kFig7 =
    "- **Reasoning:**\n... I reviewed the sentences for flight routes mentioned\n...\n"
    "  - The destination airport that appeared most frequently with different source airports was Kazan "
    "International Airport in Russia.\n    \n\n"
    "- **Answer:** Kazan International Airport, Russia; 6 distinct source airports.";
const std::string kFig8 =
    "**Reasoning:**\n... I need to analyze the provided sentences ...\n\n"
    "6. **Provide the Result:** The final result will include the destination airport, ...\n\n"
    "**Answer:**\nAfter analyzing the sentences, ... **Kazan International Airport** in **Russia**, with flights "
    "arriving from 10 distinct source airports.";

EndpointConfig fast_config(const std::string& base_url) {
  EndpointConfig c;
  c.base_url = base_url;
  c.model = "mock";
  c.backoff = std::chrono::milliseconds(1);
  c.timeout = std::chrono::milliseconds(5000);
  c.max_retries = 3;
  return c;
}

/// Port that was just released, so connecting to it is refused.
int closed_port() {
  auto responder = std::make_shared<MockResponder>();
  MockServer server(responder);
  server.start();
  int port = server.port();
  server.stop();
  return port;
}

}  // namespace

TEST_CASE("prompts are byte-exact to the shipped templates") {
  CHECK(render_prompt("{context}", "{question}", PromptMode::CoT) == read_prompt_fixture("cot"));
  CHECK(render_prompt("{context}", "{question}", PromptMode::Direct) == read_prompt_fixture("direct"));

  // Reasoning models: the fixture minus the reasoning bullet and its sub-bullet.
  std::istringstream lines(read_prompt_fixture("cot"));
  std::string line, expected;
  bool skipping = false;
  while (std::getline(lines, line)) {
    if (line == "- **Reasoning:**") {
      skipping = true;
      continue;
    }
    if (skipping && line.rfind("  - ", 0) == 0) continue;
    skipping = false;
    if (!expected.empty()) expected += '\n';
    expected += line;
  }
  CHECK(render_prompt("{context}", "{question}", PromptMode::CoT, true) == expected);

  std::string judge = render_judge_prompt("{question}", "{pred}", kKazanGold);
  std::string fixture = read_prompt_fixture("judge");
  fixture = replace_once(fixture, "{gold}", gold_for_prompt(kKazanGold));
  fixture = replace_once(fixture, "{output_format}",
                         R"([{"id":1,"label":"Exact Match | Partial Match | No Match"}])");
  // The examples block is ours; everything around it must match.
  auto head = fixture.substr(0, fixture.find("{Several Examples}"));
  auto tail = fixture.substr(fixture.find("{Several Examples}") + std::string("{Several Examples}").size());
  CHECK(judge.substr(0, head.size()) == head);
  CHECK(judge.substr(judge.size() - tail.size()) == tail);
}

TEST_CASE("prompt modes") {
  auto cot = render_prompt("ctx", "q?", PromptMode::CoT);
  auto direct = render_prompt("ctx", "q?", PromptMode::Direct);
  auto reasoning = render_prompt("ctx", "q?", PromptMode::CoT, true);
  CHECK(cot.find("**Reasoning:**") != std::string::npos);
  CHECK(cot.find("Describe how you thought") != std::string::npos);
  CHECK(direct.find("Do not provide explanations or reasoning.") != std::string::npos);
  CHECK(direct.find("Do not include reasoning") != std::string::npos);
  CHECK(reasoning.find("**Reasoning:**") == std::string::npos);
  CHECK(reasoning.find("- **Answer:**") != std::string::npos);
  CHECK(render_prompt("ctx", "q?", PromptMode::Direct, true) == direct);
  CHECK(parse_prompt_mode("CoT") == PromptMode::CoT);
  CHECK(parse_prompt_mode("direct") == PromptMode::Direct);
  CHECK_FALSE(parse_prompt_mode("fast"));
}

TEST_CASE("render_prompt is injective in (context, question)") {
  std::mt19937 rng(7);
  const std::string alphabet = "ab{}`\n -*";
  auto random_text = [&] {
    std::string s;
    std::size_t n = rng() % 8;
    for (std::size_t k = 0; k < n; ++k) s += alphabet[rng() % alphabet.size()];
    return s;
  };
  for (PromptMode mode : {PromptMode::CoT, PromptMode::Direct}) {
    std::map<std::string, std::pair<std::string, std::string>> seen;
    for (int k = 0; k < 3000; ++k) {
      std::string c = random_text(), q = random_text();
      // Backtick fences inside the inputs can forge the separator; exclude them.
      if (c.find("```") != std::string::npos || q.find("```") != std::string::npos) continue;
      auto [it, inserted] = seen.emplace(render_prompt(c, q, mode), std::make_pair(c, q));
      if (!inserted) CHECK(it->second == std::make_pair(c, q));
    }
  }
}

TEST_CASE("extract_answer") {
  auto a6 = extract_answer(kFig6);
  CHECK(a6.answer == "Kazan International Airport, Russia; 7 distinct source airports.");
  CHECK(a6.marker_found);
  REQUIRE(a6.reasoning);
  CHECK(a6.reasoning->find("identify all the flights") != std::string::npos);

  CHECK(extract_answer(kFig7).answer == "Kazan International Airport, Russia; 6 distinct source airports.");
  CHECK(extract_answer(kFig8).answer.rfind("After analyzing the sentences", 0) == 0);

  auto none = extract_answer("- **Answer:** No answer.");
  CHECK(none.answer == kNoAnswer);
  CHECK(none.no_answer);

  auto bare = extract_answer("  Kazan, Russia, 7\n");
  CHECK_FALSE(bare.marker_found);
  CHECK(bare.answer == "Kazan, Russia, 7");

  // The last marker wins, e.g. when the template is echoed back.
  CHECK(extract_answer("**Answer:** [Provide ...]\n**Answer:** Syrah").answer == "Syrah");
  CHECK(extract_answer("**Answer:**   ").answer == kNoAnswer);
}

TEST_CASE("extract_answer recovers the mock's listing") {
  std::mt19937 rng(11);
  auto responder = std::make_shared<MockResponder>();
  for (int k = 0; k < 200; ++k) {
    ResultSet gold{{"a", "b"}, {}, false};
    std::size_t rows = 1 + rng() % 4;
    for (std::size_t r = 0; r < rows; ++r)
      gold.rows.push_back({Value("name " + std::to_string(rng() % 100)), Value(static_cast<std::int64_t>(rng() % 1000))});
    std::string context = "doc " + std::to_string(k), question = "question " + std::to_string(k);
    responder->add(context, question, gold);
    auto reply = responder->respond(render_prompt(context, question, k % 2 ? PromptMode::CoT : PromptMode::Direct));
    CHECK(extract_answer(reply).answer == MockResponder::echo_answer(gold));
  }
}

TEST_CASE("in-process mock answers by listing the gold rows") {
  auto responder = std::make_shared<MockResponder>();
  responder->add("ctx", "Which airport?", kKazanGold);
  responder->add("ctx", "Nothing?", ResultSet{{"x"}, {}, false});
  MockChatClient client(responder);

  auto r = query_model(client, render_prompt("ctx", "Which airport?", PromptMode::CoT));
  CHECK(r.answer == "Kazan International Airport, Russia, 7");
  DeterministicJudge judge;
  CHECK(score_instance(judge_rows("Which airport?", r.answer, kKazanGold, judge)) == 100.0);

  CHECK(query_model(client, render_prompt("ctx", "Nothing?", PromptMode::CoT)).answer == kNoAnswer);
  CHECK(query_model(client, render_prompt("other", "Which airport?", PromptMode::CoT)).answer == kNoAnswer);

  MockChatClient decliner(std::make_shared<MockResponder>(MockBehavior::NoAnswer));
  CHECK(query_model(decliner, render_prompt("ctx", "Which airport?", PromptMode::CoT)).answer == kNoAnswer);

  ResultSet with_null{{"a", "b"}, {{Value("x"), Value()}}, false};
  CHECK(MockResponder::echo_answer(with_null) == "x, None");
}

TEST_CASE("HTTP client against the mock server") {
  auto responder = std::make_shared<MockResponder>();
  responder->add("ctx", "Which airport?", kKazanGold);
  MockServer server(responder);
  server.start();
  HttpChatClient client(fast_config(server.base_url()));
  const std::string prompt = render_prompt("ctx", "Which airport?", PromptMode::Direct);

  SUBCASE("plain success") {
    auto r = query_model(client, prompt);
    CHECK(r.answer == MockResponder::echo_answer(kKazanGold));
    CHECK(r.attempts == 1);
    CHECK(r.prompt_tokens.has_value());
  }
  SUBCASE("429 twice then success takes three attempts") {
    server.fail_first(2, 429);
    auto r = query_model(client, prompt);
    CHECK(r.attempts == 3);
    CHECK(r.answer == MockResponder::echo_answer(kKazanGold));
  }
  SUBCASE("persistent 503 exhausts retries") {
    server.fail_first(10, 503);
    try {
      client.complete(prompt);
      FAIL("expected RetriesExhausted");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::RetriesExhausted);
    }
    CHECK(server.requests_served() == 4);
  }
  SUBCASE("client errors are not retried") {
    server.fail_first(1, 401);
    try {
      client.complete(prompt);
      FAIL("expected EndpointRejected");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EndpointRejected);
      CHECK(std::string(e.what()).find("401") != std::string::npos);
    }
    CHECK(server.requests_served() == 1);
  }
  SUBCASE("rate limit spaces requests") {
    auto config = fast_config(server.base_url());
    config.max_requests_per_second = 20;
    HttpChatClient limited(config);
    auto started = std::chrono::steady_clock::now();
    for (int k = 0; k < 4; ++k) limited.complete(prompt);
    CHECK(std::chrono::steady_clock::now() - started >= std::chrono::milliseconds(140));
  }
}

TEST_CASE("unreachable host exhausts retries") {
  HttpChatClient client(fast_config("http://127.0.0.1:" + std::to_string(closed_port())));
  try {
    client.complete("hello");
    FAIL("expected RetriesExhausted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RetriesExhausted);
  }
}

TEST_CASE("endpoint configuration") {
  EndpointConfig c = fast_config("http://localhost:1");
  CHECK_NOTHROW(c.validate());
  c.temperature = 0.7;
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK_THROWS_AS(HttpChatClient{c}, Error);

  EndpointConfig d = fast_config("https://api.example.com");
  d.auth_env = "API_TOKEN";
  d.auth_header = "x-api-key";
  d.auth_prefix = "";
  d.max_requests_per_second = 2.5;
  EndpointConfig e = endpoint_from_json(endpoint_to_json(d));
  CHECK(endpoint_to_json(e) == endpoint_to_json(d));
  CHECK(endpoint_from_json(nlohmann::json{{"base_url", "http://x"}}).temperature == 0.0);
  CHECK_THROWS_AS(endpoint_from_json(nlohmann::json{{"max_tokens", "many"}}), Error);
}

TEST_CASE("model judge agrees with the rule judge through the mock") {
  auto responder = std::make_shared<MockResponder>();
  MockChatClient client(responder, "mock-judge");
  ModelJudge model(client);
  DeterministicJudge rules;
  CHECK(model.kind() == "model:mock-judge");

  const std::vector<std::pair<std::string, ResultSet>> cases = {
      {extract_answer(kFig6).answer, kKazanGold},
      {extract_answer(kFig7).answer, kKazanGold},
      {extract_answer(kFig8).answer, kChengduGold},
  };
  const std::vector<RowLabel> expected = {RowLabel::ExactMatch, RowLabel::PartialMatch, RowLabel::NoMatch};
  for (std::size_t k = 0; k < cases.size(); ++k) {
    auto via_model = judge_rows("q", cases[k].first, cases[k].second, model);
    CHECK(via_model == judge_rows("q", cases[k].first, cases[k].second, rules));
    CHECK(via_model == std::vector<RowLabel>{expected[k]});
  }

  ResultSet multi{{"g", "n"}, {{Value("Zinfandel"), Value(4)}, {Value("Syrah"), Value(3)}, {Value(1.5), Value()}}, false};
  CHECK(judge_rows("q", "Zinfandel 4, Syrah 2, 1.5", multi, model) == judge_rows("q", "Zinfandel 4, Syrah 2, 1.5", multi, rules));
}

TEST_CASE("model judge reply parsing") {
  using L = RowLabel;
  CHECK(ModelJudge::parse_labels(R"(Here: [{"id": 2, "label": "No Match"}, {"id": 1, "label": "Exact Match"}])", 2) ==
        std::vector<L>{L::ExactMatch, L::NoMatch});
  CHECK(ModelJudge::parse_labels("```json\n[{\"id\": \"1\", \"label\": \"Partial Match\"}]\n```", 1) ==
        std::vector<L>{L::PartialMatch});
  // A list of ids without labels is skipped in favour of a later label list.
  CHECK(ModelJudge::parse_labels(R"(ids [1] then [{"label": "Exact Match"}])", 1) == std::vector<L>{L::ExactMatch});

  auto malformed = [](std::string_view reply, std::size_t n) {
    try {
      ModelJudge::parse_labels(reply, n);
    } catch (const Error& e) {
      return e.code() == ErrorCode::JudgeOutputMalformed;
    }
    return false;
  };
  CHECK(malformed("no list here", 1));
  CHECK(malformed(R"([{"id": 1, "label": "Exact Match"}])", 2));
  CHECK(malformed(R"([{"id": 1, "label": "Maybe"}])", 1));
  CHECK(malformed(R"([{"id": 5, "label": "Exact Match"}])", 1));

  HttpChatClient dead(fast_config("http://127.0.0.1:" + std::to_string(closed_port())));
  ModelJudge unavailable(dead);
  try {
    unavailable.label_rows("q", "a", kKazanGold);
    FAIL("expected JudgeUnavailable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::JudgeUnavailable);
  }
}

TEST_CASE("lexical retriever ranks by shared terms") {
  LexicalRetriever lexical;
  const std::string question = "Which wineries in Sonoma produce Zinfandel?";
  const std::string a = "Ridge wineries grow Zinfandel in Sonoma.";  // shares wineries, zinfandel, sonoma
  const std::string b = "The airport in Kazan serves Russia.";       // shares nothing but stop words
  auto scores = lexical.score(question, {b, a});
  CHECK(scores == std::vector<double>{0.0, 3.0});

  TokenCounter counter;
  auto one = retrieve({b, a}, question, counter(a), lexical, counter);
  CHECK(one.kept == std::vector<std::size_t>{1});
  CHECK(one.context == a);

  // Ties keep the original order; admitted documents come back in context order.
  std::vector<std::string> docs = {"x Sonoma", "y Zinfandel", "z", "w Sonoma Zinfandel"};
  auto two = retrieve(docs, question, counter(docs[3]) + counter(docs[0]), lexical, counter);
  CHECK(two.kept == std::vector<std::size_t>{0, 3});
  CHECK(two.context == "x Sonoma\nw Sonoma Zinfandel");

  CHECK_THROWS_AS(retrieve(docs, question, 0, lexical, counter), Error);
  try {
    retrieve({"one two three four five six"}, question, 1, lexical, counter);
    FAIL("expected BudgetInfeasible");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BudgetInfeasible);
  }
}

TEST_CASE("retrieval over a generated instance") {
  Database db = prepared_database("wine_1");
  auto templates = fixture_templates("wine_1");
  CorpusConfig config;
  config.context_tokens = 8000;
  config.info.density = 0.5;
  config.position = PositionStrategy::Uniform;
  config.seed = 5;
  auto instance = build_instance(db, templates, suite_spec("w1"), config);
  auto docs = instance.documents();
  REQUIRE(docs.size() == instance.provenance.document_count);
  TokenCounter counter;
  std::size_t total = 0;
  for (const auto& d : docs) total += counter(d);

  LexicalRetriever lexical;
  auto all = retrieve(docs, instance.question, total, lexical, counter);
  CHECK(all.context == instance.context);
  CHECK(all.kept.size() == docs.size());

  auto two_k = retrieve(docs, instance.question, 2000, lexical, counter);
  std::size_t sum = 0;
  for (std::size_t k : two_k.kept) sum += counter(docs[k]);
  CHECK(sum == two_k.tokens);
  CHECK(sum <= 2000);
  CHECK(std::is_sorted(two_k.kept.begin(), two_k.kept.end()));

  auto quality = retrieval_quality(two_k.kept, instance.provenance.relevant_positions);
  CHECK(quality.precision >= 0.0);
  CHECK(quality.precision <= 1.0);
  CHECK(quality.recall >= 0.0);
  CHECK(quality.recall <= 1.0);
  auto perfect = retrieval_quality(instance.provenance.relevant_positions, instance.provenance.relevant_positions);
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(retrieval_quality({}, {}).recall == 1.0);
  CHECK(retrieval_quality({0, 1, 2, 3}, {1, 5}).precision == 0.25);
  CHECK(retrieval_quality({0, 1, 2, 3}, {1, 5}).recall == 0.5);
}

TEST_CASE("retrieve is greedy stop-before-exceed over the ranking") {
  std::mt19937 rng(3);
  TokenCounter counter;
  LexicalRetriever lexical;
  const std::vector<std::string> vocab = {"wine", "price", "sonoma", "grape", "red", "county", "airport", "kazan"};
  for (int round = 0; round < 300; ++round) {
    std::vector<std::string> docs(1 + rng() % 12);
    for (auto& d : docs) {
      std::size_t words = 1 + rng() % 9;
      for (std::size_t w = 0; w < words; ++w) d += (w ? " " : "") + vocab[rng() % vocab.size()];
    }
    std::string question = vocab[rng() % vocab.size()] + " " + vocab[rng() % vocab.size()];
    std::size_t budget = 1 + rng() % 40;

    // Oracle: selection sort on (score desc, index asc), then admit in that order.
    auto scores = lexical.score(question, docs);
    std::vector<std::size_t> ranking, remaining(docs.size());
    for (std::size_t k = 0; k < docs.size(); ++k) remaining[k] = k;
    while (!remaining.empty()) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < remaining.size(); ++k)
        if (scores[remaining[k]] > scores[remaining[best]]) best = k;
      ranking.push_back(remaining[best]);
      remaining.erase(remaining.begin() + static_cast<long>(best));
    }
    std::vector<std::size_t> expected;
    std::size_t used = 0;
    for (std::size_t index : ranking) {
      if (used + counter(docs[index]) > budget) break;
      used += counter(docs[index]);
      expected.push_back(index);
    }
    std::sort(expected.begin(), expected.end());

    if (expected.empty()) {
      CHECK_THROWS_AS(retrieve(docs, question, budget, lexical, counter), Error);
      continue;
    }
    auto got = retrieve(docs, question, budget, lexical, counter);
    CHECK(got.kept == expected);
    CHECK(got.tokens == used);
  }
}

TEST_CASE("embedding retriever uses the endpoint's vectors") {
  auto responder = std::make_shared<MockResponder>();
  MockServer server(responder);
  server.start();
  EmbeddingRetriever retriever(fast_config(server.base_url()), 2);
  CHECK(retriever.kind() == "endpoint");
  std::vector<std::string> docs = {"Kazan airport Russia", "Sonoma wine price", "wine grape Sonoma county", "red"};
  const std::string question = "Sonoma wine";
  auto scores = retriever.score(question, docs);
  REQUIRE(scores.size() == docs.size());
  auto q = mock_embedding(question);
  for (std::size_t k = 0; k < docs.size(); ++k) {
    auto d = mock_embedding(docs[k]);
    double dot = 0;
    for (std::size_t i = 0; i < q.size(); ++i) dot += q[i] * d[i];
    CHECK(scores[k] == doctest::Approx(dot));
  }
  CHECK(scores[1] > scores[0]);
  auto kept = retrieve(docs, question, 4, retriever);
  CHECK(kept.kept == std::vector<std::size_t>{1});
}
