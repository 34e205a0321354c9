#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "games.hpp"
#include "verdict/llm.hpp"

using namespace verdict;
using namespace verdict::testing;
using namespace std::chrono_literals;

namespace {

ChatRequest simple(const std::string& text, std::optional<std::uint64_t> seed = std::nullopt) {
  ChatRequest r;
  r.model_id = "m";
  r.messages = {{"system", "sys"}, {"user", text}};
  r.sampling.seed = seed;
  return r;
}

std::shared_ptr<MockBackend> judge_mock() {
  std::vector<MockBackend::Rule> rules = {
      {{"STRICT"}, {"mumble"}, {}, {"Innocent"}},
      {{}, {"mumble"}, {}, {"hmm, hard to say"}},
      {{}, {"doubt"}, {}, {"maybe guilty, maybe innocent"}},
      {{}, {"alibi"}, {}, {"innocent."}},
      {{}, {"never"}, {}, {"still thinking"}},
  };
  return std::make_shared<MockBackend>(std::map<std::string, std::string>{}, rules,
                                       "Verdict: Guilty");
}

JudgeConfig judge_cfg() {
  JudgeConfig c;
  c.instruction = "Answer Guilty, Innocent or Non-conclusive.";
  c.strict_instruction = "STRICT: one word only.";
  c.case_context = "case";
  return c;
}

// Local chat-completions endpoint whose behaviour is set per test.
struct FakeServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<int> hits{0};
  std::atomic<int> in_flight{0};
  std::atomic<int> max_in_flight{0};
  std::function<void(const httplib::Request&, httplib::Response&, int)> behaviour;

  FakeServer() {
    server.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      const int n = ++hits;
      const int now = ++in_flight;
      int prev = max_in_flight.load();
      while (now > prev && !max_in_flight.compare_exchange_weak(prev, now)) {}
      behaviour(req, res, n);
      --in_flight;
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~FakeServer() {
    server.stop();
    thread.join();
  }
  HttpBackendConfig config() const {
    HttpBackendConfig c;
    c.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
    c.api_key = "test-key";
    c.retry.base_delay = 1ms;
    c.retry.max_delay = 4ms;
    c.requests_per_second = 0;  // unlimited
    return c;
  }
};

void reply(httplib::Response& res, const std::string& text) {
  nlohmann::json j{{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}}};
  res.set_content(j.dump(), "application/json");
}

}  // namespace

TEST_CASE("mock backend") {
  auto m = judge_mock();
  CHECK(chat(*m, simple("he has an alibi")) == "innocent.");
  CHECK(chat(*m, simple("anything")) == "Verdict: Guilty");
  CHECK_THROWS_AS(chat(*m, ChatRequest{}), PreconditionError);
  ChatRequest zero = simple("x");
  zero.timeout = 0ms;
  CHECK_THROWS_AS(chat(*m, zero), PreconditionError);

  SUBCASE("exact digests win, seeds pick among replies") {
    const ChatRequest r = simple("hello", 7);
    MockBackend exact({{request_digest(r), "exact"}}, {{{}, {}, {}, {"a", "b", "c"}}}, std::nullopt);
    CHECK(chat(exact, r) == "exact");
    std::set<std::string> seen;
    for (std::uint64_t s = 0; s < 30; ++s) seen.insert(chat(exact, simple("hi", s)));
    CHECK(seen.size() == 3);
    CHECK(chat(exact, simple("hi", 3)) == chat(exact, simple("hi", 3)));
  }
  SUBCASE("no match without default") {
    MockBackend none({}, {}, std::nullopt);
    CHECK_THROWS_AS(chat(none, simple("x")), TransportError);
  }
  SUBCASE("fixture file") {
    const auto path = std::filesystem::temp_directory_path() / "verdict_mock_fixture.json";
    std::ofstream(path) << R"({"fixture_version": 1,
      "rules": [{"last_contains_any": ["WHERE", "when"], "replies": ["at home"]}],
      "default": "no comment"})";
    auto f = MockBackend::from_file(path);
    CHECK(chat(*f, simple("where were you")) == "at home");
    CHECK(chat(*f, simple("why")) == "no comment");
    std::ofstream(path) << R"({"fixture_version": 2})";
    CHECK_THROWS_AS(MockBackend::from_file(path), ConfigError);
    std::filesystem::remove(path);
  }
  CHECK(request_digest(simple("a", 1)) != request_digest(simple("a", 2)));
  CHECK(request_digest(simple("a", 1)) == request_digest(simple("a", 1)));
}

TEST_CASE("judge label parsing") {
  CHECK(parse_judge_label("Verdict: Guilty").verdict == Verdict::One);
  CHECK(parse_judge_label("innocent.").verdict == Verdict::Zero);
  CHECK(parse_judge_label("NON-CONCLUSIVE").verdict == Verdict::Cont);
  CHECK(parse_judge_label("Inconclusive for now").verdict == Verdict::Cont);
  const auto amb = parse_judge_label("maybe guilty, maybe innocent");
  CHECK(amb.verdict == Verdict::One);
  CHECK(amb.ambiguous);
  CHECK(!parse_judge_label("not-guiltyish").verdict.has_value());
  CHECK(!parse_judge_label("hmm").verdict.has_value());
}

TEST_CASE("llm judge") {
  auto m = judge_mock();
  const JudgeConfig cfg = judge_cfg();
  AuditTrail audit;
  auto ask = [&](const char* transcript) {
    return llm_judge(*m, cfg, JudgePrompt{"case", transcript, cfg.instruction}, &audit);
  };
  CHECK(ask("X: where\nY: home") == Verdict::One);
  CHECK(ask("X: where\nY: alibi") == Verdict::Zero);
  CHECK(ask("X: where\nY: doubt") == Verdict::One);
  CHECK(std::any_of(audit.events.begin(), audit.events.end(),
                    [](const AuditEvent& e) { return e.kind == "judge_ambiguous"; }));
  // First reply unparseable, the strict re-ask answers.
  audit.events.clear();
  CHECK(ask("X: where\nY: mumble") == Verdict::Zero);
  CHECK(audit.events.size() >= 2);
  CHECK_THROWS_AS(ask("X: where\nY: never"), JudgeParseError);
  CHECK_THROWS_AS(ask(""), PreconditionError);

  SUBCASE("as a classifier") {
    LlmJudge j(m, cfg);
    ConversationState s;
    s.stages.push_back(Stage{U("where"), U("alibi")});
    CHECK(j.classify(s) == Verdict::Zero);
    CHECK(j.deterministic());
    CHECK(j.config_json().empty());
    CHECK_THROWS_AS(j.classify(ConversationState{}), PreconditionError);
  }
}

TEST_CASE("llm players") {
  SUBCASE("tokenizing replies") {
    CHECK(to_utterance("I was at home.", 10).utterance == U("I was at home."));
    const auto cut = to_utterance("one two three four", 2);
    CHECK(cut.utterance == U("one two"));
    CHECK(cut.truncated);
    CHECK(to_utterance("a#b @c", 5).utterance == U("ab c"));
    CHECK(to_utterance("  ", 5).utterance == U("..."));
  }
  GameSpec g = builtin_game("court");
  g.max_stages = 3;
  g.max_utterance_length = 4;
  g.classifier = constant(Verdict::Cont);
  auto m = std::make_shared<MockBackend>(
      std::map<std::string, std::string>{},
      std::vector<MockBackend::Rule>{{{"defence"}, {}, {}, {"I deny everything you say here"}},
                                     {{"prosecutor"}, {}, {}, {"Where were you?", "Who saw you?"}}},
      std::nullopt);
  LlmPlayerConfig defence{"m", "You are the defence.", "", 1.0, 50};
  LlmPlayerConfig prosecutor{"m", "You are the prosecutor.", "Case.", 1.0, 50};

  SUBCASE("canned denial, truncated and flagged") {
    Rng rng(1);
    AuditTrail audit;
    const auto s = g.initial_state();
    MoveContext ctx{g, s, Player::Y, U("Where were you?"), 0, nullptr, rng, &audit};
    const auto r = llm_player_move(*m, defence, ctx);
    CHECK(r.utterance == U("I deny everything you"));
    CHECK(r.truncated);
    CHECK(audit.events.back().kind == "truncated");
  }
  SUBCASE("request layout") {
    Rng rng(1);
    auto s = g.initial_state();
    s = apply_stage(g, s, U("q"), U("a"), Verdict::Cont);
    MoveContext ctx{g, s, Player::X, std::nullopt, 0, nullptr, rng};
    const auto req = player_request(prosecutor, ctx, 5);
    REQUIRE(req.messages.size() == 3);
    CHECK(req.messages[0].role == "system");
    CHECK(req.messages[0].text.find("Case.") != std::string::npos);
    CHECK(req.messages[1].role == "assistant");
    CHECK(req.messages[2].role == "user");
    CHECK(req.messages[2].text == "a");
    CHECK(req.sampling.seed == 5u);
    MoveContext first{g, g.initial_state(), Player::X, std::nullopt, 0, nullptr, rng};
    const auto opening = player_request(prosecutor, first, 5);
    REQUIRE(opening.messages.size() == 2);
    CHECK(opening.messages[1].text == "Begin.");
  }
  SUBCASE("seeded transcripts replay") {
    auto play = [&](std::uint64_t seed) {
      Rng xr(seed), yr(seed + 1);
      auto s = g.initial_state();
      while (!is_terminal(g, s)) {
        MoveContext xc{g, s, Player::X, std::nullopt, 0, nullptr, xr};
        const auto x = llm_player_move(*m, prosecutor, xc).utterance;
        MoveContext yc{g, s, Player::Y, x, 0, nullptr, yr};
        s = advance(g, s, x, llm_player_move(*m, defence, yc).utterance);
      }
      return serialize(s, SerializeStyle::SpeakerLabels);
    };
    CHECK(play(11) == play(11));
  }
}

TEST_CASE("http backend") {
  FakeServer srv;
  SUBCASE("success carries the bearer key and the body") {
    std::string auth, model;
    srv.behaviour = [&](const httplib::Request& req, httplib::Response& res, int) {
      auth = req.get_header_value("Authorization");
      model = nlohmann::json::parse(req.body).at("model").get<std::string>();
      reply(res, "hello");
    };
    HttpBackend b(srv.config());
    const auto r = b.complete(simple("hi", 3));
    CHECK(r.text == "hello");
    CHECK(r.attempts == 1);
    CHECK(auth == "Bearer test-key");
    CHECK(model == "m");
  }
  SUBCASE("transient failure is retried") {
    srv.behaviour = [](const httplib::Request&, httplib::Response& res, int n) {
      if (n < 3)
        res.status = 503;
      else
        reply(res, "ok");
    };
    HttpBackend b(srv.config());
    AuditTrail audit;
    CHECK(chat(b, simple("hi"), &audit) == "ok");
    CHECK(audit.events.back().attempts == 3);
    CHECK(srv.hits == 3);
  }
  SUBCASE("server errors exhaust the attempts") {
    srv.behaviour = [](const httplib::Request&, httplib::Response& res, int) { res.status = 500; };
    HttpBackend b(srv.config());
    CHECK_THROWS_AS(b.complete(simple("hi")), TransportError);
    CHECK(srv.hits == 3);
  }
  SUBCASE("auth failure is not retried") {
    srv.behaviour = [](const httplib::Request&, httplib::Response& res, int) { res.status = 401; };
    HttpBackend b(srv.config());
    AuditTrail audit;
    CHECK_THROWS_AS(chat(b, simple("hi"), &audit), AuthError);
    CHECK(srv.hits == 1);
    CHECK(!audit.events.back().ok);
  }
  SUBCASE("rate limit after retries") {
    srv.behaviour = [](const httplib::Request&, httplib::Response& res, int) { res.status = 429; };
    HttpBackend b(srv.config());
    CHECK_THROWS_AS(b.complete(simple("hi")), RateLimitError);
    CHECK(srv.hits == 3);
  }
  SUBCASE("timeout") {
    srv.behaviour = [](const httplib::Request&, httplib::Response& res, int) {
      std::this_thread::sleep_for(300ms);
      reply(res, "late");
    };
    auto cfg = srv.config();
    cfg.retry.max_attempts = 1;
    HttpBackend b(cfg);
    ChatRequest r = simple("hi");
    r.timeout = 50ms;
    CHECK_THROWS_AS(b.complete(r), TimeoutError);
  }
  SUBCASE("missing key") {
    srv.behaviour = [](const httplib::Request&, httplib::Response& res, int) { reply(res, "x"); };
    auto cfg = srv.config();
    cfg.api_key.reset();
    cfg.api_key_env = "VERDICT_TEST_UNSET_KEY_VARIABLE";
    HttpBackend b(cfg);
    CHECK_THROWS_AS(b.complete(simple("hi")), AuthError);
    CHECK(srv.hits == 0);
  }
  SUBCASE("in-flight cap") {
    srv.behaviour = [](const httplib::Request&, httplib::Response& res, int) {
      std::this_thread::sleep_for(30ms);
      reply(res, "ok");
    };
    auto cfg = srv.config();
    cfg.max_in_flight = 2;
    HttpBackend b(cfg);
    std::vector<std::thread> ts;
    std::atomic<int> ok{0};
    for (int i = 0; i < 6; ++i)
      ts.emplace_back([&] {
        if (b.complete(simple("hi")).text == "ok") ++ok;
      });
    for (auto& t : ts) t.join();
    CHECK(ok == 6);
    CHECK(srv.max_in_flight <= 2);
  }
  CHECK_THROWS_AS(HttpBackend(HttpBackendConfig{.base_url = "no-scheme"}), ConfigError);
}

TEST_CASE("rate limiter spaces requests") {
  RateLimiter lim(50.0, 1.0);
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < 6; ++i) lim.acquire();
  CHECK(std::chrono::steady_clock::now() - t0 >= 90ms);
}
