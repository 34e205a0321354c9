#include <doctest.h>

#include <sstream>

#include "games.hpp"
#include "verdict/agents.hpp"
#include "verdict/classifier.hpp"

using namespace verdict;
using namespace verdict::testing;

namespace {

MoveContext x_ctx(const GameSpec& g, const ConversationState& s, Rng& rng) {
  return MoveContext{g, s, Player::X, std::nullopt, 0, nullptr, rng};
}

// Ten prosecutor lines; "w3" and "w7" convict when Y answers "vague".
GameSpec witness_game(std::size_t d) {
  GameSpec g = builtin_game("court");
  g.max_stages = d;
  std::vector<Utterance> xs;
  for (int i = 0; i < 10; ++i)
    xs.push_back(Utterance({(i == 3 || i == 7 ? "w" : "q") + std::to_string(i)}));
  g.menus[0] = {MenuRule{std::nullopt, std::nullopt, xs}};
  g.menus[1] = {MenuRule{std::nullopt, std::nullopt, moves({"deny"})},
                MenuRule{std::string("w3"), std::nullopt, moves({"vague"})},
                MenuRule{std::string("w7"), std::nullopt, moves({"vague"})}};
  using Tr = KeywordClassifier::Trigger;
  g.classifier = std::make_shared<KeywordClassifier>(
      std::vector<Tr>{Tr{{"w3"}, {"vague"}}, Tr{{"w7"}, {"vague"}}}, std::vector<Tr>{});
  return g;
}

}  // namespace

TEST_CASE("naive move") {
  GameSpec g = tiny_court(1);
  const auto s = g.initial_state();
  SUBCASE("singleton menu") {
    g.menus[0] = {MenuRule{std::nullopt, std::nullopt, moves({"q1"})}};
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      Rng rng(seed);
      CHECK(naive_move(x_ctx(g, s, rng)) == U("q1"));
    }
  }
  SUBCASE("reproducible") {
    Rng a(42), b(42);
    for (int i = 0; i < 20; ++i) CHECK(naive_move(x_ctx(g, s, a)) == naive_move(x_ctx(g, s, b)));
  }
  SUBCASE("uniform over a 3-move menu") {
    g.alphabet.push_back("q3");
    g.menus[0] = {MenuRule{std::nullopt, std::nullopt, moves({"q1", "q2", "q3"})}};
    std::map<Utterance, int> counts;
    for (std::uint64_t seed = 0; seed < 3000; ++seed) {
      Rng rng(seed);
      ++counts[naive_move(x_ctx(g, s, rng))];
    }
    double chi2 = 0;
    for (const auto& [m, c] : counts) {
      CHECK(std::abs(c / 3000.0 - 1.0 / 3) <= 0.03);
      chi2 += (c - 1000.0) * (c - 1000.0) / 1000.0;
    }
    CHECK(chi2 < 9.21);  // chi-square, 2 dof, 1%
  }
}

TEST_CASE("strategic move") {
  SUBCASE("breadth 1 equals the naive sample") {
    const GameSpec g = tiny_court(2);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng a(seed), b(seed);
      const auto s = g.initial_state();
      CHECK(strategic_move(x_ctx(g, s, a), StrategicParams{1, 1, 1}) == naive_move(x_ctx(g, s, b)));
    }
  }
  SUBCASE("one of ten candidates convicts next stage") {
    // Only "w3" convicts, and only against the reply "vague", which is Y's
    // sole answer to it. Every other line leaves the case open.
    GameSpec g = witness_game(1);
    g.menus[1].pop_back();
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      Rng rng(seed);
      const auto s = g.initial_state();
      const auto i = introspect(x_ctx(g, s, rng), StrategicParams{10, 1, 1}, naive_move, true,
                                naive_move, naive_move);
      REQUIRE(i.candidates.size() == 10);
      CHECK(i.candidates[i.chosen] == U("w3"));
    }
  }
  SUBCASE("full lookahead with an SPE opponent reproduces the SPE") {
    GameSpec g = tiny_court(2);
    g.menus[1].push_back(MenuRule{std::string("q2"), std::nullopt, moves({"a2", "a1"})});
    g.menus[0].push_back(MenuRule{std::string("a2"), std::nullopt, moves({"q2", "q1"})});
    auto solved = std::make_shared<const SolveResult>(solve_backward_induction(g));
    const MovePolicy spe = spe_policy(solved);
    const auto s0 = g.initial_state();
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Rng rng(seed);
      const StrategicParams p{10, g.max_stages, 1};
      CHECK(strategic_move(x_ctx(g, s0, rng), p, spe, spe) ==
            *solved->lookup(decision_key(s0, std::nullopt, Player::X)));
      // Y to move after each X line.
      for (const auto& x : legal_moves(g, s0, Player::X)) {
        MoveContext yc{g, s0, Player::Y, x, 0, nullptr, rng};
        CHECK(strategic_move(yc, p, spe, spe) == *solved->lookup(decision_key(s0, x, Player::Y)));
      }
    }
  }
  SUBCASE("choice is invariant under positive affine utility maps") {
    GameSpec g = witness_game(2);
    GameSpec h = g;
    for (auto pl : {Player::X, Player::Y})
      for (auto v : kAllVerdicts) h.utilities.set(pl, 0, 0, v, 3.0 * g.utilities.at(pl, 0, 0, v) + 7.0);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      Rng a(seed), b(seed);
      const auto s = g.initial_state();
      CHECK(strategic_move(x_ctx(g, s, a), StrategicParams{10, 1, 1}) ==
            strategic_move(x_ctx(h, s, b), StrategicParams{10, 1, 1}));
    }
  }
  SUBCASE("deterministic given the seed") {
    const GameSpec g = witness_game(2);
    Rng a(5), b(5);
    const auto s = g.initial_state();
    CHECK(strategic_move(x_ctx(g, s, a), StrategicParams{4, 1, 2}) ==
          strategic_move(x_ctx(g, s, b), StrategicParams{4, 1, 2}));
  }
  SUBCASE("breadth 0 is rejected") {
    const GameSpec g = tiny_court(1);
    Rng rng(1);
    const auto s = g.initial_state();
    CHECK_THROWS_AS(strategic_move(x_ctx(g, s, rng), StrategicParams{0, 1, 1}), PreconditionError);
  }
}

TEST_CASE("solver and scripted moves") {
  SUBCASE("exact solver plays the SPE") {
    GameSpec g = tiny_court(1);
    g.menus[1].push_back(MenuRule{std::string("q2"), std::nullopt, moves({"a1"})});
    Rng rng(1);
    const auto s = g.initial_state();
    CHECK(solver_move(x_ctx(g, s, rng), Engine::Exact, 1000) == U("q2"));
    CHECK_THROWS_AS(solver_move(x_ctx(tiny_court(3), tiny_court(3).initial_state(), rng), Engine::Exact, 5),
                    BudgetExceeded);
  }
  SUBCASE("ismcts with a point-mass belief equals mcts") {
    const GameSpec g = probe_game();
    const auto s = g.initial_state();
    for (std::size_t ty : {0u, 1u}) {
      const Belief b = Belief::point_mass(2, ty);
      Rng r1(3), r2(3);
      MoveContext c1{g, s, Player::X, std::nullopt, 0, &b, r1};
      const GameSpec own = induce_complete_info(g, 0, ty);
      CHECK(solver_move(c1, Engine::Ismcts, 200) == solver_move(x_ctx(own, s, r2), Engine::Mcts, 200));
    }
  }
  SUBCASE("scripted") {
    const GameSpec g = tiny_court(3);
    const std::vector<Utterance> script = moves({"q1", "q2"});
    Rng rng(0);
    auto s = g.initial_state();
    CHECK(scripted_move(x_ctx(g, s, rng), script) == U("q1"));
    s = advance(g, s, U("q1"), U("a1"));
    CHECK(scripted_move(x_ctx(g, s, rng), script) == U("q2"));
    s = advance(g, s, U("q2"), U("a2"));
    CHECK_THROWS_AS(scripted_move(x_ctx(g, s, rng), script), ScriptExhausted);
  }
}

TEST_CASE("agent configs") {
  AgentConfig c;
  c.kind = AgentKind::Strategic;
  c.breadth = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = AgentConfig{};
  c.kind = AgentKind::Scripted;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(make_agent(AgentConfig{.kind = AgentKind::Human}, {}), ConfigError);
  CHECK(desired_verdict(builtin_game("court"), Player::X, 0, 0) == Verdict::One);
  CHECK(desired_verdict(builtin_game("interrogation"), Player::X, 0, 0) == Verdict::Zero);
  CHECK(desired_verdict(builtin_game("court"), Player::Y, 0, 0) == Verdict::Zero);
  CHECK(agent_kind_from_string("strategic") == AgentKind::Strategic);
  CHECK_THROWS_AS(engine_from_string("alphabeta"), ConfigError);
}

TEST_CASE("human agent") {
  const GameSpec g = tiny_court(1);
  const auto s = g.initial_state();
  Rng rng(0);
  SUBCASE("index, re-prompt and text") {
    std::istringstream in("7\nabc\n2\n");
    std::ostringstream out;
    HumanAgent h(in, out);
    CHECK(h.move(x_ctx(g, s, rng)) == U("q2"));
    CHECK(out.str().find("between 1 and 2") != std::string::npos);
    CHECK(out.str().find("Not on the menu") != std::string::npos);
    std::istringstream in2("q1\n");
    HumanAgent h2(in2, out);
    CHECK(h2.move(x_ctx(g, s, rng)) == U("q1"));
  }
  SUBCASE("quit and EOF abort") {
    std::ostringstream out;
    std::istringstream quit("quit\n");
    CHECK_THROWS_AS(HumanAgent(quit, out).move(x_ctx(g, s, rng)), HumanAbort);
    std::istringstream eof("");
    CHECK_THROWS_AS(HumanAgent(eof, out).move(x_ctx(g, s, rng)), HumanAbort);
  }
  SUBCASE("free text") {
    GameSpec open = g;
    open.alphabet.clear();
    open.menus = {};
    std::istringstream in("far too long\nshort\n");
    std::ostringstream out;
    CHECK(HumanAgent(in, out).move(x_ctx(open, s, rng)) == U("short"));
    CHECK(out.str().find("Illegal move") != std::string::npos);
  }
}
