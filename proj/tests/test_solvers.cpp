#include <doctest.h>

#include <functional>

#include "games.hpp"
#include "verdict/solvers.hpp"

using namespace verdict;
using namespace verdict::testing;

namespace {

// Payoffs of playing `policy` from (state, pending) in a complete-information
// game, with one decision overridden.
std::array<double, 2> play_out(const GameSpec& g, const SolveResult& r, ConversationState s,
                               std::optional<Utterance> pending, const std::string& dev_key,
                               const Utterance& dev_move) {
  auto choose = [&](const std::string& key) -> Utterance {
    if (key == dev_key) return dev_move;
    const Utterance* u = r.lookup(key);
    REQUIRE(u != nullptr);
    return *u;
  };
  while (true) {
    if (!pending) {
      if (is_terminal(g, s)) break;
      pending = choose(decision_key(s, std::nullopt, Player::X));
    }
    const Utterance y = choose(decision_key(s, pending, Player::Y));
    s = advance(g, s, *pending, y);
    pending.reset();
  }
  const Verdict v = terminal_verdict(g, s);
  return {payoff(g, Player::X, 0, 0, v), payoff(g, Player::Y, 0, 0, v)};
}

// Every decision point reachable from the root, whatever is played.
void decision_points(const GameSpec& g, const ConversationState& s,
                     std::vector<std::tuple<ConversationState, std::optional<Utterance>, Player>>& out) {
  if (is_terminal(g, s)) return;
  out.emplace_back(s, std::nullopt, Player::X);
  for (const auto& x : legal_moves(g, s, Player::X)) {
    out.emplace_back(s, x, Player::Y);
    for (const auto& y : legal_moves(g, s, Player::Y, x)) decision_points(g, advance(g, s, x, y), out);
  }
}

}  // namespace

TEST_CASE("backward induction on fixed games") {
  SUBCASE("constant Zero classifier") {
    GameSpec g = tiny_court(1);
    g.classifier = constant(Verdict::Zero);
    const auto r = solve_backward_induction(g);
    CHECK(r.root_value[0][0] == -1);
    CHECK(r.root_value[1][0] == 1);
  }
  SUBCASE("One only on (q2, a1), d = 1") {
    // Leaves: (q1,*) Cont, (q2,a1) One, (q2,a2) Cont. Y answers q2 with a2,
    // so X gets -1 either way and keeps the first menu entry.
    const GameSpec g = tiny_court(1);
    const auto r = solve_backward_induction(g);
    CHECK(r.root_value[0][0] == -1);
    CHECK(r.root_value[1][0] == 1);
    CHECK(*r.lookup(decision_key(g.initial_state(), std::nullopt, Player::X)) == U("q1"));
    CHECK(*r.lookup(decision_key(g.initial_state(), U("q2"), Player::Y)) == U("a2"));
  }
  SUBCASE("X wins when Y's only reply convicts") {
    GameSpec g = tiny_court(1);
    g.menus[1].push_back(MenuRule{std::string("q2"), std::nullopt, moves({"a1"})});
    const auto r = solve_backward_induction(g);
    CHECK(r.root_value[0][0] == 1);
    CHECK(*r.lookup(decision_key(g.initial_state(), std::nullopt, Player::X)) == U("q2"));
  }
  SUBCASE("court is zero-sum at the SPE") {
    const auto r = solve_backward_induction(tiny_court(3));
    CHECK(r.root_value[0][0] == -r.root_value[1][0]);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(solve_backward_induction(slip_game()), PreconditionError);
    CHECK_THROWS_AS(solve_backward_induction(tiny_court(3), SolveOptions{.node_budget = 5}),
                    BudgetExceeded);
  }
}

TEST_CASE("brute force agrees with backward induction") {
  for (std::size_t d : {1u, 2u}) {
    GameSpec g = tiny_court(d);
    g.menus[1].push_back(MenuRule{std::string("q2"), std::nullopt, moves({"a1", "a2"})});
    g.menus[0].push_back(MenuRule{std::string("a2"), std::nullopt, moves({"q2", "q1"})});
    const auto bi = solve_backward_induction(g);
    const auto bf = solve_bruteforce(g);
    REQUIRE(bf.status == SolveStatus::Ok);
    CHECK(bf.root_value == bi.root_value);
    CHECK(bf.policy == bi.policy);
  }
}

TEST_CASE("constant Cont: every profile pays the Cont column") {
  for (std::size_t d : {1u, 2u}) {
    GameSpec g = tiny_court(d);
    g.classifier = constant(Verdict::Cont);
    const auto r = solve_bruteforce(g);
    CHECK(r.root_value[0][0] == -1);
    CHECK(r.root_value[1][0] == 1);
  }
}

TEST_CASE("one-deviation property of the SPE") {
  GameSpec g = tiny_court(2);
  g.menus[1].push_back(MenuRule{std::string("q1"), std::nullopt, moves({"a1", "a2"})});
  g.utilities.set(Player::Y, 0, 0, Verdict::Cont, 0.5);  // general-sum variant
  const auto r = solve_backward_induction(g);
  std::vector<std::tuple<ConversationState, std::optional<Utterance>, Player>> points;
  decision_points(g, g.initial_state(), points);
  REQUIRE(points.size() > 4);
  for (const auto& [s, pending, mover] : points) {
    const std::string key = decision_key(s, pending, mover);
    const auto base = play_out(g, r, s, pending, "", Utterance{});
    for (const auto& m : legal_moves(g, s, mover, pending)) {
      const auto dev = play_out(g, r, s, pending, key, m);
      CHECK(dev[index(mover)] <= base[index(mover)]);
    }
  }
}

TEST_CASE("pure PBE in the slip game") {
  const GameSpec g = slip_game();
  const auto r = solve_bruteforce(g);
  REQUIRE(r.status == SolveStatus::Ok);
  // The guilty suspect never slips, so both types are exonerated.
  CHECK(*r.lookup(decision_key(g.initial_state(), U("ask"), Player::Y, "Guilty")) == U("deny"));
  CHECK(r.root_value[0] == std::vector<double>{1, -1});
  CHECK(r.expected_value(g, Player::X) == 0.0);
  CHECK(r.expected_value(g, Player::Y) == 1.0);
}

TEST_CASE("profile counting and cap") {
  CHECK(count_pure_profiles(tiny_court(1)) == 2 * 4);
  CHECK_THROWS_AS(solve_bruteforce(tiny_court(3), SolveOptions{.profile_cap = 10}), BudgetExceeded);
}

TEST_CASE("mcts") {
  const GameSpec g = tiny_court(2);
  SUBCASE("single-action menus") {
    GameSpec one = g;
    one.menus[0] = {MenuRule{std::nullopt, std::nullopt, moves({"q2"})}};
    const auto r = mcts(one, one.initial_state(), 50, kDefaultExploration, 1);
    CHECK(r.chosen == U("q2"));
    CHECK(r.root.visits == std::vector<std::size_t>{50});
  }
  SUBCASE("one iteration explores one action") {
    const auto r = mcts(g, g.initial_state(), 1, kDefaultExploration, 9);
    std::size_t explored = 0;
    for (auto v : r.root.visits) explored += v;
    CHECK(explored == 1);
    CHECK(r.root.visits[std::find(r.root.actions.begin(), r.root.actions.end(), r.chosen) -
                        r.root.actions.begin()] == 1);
  }
  SUBCASE("deterministic given the seed") {
    const auto a = mcts(g, g.initial_state(), 500, kDefaultExploration, 7);
    const auto b = mcts(g, g.initial_state(), 500, kDefaultExploration, 7);
    CHECK(a.chosen == b.chosen);
    CHECK(a.root.visits == b.root.visits);
  }
  SUBCASE("finds the convicting line") {
    GameSpec w = g;
    w.menus[1].push_back(MenuRule{std::string("q2"), std::nullopt, moves({"a1"})});
    CHECK(mcts(w, w.initial_state(), 2000, kDefaultExploration, 3).chosen == U("q2"));
  }
  SUBCASE("Y root") {
    const auto r = mcts(g, g.initial_state(), 500, kDefaultExploration, 3, U("q2"));
    CHECK(r.chosen == U("a2"));
  }
  SUBCASE("errors") {
    auto done = advance(g, g.initial_state(), U("q2"), U("a1"));
    CHECK_THROWS_AS(mcts(g, done, 10, kDefaultExploration, 1), GameOverError);
    CHECK_THROWS_AS(mcts(g, g.initial_state(), 0, kDefaultExploration, 1), PreconditionError);
    CHECK_THROWS_AS(mcts(probe_game(), probe_game().initial_state(), 10, kDefaultExploration, 1),
                    PreconditionError);
  }
}

TEST_CASE("ismcts") {
  const GameSpec g = probe_game();
  SUBCASE("point mass equals mcts on the induced game") {
    for (std::size_t ty : {0u, 1u})
      for (std::uint64_t seed : {1u, 2u, 3u}) {
        const GameSpec own = induce_complete_info(g, 0, ty);
        const auto a = ismcts(g, g.initial_state(), Belief::point_mass(2, ty), 300, kDefaultExploration, seed);
        const auto b = mcts(own, own.initial_state(), 300, kDefaultExploration, seed);
        CHECK(a.chosen == b.chosen);
        CHECK(a.root.visits == b.root.visits);
      }
  }
  SUBCASE("uniform belief picks the brute-force PBE probe") {
    const auto pbe = solve_bruteforce(g);
    REQUIRE(pbe.status == SolveStatus::Ok);
    const Utterance probe = *pbe.lookup(decision_key(g.initial_state(), std::nullopt, Player::X));
    CHECK(probe == U("probe"));
    CHECK(pbe.expected_value(g, Player::X) == 1.0);
    CHECK(ismcts(g, g.initial_state(), Belief::prior(g), 2000, kDefaultExploration, 5).chosen == probe);
  }
  SUBCASE("one iteration") {
    const auto r = ismcts(g, g.initial_state(), Belief::prior(g), 1, kDefaultExploration, 5);
    std::size_t explored = 0;
    for (auto v : r.root.visits) explored += v;
    CHECK(explored == 1);
  }
  SUBCASE("degenerate belief") {
    CHECK_THROWS_AS(ismcts(g, g.initial_state(), Belief{{0.0, 0.0}}, 10, kDefaultExploration, 1),
                    PreconditionError);
    CHECK_THROWS_AS(ismcts(g, g.initial_state(), Belief{{1.0}}, 10, kDefaultExploration, 1),
                    PreconditionError);
  }
}

TEST_CASE("belief updates") {
  const GameSpec g = slip_game();  // types {Non-Guilty, Guilty}
  const Belief half = Belief::prior(g);
  SUBCASE("uninformative likelihood keeps the prior") {
    TypePolicy p{{{U("deny"), 0.5}, {U("slip"), 0.5}}, {{U("deny"), 0.5}, {U("slip"), 0.5}}};
    CHECK(update_belief(half, g, U("deny"), p).p == half.p);
  }
  SUBCASE("0.9 vs 0.1") {
    TypePolicy p{{{U("deny"), 0.1}}, {{U("deny"), 0.9}}};
    const auto post = update_belief(half, g, U("deny"), p);
    CHECK(post.p[1] == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(post.p[0] == doctest::Approx(0.1).epsilon(1e-12));
  }
  SUBCASE("off path returns the prior") {
    TypePolicy p{{{U("deny"), 1.0}}, {{U("deny"), 1.0}}};
    const Belief skew{{0.2, 0.8}};
    CHECK(update_belief(skew, g, U("slip"), p).p == g.prior_y);
  }
  SUBCASE("point masses are fixed points") {
    TypePolicy p{{{U("deny"), 0.3}}, {{U("deny"), 0.6}}};
    CHECK(update_belief(Belief::point_mass(2, 1), g, U("deny"), p).p == std::vector<double>{0, 1});
  }
  SUBCASE("malformed policy") {
    TypePolicy p{{{U("deny"), -0.1}}, {{U("deny"), 1.0}}};
    CHECK_THROWS_AS(update_belief(half, g, U("deny"), p), PreconditionError);
    CHECK_THROWS_AS(update_belief(half, g, U("deny"), TypePolicy{{}}), PreconditionError);
  }
}
