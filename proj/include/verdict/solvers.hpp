// Equilibrium and search solvers for verdict games.
//
//  - solve_backward_induction: exact SPE of complete-information games.
//  - solve_bruteforce: enumerates pure strategy profiles and returns the first
//    one passing the one-deviation check (SPE, or pure PBE with Bayes-consistent
//    beliefs when Y's type is private). Verification oracle for tiny games.
//  - mcts / ismcts: UCT search with per-player backups; ismcts determinizes
//    Y's private type from X's belief on every iteration.

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "verdict/core.hpp"

namespace verdict {

class BudgetExceeded : public Error {
 public:
  using Error::Error;
};

enum class SolveStatus { Ok, NoPureEquilibrium };

struct SolveResult {
  SolveStatus status = SolveStatus::Ok;
  // root_value[player][t_Y]: payoff of following `policy` from the root when Y
  // has type t_Y. One column for complete-information games.
  std::array<std::vector<double>, 2> root_value;
  // Decision key (see decision_key) -> chosen move.
  std::map<std::string, Utterance> policy;
  std::size_t node_count = 0;
  std::uint64_t profiles_checked = 0;

  // Prior-weighted root value.
  double expected_value(const GameSpec& spec, Player p) const;
  const Utterance* lookup(const std::string& key) const;
};

struct SolveOptions {
  std::size_t node_budget = 2'000'000;
  std::uint64_t profile_cap = 1'000'000;
};

// Identifies a decision point: the conversation so far, the pending X move (for
// Y), the mover and, where it is private, the mover's type label.
std::string decision_key(const ConversationState& state, const std::optional<Utterance>& pending_x,
                         Player mover, const std::string& type_label = {});

SolveResult solve_backward_induction(const GameSpec& spec, const SolveOptions& opts = {});

SolveResult solve_bruteforce(const GameSpec& spec, const SolveOptions& opts = {});

// Number of pure strategy profiles of the game (saturates at UINT64_MAX).
std::uint64_t count_pure_profiles(const GameSpec& spec, const SolveOptions& opts = {});

// Beliefs ----------------------------------------------------------------------------

// X's distribution over Y's types.
struct Belief {
  std::vector<double> p;

  static Belief prior(const GameSpec& spec) { return Belief{spec.prior_y}; }
  static Belief point_mass(std::size_t n, std::size_t at);
  void validate(std::size_t num_types) const;  // throws PreconditionError
};

// Assumed per-type probability of each Y utterance; missing entries are 0.
using TypePolicy = std::vector<std::map<Utterance, double>>;

// posterior(t) ∝ belief(t) · policy[t](observed). Off-path observations (total
// likelihood 0) return the game prior.
Belief update_belief(const Belief& belief, const GameSpec& spec, const Utterance& observed,
                     const TypePolicy& policy);

// Search --------------------------------------------------------------------------------

struct RootStats {
  std::vector<Utterance> actions;
  std::vector<std::size_t> visits;
  std::vector<double> mean_value;  // for the root mover
  std::size_t iterations = 0;
};

struct SearchResult {
  Utterance chosen;
  RootStats root;
};

inline constexpr double kDefaultExploration = 1.4142135623730951;

// UCT on a complete-information game. The root is X's decision at `root`, or
// Y's reply to `pending_x` when given.
SearchResult mcts(const GameSpec& spec, const ConversationState& root, std::size_t iterations,
                  double exploration_c, std::uint64_t seed,
                  const std::optional<Utterance>& pending_x = std::nullopt);

// Single-observer ISMCTS from X's perspective.
SearchResult ismcts(const GameSpec& spec, const ConversationState& root, const Belief& belief,
                    std::size_t iterations, double exploration_c, std::uint64_t seed);

}  // namespace verdict
