// Playable policies.

#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "verdict/llm.hpp"
#include "verdict/move_context.hpp"
#include "verdict/solvers.hpp"

namespace verdict {

class ScriptExhausted : public Error {
 public:
  using Error::Error;
};

// Raised by the human agent on `quit` or end of input.
class HumanAbort : public Error {
 public:
  HumanAbort() : Error("aborted by user") {}
};

enum class AgentKind { Naive, Strategic, Solver, Scripted, Human };
enum class Engine { Exact, Mcts, Ismcts };
// Policies used inside strategic introspection.
enum class ModelKind { Naive, Spe };

std::string_view to_string(AgentKind k);
AgentKind agent_kind_from_string(std::string_view s);
std::string_view to_string(Engine e);
Engine engine_from_string(std::string_view s);

struct AgentConfig {
  std::string name;
  AgentKind kind = AgentKind::Naive;
  std::size_t breadth = 10;
  std::size_t depth = 1;
  std::size_t rollouts_per_candidate = 1;
  std::uint64_t seed = 0;
  std::optional<Verdict> desired_verdict;  // nullopt: derived from utilities
  ModelKind opponent_model = ModelKind::Naive;
  ModelKind continuation_model = ModelKind::Naive;
  Engine engine = Engine::Mcts;
  std::size_t iterations = 1000;
  double exploration = kDefaultExploration;
  std::vector<Utterance> script;
  std::optional<LlmPlayerConfig> llm;  // free-text generation
  // Free-text opponent model for introspection (the naive model when the
  // opponent has no menu).
  std::optional<LlmPlayerConfig> opponent_llm;

  void validate() const;  // throws ConfigError
  std::string id() const;
};

// Conclusive verdict maximizing the player's payoff for the given types
// (ties go to One).
Verdict desired_verdict(const GameSpec& spec, Player p, std::size_t tx, std::size_t ty);

// Operations ----------------------------------------------------------------------------

// Uniform legal move drawn with ctx.rng.
Utterance naive_move(const MoveContext& ctx);

struct StrategicParams {
  std::size_t breadth = 10;
  std::size_t depth = 1;
  std::size_t rollouts_per_candidate = 1;
};

struct Introspection {
  std::vector<Utterance> candidates;
  std::vector<double> scores;  // mover's mean payoff per candidate
  std::size_t chosen = 0;
};

// Draws `breadth` candidates with `sampler` (the whole menu, in order, when the
// sampler is the menu-naive policy and breadth covers it), simulates each
// `depth` further stages with `opponent` and `continuation` (the mover's own
// later moves), and returns the candidate with the best mean payoff. A game
// still running when the lookahead ends scores the Cont payoff.
Introspection introspect(const MoveContext& ctx, const StrategicParams& p,
                         const MovePolicy& sampler, bool enumerate_menu,
                         const MovePolicy& opponent, const MovePolicy& continuation);

Utterance strategic_move(const MoveContext& ctx, const StrategicParams& p,
                         const MovePolicy& opponent = naive_move,
                         const MovePolicy& continuation = naive_move);

// Policy read from a solved game; throws PreconditionError off the solved tree.
MovePolicy spe_policy(std::shared_ptr<const SolveResult> solved);

// Exact SPE (complete information) or pure PBE (private Y type).
std::shared_ptr<const SolveResult> solve_exact(const GameSpec& spec, const SolveOptions& opts = {});

Utterance solver_move(const MoveContext& ctx, Engine engine, std::size_t budget,
                      double exploration = kDefaultExploration,
                      std::shared_ptr<const SolveResult> solved = nullptr);

// The move at index = number of completed stages.
Utterance scripted_move(const MoveContext& ctx, const std::vector<Utterance>& script);

// Agents ----------------------------------------------------------------------------------

class Agent {
 public:
  virtual ~Agent() = default;
  virtual Utterance move(const MoveContext& ctx) = 0;
  virtual std::string id() const = 0;
};

struct AgentResources {
  std::shared_ptr<ChatBackend> backend;          // free-text agents
  std::shared_ptr<const SolveResult> solved;     // exact solver / SPE models
  std::istream* in = nullptr;                    // human agent
  std::ostream* out = nullptr;
};

std::unique_ptr<Agent> make_agent(const AgentConfig& cfg, const AgentResources& res);

// Human player on a terminal: lists the menu, accepts an index (1-based) or
// the move text; free text when the player has no menu. `quit` or EOF aborts.
class HumanAgent final : public Agent {
 public:
  HumanAgent(std::istream& in, std::ostream& out) : in_(in), out_(out) {}
  Utterance move(const MoveContext& ctx) override;
  std::string id() const override { return "human"; }

 private:
  std::istream& in_;
  std::ostream& out_;
};

}  // namespace verdict
