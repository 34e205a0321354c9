#include "verdict/agents.hpp"

#include <charconv>
#include <istream>
#include <limits>
#include <ostream>

#include "verdict/classifier.hpp"

namespace verdict {

std::string_view to_string(AgentKind k) {
  switch (k) {
    case AgentKind::Naive: return "naive";
    case AgentKind::Strategic: return "strategic";
    case AgentKind::Solver: return "solver";
    case AgentKind::Scripted: return "scripted";
    case AgentKind::Human: return "human";
  }
  return "?";
}

AgentKind agent_kind_from_string(std::string_view s) {
  for (auto k : {AgentKind::Naive, AgentKind::Strategic, AgentKind::Solver, AgentKind::Scripted,
                 AgentKind::Human})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown agent kind '" + std::string(s) + "'");
}

std::string_view to_string(Engine e) {
  switch (e) {
    case Engine::Exact: return "exact";
    case Engine::Mcts: return "mcts";
    case Engine::Ismcts: return "ismcts";
  }
  return "?";
}

Engine engine_from_string(std::string_view s) {
  for (auto e : {Engine::Exact, Engine::Mcts, Engine::Ismcts})
    if (to_string(e) == s) return e;
  throw ConfigError("unknown engine '" + std::string(s) + "'");
}

void AgentConfig::validate() const {
  if (kind == AgentKind::Strategic && breadth < 1)
    throw ConfigError("strategic agent needs breadth >= 1");
  if (kind == AgentKind::Strategic && rollouts_per_candidate < 1)
    throw ConfigError("strategic agent needs rollouts_per_candidate >= 1");
  if (kind == AgentKind::Scripted && script.empty())
    throw ConfigError("scripted agent needs a move list");
  if (kind == AgentKind::Solver && engine != Engine::Exact && iterations < 1)
    throw ConfigError("solver agent needs iterations >= 1");
}

std::string AgentConfig::id() const {
  if (!name.empty()) return name;
  std::string s(to_string(kind));
  if (kind == AgentKind::Strategic)
    s += "(b=" + std::to_string(breadth) + ",d=" + std::to_string(depth) + ")";
  if (kind == AgentKind::Solver) s += "(" + std::string(to_string(engine)) + ")";
  if (llm) s += "+llm";
  return s;
}

Verdict desired_verdict(const GameSpec& spec, Player p, std::size_t tx, std::size_t ty) {
  const double zero = payoff(spec, p, tx, ty, Verdict::Zero);
  const double one = payoff(spec, p, tx, ty, Verdict::One);
  return zero > one ? Verdict::Zero : Verdict::One;
}

// Operations --------------------------------------------------------------------------------

Utterance naive_move(const MoveContext& ctx) {
  const auto menu = ctx.menu();
  if (menu.empty()) throw PreconditionError("naive_move: no legal moves");
  return menu[ctx.rng.below(menu.size())];
}

namespace {

// Y type used when scoring a simulation: X draws from its belief, Y knows it.
std::size_t simulated_y_type(const MoveContext& ctx, Rng& rng) {
  if (ctx.mover == Player::Y) return ctx.mover_type;
  if (ctx.spec.types.y.size() == 1) return 0;
  const auto& p = ctx.belief ? ctx.belief->p : ctx.spec.prior_y;
  return rng.categorical(p);
}

double simulate(const MoveContext& ctx, const Utterance& candidate, std::size_t depth,
                const MovePolicy& opponent, const MovePolicy& continuation, Rng& rng) {
  const GameSpec& spec = ctx.spec;
  const std::size_t ty = simulated_y_type(ctx, rng);
  const std::size_t tx = ctx.mover == Player::X ? ctx.mover_type : 0;
  auto policy_for = [&](Player p) -> const MovePolicy& {
    return p == ctx.mover ? continuation : opponent;
  };
  auto ask = [&](const ConversationState& s, Player p, const std::optional<Utterance>& pending) {
    MoveContext sub{spec, s, p, pending, p == Player::X ? tx : ty, ctx.belief, rng, ctx.audit};
    return policy_for(p)(sub);
  };

  // Finish the current stage.
  ConversationState s;
  if (ctx.mover == Player::X) {
    Utterance y = ask(ctx.state, Player::Y, candidate);
    s = advance(spec, ctx.state, candidate, y, ctx.audit);
  } else {
    s = advance(spec, ctx.state, *ctx.pending_x, candidate, ctx.audit);
  }
  for (std::size_t k = 0; k < depth && !is_terminal(spec, s); ++k) {
    Utterance x = ask(s, Player::X, std::nullopt);
    Utterance y = ask(s, Player::Y, x);
    s = advance(spec, s, x, y, ctx.audit);
  }
  const Verdict v = is_terminal(spec, s) ? terminal_verdict(spec, s) : Verdict::Cont;
  return payoff(spec, ctx.mover, tx, ty, v);
}

}  // namespace

Introspection introspect(const MoveContext& ctx, const StrategicParams& p,
                         const MovePolicy& sampler, bool enumerate_menu,
                         const MovePolicy& opponent, const MovePolicy& continuation) {
  if (p.breadth < 1) throw PreconditionError("strategic_move: breadth must be >= 1");
  Introspection out;
  std::vector<Utterance> menu;
  if (enumerate_menu) menu = ctx.menu();
  if (enumerate_menu && p.breadth >= menu.size()) {
    out.candidates = menu;
  } else {
    for (std::size_t i = 0; i < p.breadth; ++i) {
      Utterance c = sampler(ctx);
      if (std::find(out.candidates.begin(), out.candidates.end(), c) == out.candidates.end())
        out.candidates.push_back(std::move(c));
    }
  }
  if (out.candidates.empty()) throw PreconditionError("strategic_move: no candidates");
  if (out.candidates.size() == 1) {
    out.scores = {0.0};
    return out;
  }
  const std::uint64_t base = ctx.rng.next();
  const std::size_t rollouts = std::max<std::size_t>(1, p.rollouts_per_candidate);
  for (std::size_t c = 0; c < out.candidates.size(); ++c) {
    double total = 0.0;
    for (std::size_t r = 0; r < rollouts; ++r) {
      Rng sim_rng(mix_seed(base, c * rollouts + r));
      total += simulate(ctx, out.candidates[c], p.depth, opponent, continuation, sim_rng);
    }
    out.scores.push_back(total / static_cast<double>(rollouts));
    if (out.scores[c] > out.scores[out.chosen]) out.chosen = c;
  }
  return out;
}

Utterance strategic_move(const MoveContext& ctx, const StrategicParams& p,
                         const MovePolicy& opponent, const MovePolicy& continuation) {
  Introspection i = introspect(ctx, p, naive_move, true, opponent, continuation);
  return i.candidates[i.chosen];
}

std::shared_ptr<const SolveResult> solve_exact(const GameSpec& spec, const SolveOptions& opts) {
  if (spec.complete_information())
    return std::make_shared<const SolveResult>(solve_backward_induction(spec, opts));
  auto r = std::make_shared<const SolveResult>(solve_bruteforce(spec, opts));
  if (r->status == SolveStatus::NoPureEquilibrium)
    throw PreconditionError("no pure PBE: exact solver has no policy for this game");
  return r;
}

MovePolicy spe_policy(std::shared_ptr<const SolveResult> solved) {
  if (!solved) throw PreconditionError("spe_policy: no solved game");
  return [solved](const MoveContext& ctx) -> Utterance {
    const bool private_type = ctx.mover == Player::Y && ctx.spec.types.y.size() > 1;
    const std::string label = private_type ? ctx.spec.types.y[ctx.mover_type] : std::string();
    const auto key = decision_key(ctx.state, ctx.pending_x, ctx.mover, label);
    if (const Utterance* u = solved->lookup(key)) return *u;
    throw PreconditionError("no solved move at decision point '" + key + "'");
  };
}

Utterance solver_move(const MoveContext& ctx, Engine engine, std::size_t budget,
                      double exploration, std::shared_ptr<const SolveResult> solved) {
  const std::uint64_t seed = ctx.rng.next();
  switch (engine) {
    case Engine::Exact: {
      if (!solved) solved = solve_exact(ctx.spec, SolveOptions{.node_budget = budget});
      return spe_policy(solved)(ctx);
    }
    case Engine::Mcts: {
      if (ctx.spec.complete_information())
        return mcts(ctx.spec, ctx.state, budget, exploration, seed, ctx.pending_x).chosen;
      if (ctx.mover == Player::Y) {
        // Y knows both types (X has one), so his problem has complete information.
        GameSpec own = induce_complete_info(ctx.spec, 0, ctx.mover_type);
        return mcts(own, ctx.state, budget, exploration, seed, ctx.pending_x).chosen;
      }
      throw PreconditionError("mcts needs complete information; use ismcts for X");
    }
    case Engine::Ismcts: {
      if (ctx.mover == Player::Y) {
        GameSpec own = induce_complete_info(ctx.spec, 0, ctx.mover_type);
        return mcts(own, ctx.state, budget, exploration, seed, ctx.pending_x).chosen;
      }
      const Belief b = ctx.belief ? *ctx.belief : Belief::prior(ctx.spec);
      return ismcts(ctx.spec, ctx.state, b, budget, exploration, seed).chosen;
    }
  }
  throw PreconditionError("unknown engine");
}

Utterance scripted_move(const MoveContext& ctx, const std::vector<Utterance>& script) {
  const std::size_t turn = ctx.state.stage_count();
  if (turn >= script.size())
    throw ScriptExhausted("script exhausted at turn " + std::to_string(turn + 1) + " of " +
                          std::to_string(script.size()));
  return script[turn];
}

// Agents ------------------------------------------------------------------------------------

namespace {

class PolicyAgent final : public Agent {
 public:
  PolicyAgent(std::string id, MovePolicy policy) : id_(std::move(id)), policy_(std::move(policy)) {}
  Utterance move(const MoveContext& ctx) override { return policy_(ctx); }
  std::string id() const override { return id_; }

 private:
  std::string id_;
  MovePolicy policy_;
};

MovePolicy free_text_policy(std::shared_ptr<ChatBackend> backend, LlmPlayerConfig cfg) {
  if (!backend) throw ConfigError("free-text agent needs an llm backend");
  return [backend, cfg](const MoveContext& ctx) {
    return llm_player_move(*backend, cfg, ctx).utterance;
  };
}

MovePolicy model_policy(ModelKind kind, const AgentResources& res) {
  if (kind == ModelKind::Spe) return spe_policy(res.solved);
  return naive_move;
}

}  // namespace

std::unique_ptr<Agent> make_agent(const AgentConfig& cfg, const AgentResources& res) {
  cfg.validate();
  const std::string id = cfg.id();
  switch (cfg.kind) {
    case AgentKind::Naive:
      if (cfg.llm) return std::make_unique<PolicyAgent>(id, free_text_policy(res.backend, *cfg.llm));
      return std::make_unique<PolicyAgent>(id, naive_move);
    case AgentKind::Strategic: {
      StrategicParams p{cfg.breadth, cfg.depth, cfg.rollouts_per_candidate};
      MovePolicy opponent = model_policy(cfg.opponent_model, res);
      if (cfg.opponent_model == ModelKind::Naive && cfg.opponent_llm)
        opponent = free_text_policy(res.backend, *cfg.opponent_llm);
      MovePolicy continuation = model_policy(cfg.continuation_model, res);
      if (cfg.llm) {
        // Free text: candidates and own later lines come from the generator;
        // the opponent is simulated by the same backend unless an SPE model is set.
        MovePolicy gen = free_text_policy(res.backend, *cfg.llm);
        if (cfg.continuation_model == ModelKind::Naive) continuation = gen;
        return std::make_unique<PolicyAgent>(
            id, [p, gen, opponent, continuation](const MoveContext& ctx) {
              Introspection i = introspect(ctx, p, gen, false, opponent, continuation);
              return i.candidates[i.chosen];
            });
      }
      return std::make_unique<PolicyAgent>(id, [p, opponent, continuation](const MoveContext& ctx) {
        return strategic_move(ctx, p, opponent, continuation);
      });
    }
    case AgentKind::Solver: {
      const Engine engine = cfg.engine;
      const std::size_t budget = cfg.iterations;
      const double c = cfg.exploration;
      auto solved = res.solved;
      return std::make_unique<PolicyAgent>(id, [=](const MoveContext& ctx) {
        return solver_move(ctx, engine, budget, c, solved);
      });
    }
    case AgentKind::Scripted: {
      auto script = cfg.script;
      return std::make_unique<PolicyAgent>(
          id, [script](const MoveContext& ctx) { return scripted_move(ctx, script); });
    }
    case AgentKind::Human:
      if (!res.in || !res.out) throw ConfigError("human agent needs a terminal");
      return std::make_unique<HumanAgent>(*res.in, *res.out);
  }
  throw ConfigError("unknown agent kind");
}

Utterance HumanAgent::move(const MoveContext& ctx) {
  const bool free_text = ctx.free_text();
  std::vector<Utterance> menu;
  if (!free_text) menu = ctx.menu();
  while (true) {
    if (free_text) {
      out_ << "Your move (" << to_string(ctx.mover) << ", free text, 'quit' to stop): ";
    } else {
      out_ << "Your move (" << to_string(ctx.mover) << "):\n";
      for (std::size_t i = 0; i < menu.size(); ++i)
        out_ << "  " << (i + 1) << ") " << menu[i].text() << "\n";
      out_ << "> ";
    }
    out_.flush();
    std::string line;
    if (!std::getline(in_, line)) throw HumanAbort();
    const Utterance typed = Utterance::parse(line);
    if (typed.text() == "quit") throw HumanAbort();
    if (typed.tokens.empty()) continue;
    if (free_text) {
      try {
        check_utterance(ctx.spec, typed);
        return typed;
      } catch (const IllegalMoveError& e) {
        out_ << "Illegal move: " << e.what() << "\n";
        continue;
      }
    }
    std::size_t choice = 0;
    const std::string t = typed.text();
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), choice);
    if (ec == std::errc() && ptr == t.data() + t.size()) {
      if (choice >= 1 && choice <= menu.size()) return menu[choice - 1];
      out_ << "Choose a number between 1 and " << menu.size() << ".\n";
      continue;
    }
    if (auto it = std::find(menu.begin(), menu.end(), typed); it != menu.end()) return *it;
    out_ << "Not on the menu.\n";
  }
}

}  // namespace verdict
