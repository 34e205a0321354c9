// verdict: solve, simulate, play, analyze and replicate-court.
//
// Exit codes: 0 success, 1 usage or config error, 2 runtime failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "verdict/agents.hpp"
#include "verdict/classifier.hpp"
#include "verdict/config.hpp"
#include "verdict/harness.hpp"
#include "verdict/solvers.hpp"

#ifndef VERDICT_FIXTURE_DIR
#define VERDICT_FIXTURE_DIR "fixtures"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace verdict;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kRuntime = 2;

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> engine;
  std::optional<std::size_t> iterations;
  std::optional<std::string> backend;
  std::string records;
  int verbose = 0;
};

LoadOptions load_options(const Options& o) {
  LoadOptions lo;
  if (o.backend) lo.backend_override = *o.backend == "live" ? BackendKind::Live : BackendKind::Mock;
  return lo;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError("cannot write '" + path.string() + "'");
  f << text;
}

int cmd_solve(const Options& o) {
  const LoadedConfig cfg = load_config(o.config, load_options(o));
  SolveSettings s = solve_settings_from_config(cfg);
  if (o.engine) s.engine = engine_from_string(*o.engine);
  if (o.iterations) s.iterations = *o.iterations;
  if (o.seed) s.seed = *o.seed;
  const GameSpec& spec = cfg.spec;

  json report;
  int status = kOk;
  if (s.engine == Engine::Exact) {
    const SolveResult r = spec.complete_information() ? solve_backward_induction(spec, s.options)
                                                      : solve_bruteforce(spec, s.options);
    report = solve_report(spec, r);
    if (r.status == SolveStatus::NoPureEquilibrium) {
      std::cerr << "no pure PBE\n";
      status = kRuntime;
    } else {
      for (auto p : {Player::X, Player::Y}) {
        std::cout << "root value " << to_string(p) << ":";
        for (std::size_t t = 0; t < r.root_value[index(p)].size(); ++t)
          std::cout << " " << spec.types.y[t] << "=" << r.root_value[index(p)][t];
        std::cout << "\n";
      }
      if (const Utterance* u = r.lookup(decision_key(spec.initial_state(), std::nullopt, Player::X)))
        std::cout << "root action: " << u->text() << "\n";
      std::cout << "nodes: " << r.node_count << "\n";
    }
  } else {
    const ConversationState root = spec.initial_state();
    SearchResult r;
    if (s.engine == Engine::Mcts) {
      if (!spec.complete_information())
        throw ConfigError("engine mcts needs a complete-information game; use ismcts");
      r = mcts(spec, root, s.iterations, s.exploration, s.seed);
    } else {
      r = ismcts(spec, root, Belief::prior(spec), s.iterations, s.exploration, s.seed);
    }
    report["game"] = spec.name;
    report["engine"] = std::string(to_string(s.engine));
    report["iterations"] = r.root.iterations;
    report["chosen"] = r.chosen.text();
    json stats = json::array();
    for (std::size_t i = 0; i < r.root.actions.size(); ++i)
      stats.push_back({{"move", r.root.actions[i].text()},
                       {"visits", r.root.visits[i]},
                       {"mean_value", r.root.mean_value[i]}});
    report["root"] = stats;
    std::cout << "root action: " << r.chosen.text() << "\n";
    for (std::size_t i = 0; i < r.root.actions.size(); ++i)
      std::cout << "  " << r.root.actions[i].text() << "  visits=" << r.root.visits[i]
                << "  mean=" << r.root.mean_value[i] << "\n";
  }
  if (!o.out.empty()) write_text(o.out, report.dump(2) + "\n");
  return status;
}

int run_simulation(const Options& o, const fs::path& config_path) {
  const LoadedConfig cfg = load_config(config_path, load_options(o));
  ExperimentConfig x = experiment_from_config(cfg);
  if (o.seed) x.base_seed = *o.seed;
  AgentResources res;
  res.backend = cfg.backend;
  const ExperimentResult r = run_experiment(x, res);
  if (o.verbose)
    for (const auto& m : r.records)
      std::cerr << m.arm << " #" << m.match_index << " seed=" << m.seed << " stages=" << m.stages.size()
                << " terminal=" << (m.terminal ? std::string(to_string(*m.terminal)) : "-")
                << (m.failed ? " FAILED: " + m.failure_reason : "") << "\n";
  const std::string summary = format_summary(r.summaries);
  std::cout << summary;
  if (!o.out.empty()) {
    fs::remove(o.out);
    persist(r.records, o.out);
    write_text(o.out + ".summary.txt", summary);
  }
  return kOk;
}

int cmd_analyze(const Options& o) {
  const std::string path = !o.records.empty() ? o.records : o.config;
  if (path.empty()) throw ConfigError("analyze needs a records file");
  const auto records = load(path);
  std::cout << format_summary(summarize(records));
  std::size_t mismatches = 0;
  for (const auto& r : records)
    for (const auto& issue : replay_check(r)) {
      ++mismatches;
      std::cerr << "warning: replay mismatch in " << r.arm << " #" << r.match_index << ": " << issue
                << "\n";
    }
  if (o.verbose) std::cerr << records.size() << " records, " << mismatches << " replay mismatches\n";
  return kOk;
}

// Shows the transcript before each human move.
class TranscriptAgent final : public Agent {
 public:
  TranscriptAgent(std::unique_ptr<Agent> inner, std::ostream& out)
      : inner_(std::move(inner)), out_(out) {}
  Utterance move(const MoveContext& ctx) override {
    out_ << "\n-- stage " << ctx.state.stage_count() + 1 << " of " << ctx.spec.max_stages
         << " --\n";
    const std::string t = serialize(ctx.state, SerializeStyle::SpeakerLabels);
    if (!t.empty()) out_ << t << "\n";
    if (auto v = ctx.state.last_verdict()) out_ << "judge: " << to_string(*v) << "\n";
    if (ctx.pending_x) out_ << "X: " << ctx.pending_x->text() << "\n";
    return inner_->move(ctx);
  }
  std::string id() const override { return inner_->id(); }

 private:
  std::unique_ptr<Agent> inner_;
  std::ostream& out_;
};

int cmd_play(const Options& o) {
  const LoadedConfig cfg = load_config(o.config, load_options(o));
  const ExperimentConfig x = experiment_from_config(cfg);
  const AgentConfig ax = x.effective_arms().front().agent_x;
  if (ax.kind != AgentKind::Human && x.agent_y.kind != AgentKind::Human)
    throw ConfigError("play needs one agent of kind \"human\"");
  AgentResources res;
  res.backend = cfg.backend;
  res.in = &std::cin;
  res.out = &std::cout;
  if (ax.kind == AgentKind::Solver || x.agent_y.kind == AgentKind::Solver)
    if (ax.engine == Engine::Exact || x.agent_y.engine == Engine::Exact)
      res.solved = solve_exact(cfg.spec);
  auto wrap = [&](const AgentConfig& c) -> std::unique_ptr<Agent> {
    auto a = make_agent(c, res);
    if (c.kind == AgentKind::Human) return std::make_unique<TranscriptAgent>(std::move(a), std::cout);
    return a;
  };
  auto agent_x = wrap(ax);
  auto agent_y = wrap(x.agent_y);
  const std::uint64_t seed = o.seed.value_or(x.base_seed);
  MatchRecord r;
  try {
    r = run_match(cfg.spec, *agent_x, *agent_y, seed, ax.seed, x.agent_y.seed);
  } catch (const HumanAbort&) {
    std::cout << "\naborted\n";
    return kOk;
  }
  ConversationState s;
  s.seed = r.seed_text;
  s.stages = r.stages;
  std::cout << "\n-- final transcript --\n" << serialize(s, SerializeStyle::SpeakerLabels) << "\n";
  if (r.failed) {
    std::cerr << "match failed: " << r.failure_reason << "\n";
    return kRuntime;
  }
  std::cout << "verdict: " << to_string(*r.terminal) << "\n"
            << "payoff X: " << r.payoffs[0] << "\npayoff Y: " << r.payoffs[1] << "\n";
  if (!o.out.empty()) {
    r.config_digest = cfg.digest;
    r.arm = "play";
    fs::remove(o.out);
    persist({r}, o.out);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Verdict games: solve, simulate, play and analyze."};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config,-c", o.config, "config file (JSON)");
    if (needs_config) c->required();
    sub->add_option("--out,-o", o.out, "output path");
    sub->add_option("--seed", o.seed, "seed override");
    sub->add_option("--backend", o.backend, "llm backend")->check(CLI::IsMember({"mock", "live"}));
    sub->add_flag("-v,--verbose", o.verbose, "verbose output");
  };
  auto* solve = app.add_subcommand("solve", "solve the game in a config");
  common(solve, true);
  solve->add_option("--engine", o.engine, "exact | mcts | ismcts")
      ->check(CLI::IsMember({"exact", "mcts", "ismcts"}));
  solve->add_option("--iterations", o.iterations, "search iterations");
  auto* simulate = app.add_subcommand("simulate", "run the experiment section of a config");
  common(simulate, true);
  auto* play = app.add_subcommand("play", "play a match against the configured opponent");
  common(play, true);
  auto* analyze = app.add_subcommand("analyze", "summarize and replay-check persisted records");
  common(analyze, false);
  analyze->add_option("records", o.records, "records file (JSON lines)");
  auto* court = app.add_subcommand("replicate-court", "court prosecutor experiment (mock by default)");
  common(court, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }
  try {
    if (*solve) return cmd_solve(o);
    if (*simulate) return run_simulation(o, o.config);
    if (*play) return cmd_play(o);
    if (*analyze) return cmd_analyze(o);
    if (*court) {
      const fs::path path = o.config.empty()
                                ? fs::path(VERDICT_FIXTURE_DIR) / "court" / "replicate_court.json"
                                : fs::path(o.config);
      return run_simulation(o, path);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const BudgetExceeded& e) {
    std::cerr << "error: budget exceeded: " << e.what() << "\n";
    return kRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}
