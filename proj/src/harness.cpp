#include "verdict/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "verdict/classifier.hpp"
#include "verdict/config.hpp"
#include "verdict/rng.hpp"
#include "verdict/stats.hpp"

namespace verdict {

using nlohmann::json;

// Records ---------------------------------------------------------------------------------

std::string to_json_line(const MatchRecord& r, bool with_timing) {
  json stages = json::array();
  for (const auto& s : r.stages) stages.push_back({{"x", s.x_move.tokens}, {"y", s.y_move.tokens}});
  json verdicts = json::array();
  for (auto v : r.verdicts) verdicts.push_back(std::string(to_string(v)));
  json audit = json::array();
  for (const auto& e : r.audit)
    audit.push_back({{"kind", e.kind}, {"detail", e.detail}, {"attempts", e.attempts}, {"ok", e.ok}});
  json j{{"record_version", r.record_version},
         {"config_digest", r.config_digest},
         {"arm", r.arm},
         {"match_index", r.match_index},
         {"seed", r.seed},
         {"agent_x", r.agent_x},
         {"agent_y", r.agent_y},
         {"type_x", r.type_x},
         {"type_y", r.type_y},
         {"seed_text", r.seed_text},
         {"stages", stages},
         {"verdicts", verdicts},
         {"terminal", r.terminal ? json(std::string(to_string(*r.terminal))) : json(nullptr)},
         {"payoffs", r.payoffs},
         {"desired", std::string(to_string(r.desired))},
         {"failed", r.failed},
         {"failure_reason", r.failure_reason},
         {"classifier", r.classifier},
         {"deterministic", r.deterministic},
         {"audit", audit}};
  if (with_timing) j["wall_time_ms"] = r.wall_time_ms;
  return j.dump();
}

MatchRecord record_from_json_line(std::string_view line) {
  try {
    const json j = json::parse(line);
    MatchRecord r;
    r.record_version = j.at("record_version").get<int>();
    if (r.record_version != kRecordVersion)
      throw ConfigError("unsupported record_version " + std::to_string(r.record_version));
    r.config_digest = j.at("config_digest").get<std::string>();
    r.arm = j.at("arm").get<std::string>();
    r.match_index = j.at("match_index").get<std::size_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.agent_x = j.at("agent_x").get<std::string>();
    r.agent_y = j.at("agent_y").get<std::string>();
    r.type_x = j.at("type_x").get<std::string>();
    r.type_y = j.at("type_y").get<std::string>();
    r.seed_text = j.at("seed_text").get<std::vector<Token>>();
    for (const auto& s : j.at("stages"))
      r.stages.push_back(Stage{Utterance(s.at("x").get<std::vector<Token>>()),
                               Utterance(s.at("y").get<std::vector<Token>>())});
    for (const auto& v : j.at("verdicts")) r.verdicts.push_back(verdict_from_string(v.get<std::string>()));
    if (!j.at("terminal").is_null())
      r.terminal = verdict_from_string(j.at("terminal").get<std::string>());
    r.payoffs = j.at("payoffs").get<std::array<double, 2>>();
    r.desired = verdict_from_string(j.at("desired").get<std::string>());
    r.failed = j.at("failed").get<bool>();
    r.failure_reason = j.at("failure_reason").get<std::string>();
    r.classifier = j.at("classifier").get<std::string>();
    r.deterministic = j.at("deterministic").get<bool>();
    r.wall_time_ms = j.value("wall_time_ms", 0.0);
    for (const auto& e : j.at("audit"))
      r.audit.push_back(AuditEvent{e.at("kind").get<std::string>(), e.at("detail").get<std::string>(),
                                   e.at("attempts").get<int>(), e.at("ok").get<bool>()});
    return r;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed record: ") + e.what());
  }
}

// Matches ---------------------------------------------------------------------------------

MatchRecord run_match(const GameSpec& spec, Agent& x, Agent& y, std::uint64_t seed,
                      std::uint64_t x_seed_salt, std::uint64_t y_seed_salt) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!spec.classifier) throw ConfigError("game '" + spec.name + "' has no classifier");

  Rng type_rng(mix_seed(seed, 3));
  const std::size_t tx = spec.types.x.size() > 1 ? type_rng.categorical(spec.prior_x) : 0;
  const std::size_t ty = spec.types.y.size() > 1 ? type_rng.categorical(spec.prior_y) : 0;
  Rng x_rng(mix_seed(seed ^ x_seed_salt, 1));
  Rng y_rng(mix_seed(seed ^ y_seed_salt, 2));

  MatchRecord r;
  r.seed = seed;
  r.agent_x = x.id();
  r.agent_y = y.id();
  r.type_x = spec.types.x[tx];
  r.type_y = spec.types.y[ty];
  r.seed_text = spec.seed;
  r.desired = desired_verdict(spec, Player::X, tx, ty);
  r.classifier = spec.classifier->config_json();
  r.deterministic = spec.classifier->deterministic();

  AuditTrail audit;
  const Belief belief = Belief::prior(spec);
  ConversationState state = spec.initial_state();
  try {
    while (!is_terminal(spec, state)) {
      MoveContext xc{spec, state, Player::X, std::nullopt, tx, &belief, x_rng, &audit};
      const Utterance xm = x.move(xc);
      MoveContext yc{spec, state, Player::Y, xm, ty, nullptr, y_rng, &audit};
      const Utterance ym = y.move(yc);
      state = advance(spec, state, xm, ym, &audit);
    }
    r.terminal = terminal_verdict(spec, state);
    for (auto p : {Player::X, Player::Y}) r.payoffs[index(p)] = payoff(spec, p, tx, ty, *r.terminal);
  } catch (const HumanAbort&) {
    throw;
  } catch (const Error& e) {
    r.failed = true;
    r.failure_reason = e.what();
    audit.add("failure", e.what(), 1, false);
  }
  r.stages = state.stages;
  r.verdicts = state.verdicts;
  r.audit = std::move(audit.events);
  r.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

// Experiments -----------------------------------------------------------------------------

void ExperimentConfig::validate() const {
  spec.validate();
  if (!spec.classifier) throw ConfigError("experiment game has no classifier");
  if (n_matches < 1) throw ConfigError("n_matches must be >= 1");
  if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
  agent_y.validate();
  const auto all = effective_arms();
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (all[i].name.empty()) throw ConfigError("arm names must be non-empty");
    all[i].agent_x.validate();
    for (std::size_t j = 0; j < i; ++j)
      if (all[i].name == all[j].name) throw ConfigError("duplicate arm name '" + all[i].name + "'");
  }
}

std::vector<Arm> ExperimentConfig::effective_arms() const {
  if (!arms.empty()) return arms;
  return {Arm{"main", agent_x}};
}

namespace {

bool needs_solution(const AgentConfig& c) {
  if (c.kind == AgentKind::Solver && c.engine == Engine::Exact) return true;
  if (c.kind == AgentKind::Strategic &&
      (c.opponent_model == ModelKind::Spe || c.continuation_model == ModelKind::Spe))
    return true;
  return false;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const AgentResources& base) {
  cfg.validate();
  const auto arms = cfg.effective_arms();
  AgentResources res = base;
  bool need = needs_solution(cfg.agent_y);
  for (const auto& a : arms) need = need || needs_solution(a.agent_x);
  if (need && !res.solved) res.solved = solve_exact(cfg.spec);

  const bool interactive = cfg.agent_y.kind == AgentKind::Human ||
                           std::any_of(arms.begin(), arms.end(), [](const Arm& a) {
                             return a.agent_x.kind == AgentKind::Human;
                           });
  const std::size_t total = arms.size() * cfg.n_matches;
  std::vector<MatchRecord> records(total);

  auto play = [&](std::size_t job) {
    const Arm& arm = arms[job / cfg.n_matches];
    const std::size_t i = job % cfg.n_matches;
    auto x = make_agent(arm.agent_x, res);
    auto y = make_agent(cfg.agent_y, res);
    MatchRecord r = run_match(cfg.spec, *x, *y, cfg.base_seed + i, arm.agent_x.seed, cfg.agent_y.seed);
    if (arm.agent_x.desired_verdict) r.desired = *arm.agent_x.desired_verdict;
    r.config_digest = cfg.digest;
    r.arm = arm.name;
    r.match_index = i;
    records[job] = std::move(r);
  };

  const std::size_t workers = interactive ? 1 : std::min(cfg.parallelism, total);
  if (workers <= 1) {
    for (std::size_t job = 0; job < total; ++job) play(job);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t job; (job = next.fetch_add(1)) < total;) {
          try {
            play(job);
          } catch (...) {
            std::lock_guard lock(mu);
            if (!first_error) first_error = std::current_exception();
            next = total;
          }
        }
      });
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  ExperimentResult out;
  out.summaries = summarize(records);
  out.records = std::move(records);
  return out;
}

std::vector<ArmSummary> summarize(const std::vector<MatchRecord>& records) {
  std::vector<ArmSummary> out;
  for (const auto& r : records) {
    auto it = std::find_if(out.begin(), out.end(), [&](const ArmSummary& s) { return s.name == r.arm; });
    if (it == out.end()) {
      out.push_back(ArmSummary{r.arm});
      it = out.end() - 1;
    }
    if (r.failed || !r.terminal) {
      ++it->excluded;
      continue;
    }
    ++it->n;
    if (*r.terminal == Verdict::Cont)
      ++it->non_conclusive;
    else if (*r.terminal == r.desired)
      ++it->wins;
    else
      ++it->losses;
  }
  return out;
}

double compare_arms(const ArmSummary& a, const ArmSummary& b, SignificanceTest test) {
  if (a.n == 0 || b.n == 0) throw PreconditionError("compare_arms: arm with no completed matches");
  if (test == SignificanceTest::FisherExact)
    return stats::fisher_exact_two_sided(a.wins, a.n, b.wins, b.n);
  return stats::two_proportion_z(a.wins, a.n, b.wins, b.n);
}

std::string format_summary(const std::vector<ArmSummary>& summaries) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-20s %5s %5s %6s %8s %8s %8s %12s %12s\n", "arm", "n", "wins",
                "losses", "non_conc", "excluded", "win_rate", "p_fisher", "p_z");
  os << buf;
  for (std::size_t i = 0; i < summaries.size(); ++i) {
    const auto& s = summaries[i];
    std::string pf = "-", pz = "-";
    if (i > 0 && s.n > 0 && summaries[0].n > 0) {
      std::snprintf(buf, sizeof buf, "%.6g",
                    compare_arms(summaries[0], s, SignificanceTest::FisherExact));
      pf = buf;
      std::snprintf(buf, sizeof buf, "%.6g",
                    compare_arms(summaries[0], s, SignificanceTest::TwoProportionZ));
      pz = buf;
    }
    std::snprintf(buf, sizeof buf, "%-20s %5zu %5zu %6zu %8zu %8zu %8.3f %12s %12s\n",
                  s.name.c_str(), s.n, s.wins, s.losses, s.non_conclusive, s.excluded,
                  s.win_rate(), pf.c_str(), pz.c_str());
    os << buf;
  }
  return os.str();
}

// Persistence ------------------------------------------------------------------------------

void persist(const std::vector<MatchRecord>& records, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::app | std::ios::binary);
  if (!f) throw ConfigError("cannot open '" + path.string() + "' for writing");
  for (const auto& r : records) f << to_json_line(r) << '\n';
  if (!f) throw ConfigError("write to '" + path.string() + "' failed");
}

std::vector<MatchRecord> load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open records file '" + path.string() + "'");
  std::vector<MatchRecord> out;
  std::string line;
  for (std::size_t n = 1; std::getline(f, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json_line(line));
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

std::vector<std::string> replay_check(const MatchRecord& r) {
  std::vector<std::string> issues;
  if (r.failed || r.classifier.empty() || !r.deterministic) return issues;
  ClassifierPtr c = classifier_from_json(json::parse(r.classifier), ".");
  if (r.verdicts.size() != r.stages.size()) {
    issues.push_back("record has " + std::to_string(r.stages.size()) + " stages but " +
                     std::to_string(r.verdicts.size()) + " verdicts");
    return issues;
  }
  ConversationState s;
  s.seed = r.seed_text;
  for (std::size_t i = 0; i < r.stages.size(); ++i) {
    s.stages.push_back(r.stages[i]);
    const Verdict v = c->classify(s);
    s.verdicts.push_back(v);
    if (v != r.verdicts[i])
      issues.push_back("stage " + std::to_string(i + 1) + ": recorded " +
                       std::string(to_string(r.verdicts[i])) + ", replay gives " +
                       std::string(to_string(v)));
    if (is_conclusive(v) && i + 1 < r.stages.size())
      issues.push_back("play continued after conclusive verdict at stage " + std::to_string(i + 1));
  }
  if (r.terminal && !r.verdicts.empty() && *r.terminal != r.verdicts.back())
    issues.push_back("terminal verdict does not match the last stage verdict");
  return issues;
}

}  // namespace verdict
