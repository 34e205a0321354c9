// Seeded match batches, outcome summaries, significance tests and record
// persistence.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "verdict/agents.hpp"
#include "verdict/audit.hpp"
#include "verdict/core.hpp"

namespace verdict {

inline constexpr int kRecordVersion = 1;

struct MatchRecord {
  int record_version = kRecordVersion;
  std::string config_digest;
  std::string arm;
  std::size_t match_index = 0;
  std::uint64_t seed = 0;
  std::string agent_x;
  std::string agent_y;
  std::string type_x;
  std::string type_y;
  std::vector<Token> seed_text;  // s_0
  std::vector<Stage> stages;
  std::vector<Verdict> verdicts;
  std::optional<Verdict> terminal;
  std::array<double, 2> payoffs{0.0, 0.0};
  Verdict desired = Verdict::One;  // X's winning verdict for this match's types
  bool failed = false;
  std::string failure_reason;
  std::string classifier;  // classifier config JSON; empty when not replayable
  bool deterministic = true;
  double wall_time_ms = 0.0;
  std::vector<AuditEvent> audit;

  friend bool operator==(const MatchRecord&, const MatchRecord&) = default;
};

// JSON line without trailing newline. `with_timing` = false drops wall time,
// which is the only field allowed to differ between replays.
std::string to_json_line(const MatchRecord& r, bool with_timing = true);
MatchRecord record_from_json_line(std::string_view line);  // throws ConfigError

// Plays one game. Y's (and X's) type is drawn from the prior with a stream
// derived from `seed`; each agent gets its own stream as well.
MatchRecord run_match(const GameSpec& spec, Agent& x, Agent& y, std::uint64_t seed,
                      std::uint64_t x_seed_salt = 0, std::uint64_t y_seed_salt = 0);

struct Arm {
  std::string name;
  AgentConfig agent_x;
};

struct ExperimentConfig {
  GameSpec spec;
  AgentConfig agent_x;
  AgentConfig agent_y;
  std::vector<Arm> arms;  // empty: a single arm named "main" using agent_x
  std::size_t n_matches = 1;
  std::uint64_t base_seed = 0;
  std::size_t parallelism = 1;
  std::string digest;  // of the config text

  void validate() const;  // throws ConfigError
  std::vector<Arm> effective_arms() const;
};

struct ArmSummary {
  std::string name;
  std::size_t wins = 0;
  std::size_t losses = 0;
  std::size_t non_conclusive = 0;
  std::size_t excluded = 0;
  std::size_t n = 0;  // completed matches
  double win_rate() const { return n ? static_cast<double>(wins) / n : 0.0; }

  friend bool operator==(const ArmSummary&, const ArmSummary&) = default;
};

struct ExperimentResult {
  std::vector<ArmSummary> summaries;
  std::vector<MatchRecord> records;  // arm order, then match index
};

// Match i of every arm uses seed base_seed + i.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const AgentResources& res);

// Arms in order of first appearance.
std::vector<ArmSummary> summarize(const std::vector<MatchRecord>& records);

enum class SignificanceTest { FisherExact, TwoProportionZ };

double compare_arms(const ArmSummary& a, const ArmSummary& b, SignificanceTest test);

// Table of arms plus pairwise p-values against the first arm.
std::string format_summary(const std::vector<ArmSummary>& summaries);

// Append-only JSON lines.
void persist(const std::vector<MatchRecord>& records, const std::filesystem::path& path);
std::vector<MatchRecord> load(const std::filesystem::path& path);

// Re-runs the recorded moves through the game rules with the recorded
// classifier. Returns mismatch descriptions (empty: consistent). Records whose
// classifier is not replayable yield nothing.
std::vector<std::string> replay_check(const MatchRecord& r);

}  // namespace verdict
