// JSON config schema (spec_version 1).
//
//   {
//     "spec_version": 1,
//     "name": "tiny-court",
//     "builtin": "court",                  // optional base: court | interrogation | turing
//     "alphabet": ["q1", "q2", "a1"],       // omitted or empty: open vocabulary
//     "max_utterance_length": 2,            // l
//     "max_stages": 2,                      // d
//     "seed": "",                           // s_0 text
//     "types": {"X": ["Prosecution"], "Y": ["Defence"]},
//     "prior": {"Y": {"Defence": 1.0}},
//     "utilities": [{"player": "X", "t_X": "Prosecution", "t_Y": "Defence",
//                    "verdict": "one", "value": 1}, ...],
//     "menus": {"X": [{"moves": ["q1", "q2"]}],
//               "Y": [{"context": "q2", "type": "Guilty", "moves": ["a1"]}, ...]},
//     "classifier_id": "judge",
//     "classifiers": {"judge": {"kind": "automaton", ...}},
//     "llm": {...}, "experiment": {...}, "solve": {...}
//   }
//
// Classifier kinds: constant {"verdict"}, automaton {"states", "start",
// "transitions": [{"from", "token", "speaker", "to"}], "outputs"},
// keyword {"guilty": [trigger], "innocent": [trigger], "precedence"} with
// trigger {"x": [...], "y": [...], "scope": "stage" | "conversation"},
// llm {"model", "case_context_file", "instruction_file", "strict_instruction_file"}.

#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "verdict/agents.hpp"
#include "verdict/harness.hpp"
#include "verdict/llm.hpp"
#include "verdict/solvers.hpp"

namespace verdict {

inline constexpr int kSpecVersion = 1;

enum class BackendKind { Mock, Live };

struct LlmSettings {
  BackendKind backend = BackendKind::Mock;
  std::filesystem::path fixture;  // mock replies
  HttpBackendConfig http;
};

// A loaded config file: the game plus whatever sections it carries.
struct LoadedConfig {
  nlohmann::json raw;
  std::filesystem::path base_dir;
  std::string digest;
  GameSpec spec;
  std::optional<LlmSettings> llm;
  std::shared_ptr<ChatBackend> backend;  // built when an llm section is present
};

struct LoadOptions {
  std::optional<BackendKind> backend_override;
};

LoadedConfig load_config(const std::filesystem::path& path, const LoadOptions& opts = {});
LoadedConfig load_config_json(const nlohmann::json& j, const std::filesystem::path& base_dir,
                              const LoadOptions& opts = {});

GameSpec game_spec_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir,
                             std::shared_ptr<ChatBackend> backend = nullptr);
nlohmann::json game_spec_to_json(const GameSpec& spec);

ClassifierPtr classifier_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir,
                                   std::shared_ptr<ChatBackend> backend = nullptr);

AgentConfig agent_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

// Requires an "experiment" section.
ExperimentConfig experiment_from_config(const LoadedConfig& cfg);

struct SolveSettings {
  Engine engine = Engine::Exact;
  SolveOptions options;
  std::size_t iterations = 10'000;
  double exploration = kDefaultExploration;
  std::uint64_t seed = 0;
};
SolveSettings solve_settings_from_config(const LoadedConfig& cfg);

// Report written by `verdict solve`.
nlohmann::json solve_report(const GameSpec& spec, const SolveResult& r);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace verdict
