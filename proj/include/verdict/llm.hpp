// Chat-completions client, mock backend, LLM judge and LLM players.

#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include "verdict/audit.hpp"
#include "verdict/classifier.hpp"
#include "verdict/move_context.hpp"

namespace verdict {

class LlmError : public Error {
 public:
  using Error::Error;
};
class AuthError : public LlmError {
 public:
  using LlmError::LlmError;
};
class TimeoutError : public LlmError {
 public:
  using LlmError::LlmError;
};
class RateLimitError : public LlmError {
 public:
  using LlmError::LlmError;
};
class TransportError : public LlmError {
 public:
  using LlmError::LlmError;
};
class JudgeParseError : public LlmError {
 public:
  using LlmError::LlmError;
};

struct ChatMessage {
  std::string role;  // "system", "user", "assistant"
  std::string text;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct Sampling {
  double temperature = 1.0;
  int max_tokens = 256;
  std::optional<std::uint64_t> seed;
};

struct ChatRequest {
  std::string model_id;
  std::vector<ChatMessage> messages;
  Sampling sampling;
  std::chrono::milliseconds timeout{30'000};
};

struct ChatResponse {
  std::string text;
  int attempts = 1;
  std::uint64_t correlation_id = 0;
};

// Digest of (model, messages, seed) used by the mock fixture table.
std::string request_digest(const ChatRequest& req);

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ChatResponse complete(const ChatRequest& req) = 0;
  virtual bool deterministic() const = 0;
  virtual std::string name() const = 0;
};

// Replies come from a fixture file:
//   {"fixture_version": 1,
//    "exact": {"<digest>": "reply", ...},
//    "rules": [{"system_contains": [...], "last_contains_all": [...],
//               "last_contains_any": [...], "replies": [...]}, ...],
//    "default": "reply"}
// The first exact digest match wins, then the first matching rule; a rule with
// several replies picks one by the request digest, so a request seed selects
// the reply deterministically. String matching is case-insensitive.
class MockBackend final : public ChatBackend {
 public:
  struct Rule {
    std::vector<std::string> system_contains;
    std::vector<std::string> last_contains_all;
    std::vector<std::string> last_contains_any;
    std::vector<std::string> replies;
  };

  MockBackend(std::map<std::string, std::string> exact, std::vector<Rule> rules,
              std::optional<std::string> fallback);
  static std::shared_ptr<MockBackend> from_file(const std::filesystem::path& path);

  ChatResponse complete(const ChatRequest& req) override;
  bool deterministic() const override { return true; }
  std::string name() const override { return "mock"; }

 private:
  std::map<std::string, std::string> exact_;
  std::vector<Rule> rules_;
  std::optional<std::string> fallback_;
  std::atomic<std::uint64_t> next_id_{1};
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_delay{500};
  std::chrono::milliseconds max_delay{8'000};
};

// Token bucket: `rate` tokens per second, at most `burst` stored.
class RateLimiter {
 public:
  RateLimiter(double rate, double burst);
  void acquire();

 private:
  std::mutex mu_;
  double rate_;
  double burst_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
};

struct HttpBackendConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key_env = "VERDICT_LLM_API_KEY";
  std::optional<std::string> api_key;  // overrides the environment
  RetryPolicy retry;
  int max_in_flight = 4;
  double requests_per_second = 5.0;
};

// Chat-completions over HTTP(S) with bearer auth.
class HttpBackend final : public ChatBackend {
 public:
  explicit HttpBackend(HttpBackendConfig cfg);

  ChatResponse complete(const ChatRequest& req) override;
  bool deterministic() const override { return false; }
  std::string name() const override { return "live"; }

 private:
  HttpBackendConfig cfg_;
  std::string key_;
  std::string scheme_host_port_;
  std::string path_prefix_;
  std::counting_semaphore<1024> in_flight_;
  RateLimiter limiter_;
  std::atomic<std::uint64_t> next_id_{1};
};

// Validates the request, calls the backend and records the outcome.
std::string chat(ChatBackend& backend, const ChatRequest& req, AuditTrail* audit = nullptr);

// Judge -------------------------------------------------------------------------------

struct JudgePrompt {
  std::string case_context;
  std::string transcript;
  std::string instruction;
};

struct JudgeConfig {
  std::string model_id = "gpt-4o-2024-11-20";
  std::string case_context;
  std::string instruction;
  std::string strict_instruction;  // used for the single re-ask
  double temperature = 0.0;
};

struct LabelParse {
  std::optional<Verdict> verdict;
  bool ambiguous = false;  // more than one label present
};

// Guilty -> One, Innocent -> Zero, Non-conclusive -> Cont. Whole words,
// case-insensitive, checked in that precedence order.
LabelParse parse_judge_label(std::string_view reply);

ChatRequest judge_request(const JudgeConfig& cfg, const JudgePrompt& prompt, bool strict);

// One re-ask with the strict instruction, then JudgeParseError.
Verdict llm_judge(ChatBackend& backend, const JudgeConfig& cfg, const JudgePrompt& prompt,
                  AuditTrail* audit = nullptr);

// Service-backed judge usable wherever a Classifier is.
class LlmJudge final : public Classifier {
 public:
  LlmJudge(std::shared_ptr<ChatBackend> backend, JudgeConfig cfg);
  Verdict classify(const ConversationState& state, AuditTrail* audit = nullptr) const override;
  bool deterministic() const override { return backend_->deterministic(); }

 private:
  std::shared_ptr<ChatBackend> backend_;
  JudgeConfig cfg_;
};

// Players -----------------------------------------------------------------------------

struct LlmPlayerConfig {
  std::string model_id = "gpt-4o-2024-11-20";
  std::string persona_prompt;
  std::string case_context;
  double temperature = 1.0;
  int max_tokens = 200;
};

struct PlayerReply {
  Utterance utterance;
  bool truncated = false;
};

// Converts free text to tokens: whitespace split, '#'/'@' removed, capped at
// `max_tokens`. An empty reply becomes "...".
PlayerReply to_utterance(std::string_view text, std::size_t max_tokens);

ChatRequest player_request(const LlmPlayerConfig& cfg, const MoveContext& ctx,
                           std::uint64_t seed);

// The request seed is drawn from ctx.rng.
PlayerReply llm_player_move(ChatBackend& backend, const LlmPlayerConfig& cfg,
                            const MoveContext& ctx);

}  // namespace verdict
