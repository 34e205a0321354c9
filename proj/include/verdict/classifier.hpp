// Non-strategic judges: conversation -> Verdict.

#pragma once

#include <map>
#include <memory>
#include <set>
#include <tuple>
#include <string>
#include <utility>
#include <vector>

#include "verdict/core.hpp"

namespace verdict {

struct AuditTrail;

class Classifier {
 public:
  virtual ~Classifier() = default;

  // Requires at least one completed stage (PreconditionError otherwise).
  // `audit` receives external-call events for judges backed by a service.
  virtual Verdict classify(const ConversationState& state, AuditTrail* audit = nullptr) const = 0;

  // False for judges whose output may change between calls on the same input.
  virtual bool deterministic() const { return true; }

  // Config-schema JSON text describing this classifier, or empty when it
  // cannot be reconstructed from config (e.g. service-backed judges).
  virtual std::string config_json() const { return {}; }
};

using ClassifierPtr = std::shared_ptr<const Classifier>;

// Verdict after each stage prefix; the last entry equals classify(state).
std::vector<Verdict> classify_prefixes(const Classifier& c, const ConversationState& state,
                                       AuditTrail* audit = nullptr);

class ConstantClassifier final : public Classifier {
 public:
  explicit ConstantClassifier(Verdict v) : verdict_(v) {}
  Verdict classify(const ConversationState& state, AuditTrail* audit = nullptr) const override;
  std::string config_json() const override;

 private:
  Verdict verdict_;
};

enum class Speaker { X, Y, Any };

// Deterministic finite automaton over (token, speaker) events. The event stream
// of a state is, for every stage: the X tokens (speaker X), the Y tokens
// (speaker Y), then one "$stage" event (speaker Any). Seed tokens are not fed.
// Unmatched events keep the current state, so the transition function is total.
class AutomatonClassifier final : public Classifier {
 public:
  static constexpr const char* kStageEvent = "$stage";
  static constexpr const char* kAnyToken = "*";

  struct Transition {
    std::string from;
    std::string token;  // kAnyToken matches every token
    Speaker speaker = Speaker::Any;
    std::string to;
  };

  AutomatonClassifier(std::vector<std::string> states, std::string start,
                      std::vector<Transition> transitions,
                      std::map<std::string, Verdict> outputs);

  Verdict classify(const ConversationState& state, AuditTrail* audit = nullptr) const override;
  std::vector<Verdict> prefixes(const ConversationState& state) const;
  std::string config_json() const override;

  std::size_t num_states() const { return states_.size(); }

 private:
  std::size_t step(std::size_t s, const Token& token, Speaker who) const;
  std::size_t run_stage(std::size_t s, const Stage& stage) const;

  std::vector<std::string> states_;
  std::size_t start_ = 0;
  std::vector<Transition> transitions_;
  // (state, speaker, token) -> next; exact entries before wildcard entries.
  std::map<std::tuple<std::size_t, int, std::string>, std::size_t> exact_;
  std::map<std::pair<std::size_t, int>, std::size_t> wildcard_;
  std::vector<Verdict> outputs_;
};

// Rule-based judge. A trigger fires when some stage (or, with
// scope = Conversation, the conversation as a whole) has X tokens containing
// every `x_tokens` entry and Y tokens containing every `y_tokens` entry.
class KeywordClassifier final : public Classifier {
 public:
  enum class Scope { Stage, Conversation };
  enum class Precedence { GuiltyFirst, InnocentFirst };

  struct Trigger {
    std::set<Token> x_tokens;
    std::set<Token> y_tokens;
    Scope scope = Scope::Stage;
  };

  KeywordClassifier(std::vector<Trigger> guilty, std::vector<Trigger> innocent,
                    Precedence precedence = Precedence::GuiltyFirst);

  Verdict classify(const ConversationState& state, AuditTrail* audit = nullptr) const override;
  std::string config_json() const override;

 private:
  bool fires(const Trigger& t, const ConversationState& state) const;
  bool any_fires(const std::vector<Trigger>& ts, const ConversationState& state) const;

  std::vector<Trigger> guilty_;
  std::vector<Trigger> innocent_;
  Precedence precedence_;
};

}  // namespace verdict
