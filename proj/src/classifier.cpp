#include "verdict/classifier.hpp"

#include <algorithm>
#include <json.hpp>

namespace verdict {

using nlohmann::json;

namespace {

void require_stage(const ConversationState& state) {
  if (state.stages.empty())
    throw PreconditionError("classify: state has no completed stage");
}

std::string speaker_name(Speaker s) {
  switch (s) {
    case Speaker::X: return "X";
    case Speaker::Y: return "Y";
    case Speaker::Any: return "*";
  }
  return "*";
}

}  // namespace

std::vector<Verdict> classify_prefixes(const Classifier& c, const ConversationState& state,
                                       AuditTrail* audit) {
  require_stage(state);
  if (auto* a = dynamic_cast<const AutomatonClassifier*>(&c)) return a->prefixes(state);
  std::vector<Verdict> out;
  out.reserve(state.stages.size());
  for (std::size_t n = 1; n <= state.stages.size(); ++n)
    out.push_back(c.classify(state.prefix(n), audit));
  return out;
}

// ConstantClassifier ---------------------------------------------------------------

Verdict ConstantClassifier::classify(const ConversationState& state, AuditTrail*) const {
  require_stage(state);
  return verdict_;
}

std::string ConstantClassifier::config_json() const {
  return json{{"kind", "constant"}, {"verdict", std::string(to_string(verdict_))}}.dump();
}

// AutomatonClassifier ---------------------------------------------------------------

AutomatonClassifier::AutomatonClassifier(std::vector<std::string> states, std::string start,
                                         std::vector<Transition> transitions,
                                         std::map<std::string, Verdict> outputs)
    : states_(std::move(states)), transitions_(std::move(transitions)) {
  if (states_.empty()) throw ConfigError("automaton: no states");
  auto idx = [&](const std::string& name) {
    auto it = std::find(states_.begin(), states_.end(), name);
    if (it == states_.end()) throw ConfigError("automaton: unknown state '" + name + "'");
    return static_cast<std::size_t>(it - states_.begin());
  };
  {
    auto sorted = states_;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw ConfigError("automaton: duplicate state names");
  }
  start_ = idx(start);
  for (const auto& t : transitions_) {
    std::size_t from = idx(t.from), to = idx(t.to);
    int who = static_cast<int>(t.speaker);
    bool inserted = t.token == kAnyToken
                        ? wildcard_.emplace(std::pair{from, who}, to).second
                        : exact_.emplace(std::tuple{from, who, t.token}, to).second;
    if (!inserted)
      throw ConfigError("automaton: nondeterministic transition from '" + t.from + "' on '" +
                        t.token + "'");
  }
  outputs_.assign(states_.size(), Verdict::Cont);
  for (const auto& [name, v] : outputs) outputs_[idx(name)] = v;
  for (const auto& name : states_)
    if (!outputs.count(name)) throw ConfigError("automaton: no output for state '" + name + "'");
}

std::size_t AutomatonClassifier::step(std::size_t s, const Token& token, Speaker who) const {
  const int w = static_cast<int>(who);
  const int any = static_cast<int>(Speaker::Any);
  if (auto it = exact_.find({s, w, token}); it != exact_.end()) return it->second;
  if (w != any)
    if (auto it = exact_.find({s, any, token}); it != exact_.end()) return it->second;
  if (token != kStageEvent) {
    if (auto it = wildcard_.find({s, w}); it != wildcard_.end()) return it->second;
    if (w != any)
      if (auto it = wildcard_.find({s, any}); it != wildcard_.end()) return it->second;
  }
  return s;
}

std::size_t AutomatonClassifier::run_stage(std::size_t s, const Stage& stage) const {
  for (const auto& t : stage.x_move.tokens) s = step(s, t, Speaker::X);
  for (const auto& t : stage.y_move.tokens) s = step(s, t, Speaker::Y);
  return step(s, kStageEvent, Speaker::Any);
}

Verdict AutomatonClassifier::classify(const ConversationState& state, AuditTrail*) const {
  require_stage(state);
  std::size_t s = start_;
  for (const auto& st : state.stages) s = run_stage(s, st);
  return outputs_[s];
}

std::vector<Verdict> AutomatonClassifier::prefixes(const ConversationState& state) const {
  require_stage(state);
  std::vector<Verdict> out;
  std::size_t s = start_;
  for (const auto& st : state.stages) {
    s = run_stage(s, st);
    out.push_back(outputs_[s]);
  }
  return out;
}

std::string AutomatonClassifier::config_json() const {
  json j;
  j["kind"] = "automaton";
  j["states"] = states_;
  j["start"] = states_[start_];
  json ts = json::array();
  for (const auto& t : transitions_)
    ts.push_back({{"from", t.from}, {"token", t.token}, {"speaker", speaker_name(t.speaker)},
                  {"to", t.to}});
  j["transitions"] = ts;
  json outs = json::object();
  for (std::size_t i = 0; i < states_.size(); ++i)
    outs[states_[i]] = std::string(to_string(outputs_[i]));
  j["outputs"] = outs;
  return j.dump();
}

// KeywordClassifier ----------------------------------------------------------------------

KeywordClassifier::KeywordClassifier(std::vector<Trigger> guilty, std::vector<Trigger> innocent,
                                     Precedence precedence)
    : guilty_(std::move(guilty)), innocent_(std::move(innocent)), precedence_(precedence) {
  for (const auto* list : {&guilty_, &innocent_})
    for (const auto& t : *list)
      if (t.x_tokens.empty() && t.y_tokens.empty())
        throw ConfigError("keyword classifier: trigger with no tokens");
}

namespace {

bool contains_all(const std::vector<Token>& haystack, const std::set<Token>& needles) {
  return std::all_of(needles.begin(), needles.end(), [&](const Token& n) {
    return std::find(haystack.begin(), haystack.end(), n) != haystack.end();
  });
}

}  // namespace

bool KeywordClassifier::fires(const Trigger& t, const ConversationState& state) const {
  if (t.scope == Scope::Stage) {
    return std::any_of(state.stages.begin(), state.stages.end(), [&](const Stage& st) {
      return contains_all(st.x_move.tokens, t.x_tokens) &&
             contains_all(st.y_move.tokens, t.y_tokens);
    });
  }
  std::vector<Token> xs, ys;
  for (const auto& st : state.stages) {
    xs.insert(xs.end(), st.x_move.tokens.begin(), st.x_move.tokens.end());
    ys.insert(ys.end(), st.y_move.tokens.begin(), st.y_move.tokens.end());
  }
  return contains_all(xs, t.x_tokens) && contains_all(ys, t.y_tokens);
}

bool KeywordClassifier::any_fires(const std::vector<Trigger>& ts,
                                  const ConversationState& state) const {
  return std::any_of(ts.begin(), ts.end(), [&](const Trigger& t) { return fires(t, state); });
}

Verdict KeywordClassifier::classify(const ConversationState& state, AuditTrail*) const {
  require_stage(state);
  const bool guilty = any_fires(guilty_, state);
  const bool innocent = any_fires(innocent_, state);
  if (guilty && innocent)
    return precedence_ == Precedence::GuiltyFirst ? Verdict::One : Verdict::Zero;
  if (guilty) return Verdict::One;
  if (innocent) return Verdict::Zero;
  return Verdict::Cont;
}

std::string KeywordClassifier::config_json() const {
  auto dump = [](const std::vector<Trigger>& ts) {
    json arr = json::array();
    for (const auto& t : ts)
      arr.push_back({{"x", t.x_tokens},
                     {"y", t.y_tokens},
                     {"scope", t.scope == Scope::Stage ? "stage" : "conversation"}});
    return arr;
  };
  return json{{"kind", "keyword"},
              {"guilty", dump(guilty_)},
              {"innocent", dump(innocent_)},
              {"precedence",
               precedence_ == Precedence::GuiltyFirst ? "guilty_first" : "innocent_first"}}
      .dump();
}

}  // namespace verdict
