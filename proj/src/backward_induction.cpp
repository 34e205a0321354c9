#include <limits>

#include "verdict/classifier.hpp"
#include "verdict/solvers.hpp"

namespace verdict {

double SolveResult::expected_value(const GameSpec& spec, Player p) const {
  const auto& col = root_value[index(p)];
  if (col.size() == 1) return col[0];
  double v = 0.0;
  for (std::size_t t = 0; t < col.size(); ++t) v += spec.prior_y.at(t) * col[t];
  return v;
}

const Utterance* SolveResult::lookup(const std::string& key) const {
  auto it = policy.find(key);
  return it == policy.end() ? nullptr : &it->second;
}

std::string decision_key(const ConversationState& state, const std::optional<Utterance>& pending_x,
                         Player mover, const std::string& type_label) {
  std::string key = serialize(state);
  if (pending_x) key += "#" + pending_x->text();
  key += '|';
  key += to_string(mover);
  if (!type_label.empty()) key += ":" + type_label;
  return key;
}

namespace {

using Values = std::array<double, 2>;

class BackwardInduction {
 public:
  BackwardInduction(const GameSpec& spec, const SolveOptions& opts) : spec_(spec), opts_(opts) {}

  SolveResult run() {
    Values v = x_node(spec_.initial_state());
    result_.root_value[0] = {v[0]};
    result_.root_value[1] = {v[1]};
    result_.node_count = nodes_;
    return std::move(result_);
  }

 private:
  void count() {
    if (++nodes_ > opts_.node_budget)
      throw BudgetExceeded("backward induction: node budget " +
                           std::to_string(opts_.node_budget) + " exceeded");
  }

  Values leaf(const ConversationState& s) {
    count();
    const Verdict v = terminal_verdict(spec_, s);
    return {payoff(spec_, Player::X, 0, 0, v), payoff(spec_, Player::Y, 0, 0, v)};
  }

  Values x_node(const ConversationState& s) {
    count();
    const auto moves = legal_moves(spec_, s, Player::X, std::nullopt, 0);
    Values best{};
    const Utterance* choice = nullptr;
    for (const auto& x : moves) {
      Values v = y_node(s, x);
      if (!choice || v[0] > best[0]) {
        best = v;
        choice = &x;
      }
    }
    result_.policy[decision_key(s, std::nullopt, Player::X)] = *choice;
    return best;
  }

  Values y_node(const ConversationState& s, const Utterance& x) {
    count();
    const auto moves = legal_moves(spec_, s, Player::Y, x, 0);
    Values best{};
    const Utterance* choice = nullptr;
    for (const auto& y : moves) {
      ConversationState next = advance(spec_, s, x, y);
      Values v = is_terminal(spec_, next) ? leaf(next) : x_node(next);
      if (!choice || v[1] > best[1]) {
        best = v;
        choice = &y;
      }
    }
    result_.policy[decision_key(s, x, Player::Y)] = *choice;
    return best;
  }

  const GameSpec& spec_;
  const SolveOptions& opts_;
  SolveResult result_;
  std::size_t nodes_ = 0;
};

}  // namespace

SolveResult solve_backward_induction(const GameSpec& spec, const SolveOptions& opts) {
  if (!spec.complete_information())
    throw PreconditionError("backward induction requires complete information");
  if (!spec.classifier) throw ConfigError("game '" + spec.name + "' has no classifier");
  if (!spec.classifier->deterministic())
    throw PreconditionError("backward induction requires a deterministic classifier");
  return BackwardInduction(spec, opts).run();
}

}  // namespace verdict
