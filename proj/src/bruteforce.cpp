// Pure-profile enumeration oracle.
//
// The game is materialized as one explicit tree per Y type. Every decision
// variable (an X information set, or a Y node for one type) gets one digit of
// an odometer. Variables are numbered in post-order, so a node's descendants
// are always more significant digits than the node itself; the first profile
// passing the one-deviation check is therefore the SPE that picks the first
// best move in menu order everywhere (the same selection as backward induction).

#include <limits>
#include <unordered_map>

#include "verdict/classifier.hpp"
#include "verdict/solvers.hpp"

namespace verdict {

namespace {

using Values = std::array<double, 2>;

struct Node {
  bool terminal = false;
  Values payoff{};
  std::vector<int> children;
  int var = -1;
};

struct Tree {
  std::vector<Node> nodes;
  std::vector<int> post_order;
  int root = -1;
};

struct Var {
  Player mover = Player::X;
  std::vector<Utterance> actions;
  std::string key;
  std::vector<std::pair<int, int>> members;  // (tree, node)
};

class GameGraph {
 public:
  GameGraph(const GameSpec& spec, const SolveOptions& opts) : spec_(spec), opts_(opts) {
    const bool bayesian = spec.types.y.size() > 1;
    for (std::size_t t = 0; t < spec.types.y.size(); ++t) {
      trees_.emplace_back();
      type_ = t;
      type_label_ = bayesian ? spec.types.y[t] : std::string();
      trees_.back().root = build_x(spec.initial_state());
    }
  }

  const std::vector<Tree>& trees() const { return trees_; }
  const std::vector<Var>& vars() const { return vars_; }
  std::size_t node_count() const { return nodes_; }

  std::uint64_t profile_count() const {
    std::uint64_t total = 1;
    for (const auto& v : vars_) {
      const std::uint64_t n = v.actions.size();
      if (total > std::numeric_limits<std::uint64_t>::max() / n)
        return std::numeric_limits<std::uint64_t>::max();
      total *= n;
    }
    return total;
  }

 private:
  int new_node() {
    if (++nodes_ > opts_.node_budget)
      throw BudgetExceeded("brute force: node budget " + std::to_string(opts_.node_budget) +
                           " exceeded");
    auto& tree = trees_.back();
    tree.nodes.emplace_back();
    return static_cast<int>(tree.nodes.size()) - 1;
  }

  void finish(int id) { trees_.back().post_order.push_back(id); }

  int build_x(const ConversationState& s) {
    const int id = new_node();
    const auto moves = legal_moves(spec_, s, Player::X, std::nullopt, 0);
    std::vector<int> kids;
    for (const auto& x : moves) kids.push_back(build_y(s, x));
    const std::string key = decision_key(s, std::nullopt, Player::X);
    auto [it, inserted] = x_vars_.try_emplace(key, static_cast<int>(vars_.size()));
    if (inserted) vars_.push_back(Var{Player::X, moves, key, {}});
    vars_[it->second].members.emplace_back(static_cast<int>(trees_.size()) - 1, id);
    auto& node = trees_.back().nodes[id];
    node.children = std::move(kids);
    node.var = it->second;
    finish(id);
    return id;
  }

  int build_y(const ConversationState& s, const Utterance& x) {
    const int id = new_node();
    const auto moves = legal_moves(spec_, s, Player::Y, x, type_);
    std::vector<int> kids;
    for (const auto& y : moves) {
      ConversationState next = advance(spec_, s, x, y);
      kids.push_back(is_terminal(spec_, next) ? build_leaf(next) : build_x(next));
    }
    const int var = static_cast<int>(vars_.size());
    vars_.push_back(Var{Player::Y, moves, decision_key(s, x, Player::Y, type_label_),
                        {{static_cast<int>(trees_.size()) - 1, id}}});
    auto& node = trees_.back().nodes[id];
    node.children = std::move(kids);
    node.var = var;
    finish(id);
    return id;
  }

  int build_leaf(const ConversationState& s) {
    const int id = new_node();
    const Verdict v = terminal_verdict(spec_, s);
    auto& node = trees_.back().nodes[id];
    node.terminal = true;
    node.payoff = {payoff(spec_, Player::X, 0, type_, v), payoff(spec_, Player::Y, 0, type_, v)};
    finish(id);
    return id;
  }

  const GameSpec& spec_;
  const SolveOptions& opts_;
  std::vector<Tree> trees_;
  std::vector<Var> vars_;
  std::unordered_map<std::string, int> x_vars_;
  std::size_t type_ = 0;
  std::string type_label_;
  std::size_t nodes_ = 0;
};

class ProfileChecker {
 public:
  ProfileChecker(const GameGraph& g, const std::vector<double>& prior)
      : g_(g), prior_(prior), values_(g.trees().size()), reached_(g.trees().size()) {
    for (std::size_t t = 0; t < g.trees().size(); ++t) {
      values_[t].resize(g.trees()[t].nodes.size());
      reached_[t].resize(g.trees()[t].nodes.size());
    }
  }

  void evaluate(const std::vector<std::size_t>& digits) {
    const auto& vars = g_.vars();
    for (std::size_t t = 0; t < g_.trees().size(); ++t) {
      const auto& tree = g_.trees()[t];
      for (int id : tree.post_order) {
        const auto& n = tree.nodes[id];
        values_[t][id] = n.terminal ? n.payoff : values_[t][n.children[digits[n.var]]];
      }
      // Reverse post-order visits parents before children.
      std::fill(reached_[t].begin(), reached_[t].end(), 0);
      reached_[t][tree.root] = 1;
      for (auto it = tree.post_order.rbegin(); it != tree.post_order.rend(); ++it) {
        const auto& n = tree.nodes[*it];
        if (n.terminal || !reached_[t][*it]) continue;
        if (vars[n.var].mover == Player::X) {
          for (int c : n.children) reached_[t][c] = 1;
        } else {
          reached_[t][n.children[digits[n.var]]] = 1;
        }
      }
    }
  }

  // One-deviation check at every decision variable.
  bool is_equilibrium(const std::vector<std::size_t>& digits) const {
    const auto& vars = g_.vars();
    for (std::size_t v = 0; v < vars.size(); ++v) {
      const auto& var = vars[v];
      if (var.actions.size() < 2) continue;
      if (var.mover == Player::Y) {
        const auto [t, id] = var.members.front();
        const auto& n = g_.trees()[t].nodes[id];
        const double chosen = values_[t][n.children[digits[v]]][1];
        for (int c : n.children)
          if (values_[t][c][1] > chosen) return false;
        continue;
      }
      // X: Bayes-consistent weights over the trees containing this info set.
      std::vector<double> w(var.members.size());
      double mass = 0.0;
      for (std::size_t m = 0; m < var.members.size(); ++m) {
        const auto [t, id] = var.members[m];
        w[m] = prior_[t] * reached_[t][id];
        mass += w[m];
      }
      if (!(mass > 0.0)) {
        for (std::size_t m = 0; m < var.members.size(); ++m) {
          w[m] = prior_[var.members[m].first];
          mass += w[m];
        }
      }
      if (!(mass > 0.0)) continue;  // only zero-prior types reach it
      auto expected = [&](std::size_t a) {
        double e = 0.0;
        for (std::size_t m = 0; m < var.members.size(); ++m) {
          const auto [t, id] = var.members[m];
          e += w[m] / mass * values_[t][g_.trees()[t].nodes[id].children[a]][0];
        }
        return e;
      };
      const double chosen = expected(digits[v]);
      const double tol = g_.trees().size() > 1 ? 1e-12 : 0.0;
      for (std::size_t a = 0; a < var.actions.size(); ++a)
        if (expected(a) > chosen + tol) return false;
    }
    return true;
  }

  Values root_value(std::size_t t) const { return values_[t][g_.trees()[t].root]; }

 private:
  const GameGraph& g_;
  const std::vector<double>& prior_;
  std::vector<std::vector<Values>> values_;
  std::vector<std::vector<char>> reached_;
};

void check_solvable(const GameSpec& spec) {
  if (spec.types.x.size() != 1)
    throw PreconditionError("brute force: X must have a single type");
  if (!spec.classifier) throw ConfigError("game '" + spec.name + "' has no classifier");
  if (!spec.classifier->deterministic())
    throw PreconditionError("brute force requires a deterministic classifier");
}

}  // namespace

std::uint64_t count_pure_profiles(const GameSpec& spec, const SolveOptions& opts) {
  check_solvable(spec);
  return GameGraph(spec, opts).profile_count();
}

SolveResult solve_bruteforce(const GameSpec& spec, const SolveOptions& opts) {
  check_solvable(spec);
  GameGraph graph(spec, opts);
  const std::uint64_t total = graph.profile_count();
  if (total > opts.profile_cap)
    throw BudgetExceeded("brute force: " + std::to_string(total) +
                         " pure profiles exceed the cap of " + std::to_string(opts.profile_cap));

  const auto& vars = graph.vars();
  std::vector<std::size_t> digits(vars.size(), 0);
  ProfileChecker checker(graph, spec.prior_y);
  SolveResult result;
  result.node_count = graph.node_count();

  while (true) {
    ++result.profiles_checked;
    checker.evaluate(digits);
    if (checker.is_equilibrium(digits)) {
      for (std::size_t t = 0; t < graph.trees().size(); ++t) {
        const Values v = checker.root_value(t);
        result.root_value[0].push_back(v[0]);
        result.root_value[1].push_back(v[1]);
      }
      for (std::size_t v = 0; v < vars.size(); ++v)
        result.policy[vars[v].key] = vars[v].actions[digits[v]];
      return result;
    }
    // Odometer: the last (least significant) digit turns fastest.
    std::size_t i = vars.size();
    while (i > 0) {
      --i;
      if (++digits[i] < vars[i].actions.size()) break;
      digits[i] = 0;
      if (i == 0) {
        result.status = SolveStatus::NoPureEquilibrium;
        return result;
      }
    }
    if (vars.empty()) break;
  }
  result.status = SolveStatus::NoPureEquilibrium;
  return result;
}

}  // namespace verdict
