// UCT search shared by mcts and ismcts.
//
// X nodes are information sets: their statistics aggregate over every
// determinization of Y's type. Y nodes keep one branch per Y type, since Y
// knows his own type. With a single possible type the search is plain UCT.

#include <cmath>
#include <limits>
#include <map>
#include <memory>

#include "verdict/classifier.hpp"
#include "verdict/rng.hpp"
#include "verdict/solvers.hpp"

namespace verdict {

namespace {

using Values = std::array<double, 2>;

struct SearchNode;

struct Branch {
  std::vector<Utterance> actions;
  std::vector<std::size_t> visits;
  std::vector<double> value_sum;  // mover's payoff
  std::vector<std::size_t> untried;
  std::size_t total = 0;
  bool initialized = false;
};

struct SearchNode {
  Player mover = Player::X;
  ConversationState state;
  std::optional<Utterance> pending_x;
  bool terminal = false;
  std::vector<Branch> branches;  // one for X nodes, |T_Y| for Y nodes
  // Shared by all branches: what follows a Y move is X's information set,
  // which does not depend on Y's type.
  std::map<Utterance, std::unique_ptr<SearchNode>> children;

  SearchNode& child(const Utterance& a) { return *children.at(a); }
};

class Search {
 public:
  Search(const GameSpec& spec, double c, std::uint64_t seed, std::vector<double> type_weights,
         std::size_t num_y_types)
      : spec_(spec),
        c_(c),
        tree_rng_(seed),
        det_rng_(mix_seed(seed, 0xD37)),
        type_weights_(std::move(type_weights)),
        num_y_types_(num_y_types) {}

  SearchResult run(const ConversationState& root_state, const std::optional<Utterance>& pending_x,
                   std::size_t iterations) {
    auto root = make_node(root_state, pending_x);
    if (root->terminal) throw GameOverError();
    for (std::size_t i = 0; i < iterations; ++i) {
      const std::size_t ty = determinize();
      iterate(*root, ty);
    }
    // Root statistics live in the root mover's branch; for a Y root in a
    // complete-information game that is branch 0 as well.
    const Branch& b = root->branches[branch_index(*root, 0)];
    SearchResult out;
    out.root.iterations = iterations;
    out.root.actions = b.actions;
    out.root.visits = b.visits;
    out.root.mean_value.resize(b.actions.size());
    std::size_t best = 0;
    for (std::size_t a = 0; a < b.actions.size(); ++a) {
      out.root.mean_value[a] = b.visits[a] ? b.value_sum[a] / b.visits[a] : 0.0;
      if (b.visits[a] > b.visits[best]) best = a;
    }
    out.chosen = b.actions[best];
    return out;
  }

 private:
  std::size_t determinize() {
    if (num_y_types_ == 1) return 0;
    return det_rng_.categorical(type_weights_);
  }

  std::unique_ptr<SearchNode> make_node(const ConversationState& s,
                                        const std::optional<Utterance>& pending_x) {
    auto n = std::make_unique<SearchNode>();
    n->state = s;
    n->pending_x = pending_x;
    n->mover = pending_x ? Player::Y : Player::X;
    n->terminal = !pending_x && is_terminal(spec_, s);
    if (!n->terminal) n->branches.resize(n->mover == Player::X ? 1 : num_y_types_);
    return n;
  }

  std::size_t branch_index(const SearchNode& n, std::size_t ty) const {
    return n.mover == Player::Y ? ty : 0;
  }

  std::vector<Utterance> moves(const SearchNode& n, std::size_t ty) const {
    return n.mover == Player::X ? legal_moves(spec_, n.state, Player::X, std::nullopt, 0)
                                : legal_moves(spec_, n.state, Player::Y, n.pending_x, ty);
  }

  Values terminal_payoff(const ConversationState& s, std::size_t ty) const {
    const Verdict v = terminal_verdict(spec_, s);
    return {payoff(spec_, Player::X, 0, ty, v), payoff(spec_, Player::Y, 0, ty, v)};
  }

  // Successor position after `a` is played at `n`.
  std::pair<ConversationState, std::optional<Utterance>> successor(const SearchNode& n,
                                                                   const Utterance& a) const {
    if (n.mover == Player::X) return {n.state, a};
    return {advance(spec_, n.state, *n.pending_x, a), std::nullopt};
  }

  Values iterate(SearchNode& n, std::size_t ty) {
    if (n.terminal) return terminal_payoff(n.state, ty);
    Branch& b = n.branches[branch_index(n, ty)];
    if (!b.initialized) {
      b.actions = moves(n, ty);
      b.visits.assign(b.actions.size(), 0);
      b.value_sum.assign(b.actions.size(), 0.0);
      for (std::size_t a = 0; a < b.actions.size(); ++a) b.untried.push_back(a);
      b.initialized = true;
    }

    std::size_t a;
    Values result;
    if (!b.untried.empty()) {
      const std::size_t pick = tree_rng_.below(b.untried.size());
      a = b.untried[pick];
      b.untried.erase(b.untried.begin() + static_cast<std::ptrdiff_t>(pick));
      const Utterance& move = b.actions[a];
      auto it = n.children.find(move);
      if (it == n.children.end()) {
        auto [s, pending] = successor(n, move);
        it = n.children.emplace(move, make_node(s, pending)).first;
      }
      result = rollout(*it->second, ty);
    } else {
      a = select(b, n.mover);
      result = iterate(n.child(b.actions[a]), ty);
    }
    ++b.total;
    ++b.visits[a];
    b.value_sum[a] += result[index(n.mover)];
    return result;
  }

  std::size_t select(const Branch& b, Player) const {
    const double log_n = std::log(static_cast<double>(b.total));
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < b.actions.size(); ++a) {
      const double n = static_cast<double>(b.visits[a]);
      const double score = b.value_sum[a] / n + c_ * std::sqrt(log_n / n);
      if (score > best_score) {
        best_score = score;
        best = a;
      }
    }
    return best;
  }

  // Uniform-random playout from a freshly expanded node.
  Values rollout(const SearchNode& n, std::size_t ty) {
    if (n.terminal) return terminal_payoff(n.state, ty);
    ConversationState s = n.state;
    std::optional<Utterance> pending = n.pending_x;
    while (true) {
      if (!pending) {
        if (is_terminal(spec_, s)) return terminal_payoff(s, ty);
        auto xs = legal_moves(spec_, s, Player::X, std::nullopt, 0);
        pending = xs[tree_rng_.below(xs.size())];
      }
      auto ys = legal_moves(spec_, s, Player::Y, pending, ty);
      s = advance(spec_, s, *pending, ys[tree_rng_.below(ys.size())]);
      pending.reset();
    }
  }

  const GameSpec& spec_;
  double c_;
  Rng tree_rng_;
  Rng det_rng_;
  std::vector<double> type_weights_;
  std::size_t num_y_types_;
};

void check_searchable(const GameSpec& spec, std::size_t iterations) {
  if (iterations < 1) throw PreconditionError("search: iterations must be >= 1");
  if (spec.types.x.size() != 1) throw PreconditionError("search: X must have a single type");
  if (!spec.classifier) throw ConfigError("game '" + spec.name + "' has no classifier");
}

}  // namespace

SearchResult mcts(const GameSpec& spec, const ConversationState& root, std::size_t iterations,
                  double exploration_c, std::uint64_t seed,
                  const std::optional<Utterance>& pending_x) {
  check_searchable(spec, iterations);
  if (!spec.complete_information()) throw PreconditionError("mcts requires complete information");
  return Search(spec, exploration_c, seed, {1.0}, 1).run(root, pending_x, iterations);
}

SearchResult ismcts(const GameSpec& spec, const ConversationState& root, const Belief& belief,
                    std::size_t iterations, double exploration_c, std::uint64_t seed) {
  check_searchable(spec, iterations);
  belief.validate(spec.types.y.size());
  return Search(spec, exploration_c, seed, belief.p, spec.types.y.size())
      .run(root, std::nullopt, iterations);
}

// Beliefs -----------------------------------------------------------------------------------

Belief Belief::point_mass(std::size_t n, std::size_t at) {
  Belief b{std::vector<double>(n, 0.0)};
  b.p.at(at) = 1.0;
  return b;
}

void Belief::validate(std::size_t num_types) const {
  if (p.size() != num_types)
    throw PreconditionError("belief has " + std::to_string(p.size()) + " entries, expected " +
                            std::to_string(num_types));
  double sum = 0.0;
  for (double x : p) {
    if (!(x >= 0.0) || !std::isfinite(x))
      throw PreconditionError("belief entries must be finite and non-negative");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw PreconditionError("belief must sum to 1");
}

Belief update_belief(const Belief& belief, const GameSpec& spec, const Utterance& observed,
                     const TypePolicy& policy) {
  const std::size_t n = spec.types.y.size();
  belief.validate(n);
  if (policy.size() != n) throw PreconditionError("assumed policy must cover every Y type");
  Belief post{std::vector<double>(n, 0.0)};
  double total = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    double like = 0.0;
    for (const auto& [u, prob] : policy[t]) {
      if (!(prob >= 0.0) || !std::isfinite(prob))
        throw PreconditionError("assumed policy has a negative or non-finite probability");
      if (u == observed) like = prob;
    }
    post.p[t] = belief.p[t] * like;
    total += post.p[t];
  }
  if (!(total > 0.0)) return Belief::prior(spec);
  for (double& x : post.p) x /= total;
  // Renormalize once more so the mass is 1 to rounding.
  double sum = 0.0;
  for (double x : post.p) sum += x;
  for (double& x : post.p) x /= sum;
  return post;
}

}  // namespace verdict
