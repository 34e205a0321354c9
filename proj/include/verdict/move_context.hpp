#pragma once

#include <functional>
#include <optional>

#include "verdict/audit.hpp"
#include "verdict/core.hpp"
#include "verdict/rng.hpp"
#include "verdict/solvers.hpp"

namespace verdict {

// Everything an agent may look at when choosing a move. X never sees Y's
// type; `belief` is X's distribution over it (nullptr: the game prior).
struct MoveContext {
  const GameSpec& spec;
  const ConversationState& state;
  Player mover;
  std::optional<Utterance> pending_x;  // set when mover == Y
  std::size_t mover_type = 0;
  const Belief* belief = nullptr;
  Rng& rng;
  AuditTrail* audit = nullptr;

  std::vector<Utterance> menu() const {
    return legal_moves(spec, state, mover, pending_x, mover_type);
  }
  bool free_text() const { return spec.menus[index(mover)].empty(); }
};

using MovePolicy = std::function<Utterance(const MoveContext&)>;

}  // namespace verdict
