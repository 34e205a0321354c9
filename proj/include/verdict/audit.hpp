#pragma once

#include <string>
#include <vector>

namespace verdict {

// One external-call outcome or notable event during a match.
struct AuditEvent {
  std::string kind;    // "chat", "judge", "judge_ambiguous", "truncated", "failure", ...
  std::string detail;
  int attempts = 1;
  bool ok = true;

  friend bool operator==(const AuditEvent&, const AuditEvent&) = default;
};

// Not synchronized: one trail per match.
struct AuditTrail {
  std::vector<AuditEvent> events;

  void add(std::string kind, std::string detail, int attempts = 1, bool ok = true) {
    events.push_back(AuditEvent{std::move(kind), std::move(detail), attempts, ok});
  }
};

}  // namespace verdict
