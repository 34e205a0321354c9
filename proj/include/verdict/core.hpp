// Verdict-game formalism: conversation state, legal moves, stage transition,
// termination and payoff lookup.
//
// A game is played in stages. In each stage X appends an utterance, Y replies,
// and the judge (a non-strategic classifier) evaluates the completed stage.
// Zero/One end the game, Cont continues it unless the stage cap is reached.

#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace verdict {

// Errors ---------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class GameOverError : public PreconditionError {
 public:
  GameOverError() : PreconditionError("game over: state is terminal") {}
};

class IllegalMoveError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

// Basic vocabulary -------------------------------------------------------------

enum class Player { X = 0, Y = 1 };

constexpr Player opponent(Player p) { return p == Player::X ? Player::Y : Player::X; }
constexpr std::size_t index(Player p) { return static_cast<std::size_t>(p); }
std::string_view to_string(Player p);
Player player_from_string(std::string_view s);

enum class Verdict { Zero = 0, One = 1, Cont = 2 };

constexpr bool is_conclusive(Verdict v) { return v != Verdict::Cont; }
constexpr std::size_t index(Verdict v) { return static_cast<std::size_t>(v); }
inline constexpr std::array<Verdict, 3> kAllVerdicts = {Verdict::Zero, Verdict::One,
                                                       Verdict::Cont};
std::string_view to_string(Verdict v);
Verdict verdict_from_string(std::string_view s);

using Token = std::string;

// True when the token can appear in a serialized conversation: non-empty, no
// whitespace, no stage delimiters.
bool is_valid_token(std::string_view token);

struct Utterance {
  std::vector<Token> tokens;

  Utterance() = default;
  explicit Utterance(std::vector<Token> t) : tokens(std::move(t)) {}

  // Splits on whitespace.
  static Utterance parse(std::string_view text);
  std::string text() const;
  std::size_t size() const { return tokens.size(); }

  friend bool operator==(const Utterance&, const Utterance&) = default;
  friend auto operator<=>(const Utterance&, const Utterance&) = default;
};

struct Stage {
  Utterance x_move;
  Utterance y_move;

  friend bool operator==(const Stage&, const Stage&) = default;
};

struct ConversationState {
  std::vector<Token> seed;
  std::vector<Stage> stages;
  std::vector<Verdict> verdicts;  // one per completed stage

  std::size_t stage_count() const { return stages.size(); }
  std::optional<Verdict> last_verdict() const {
    if (verdicts.empty()) return std::nullopt;
    return verdicts.back();
  }
  // Prefix holding the first `n` stages (and their verdicts, if recorded).
  ConversationState prefix(std::size_t n) const;

  friend bool operator==(const ConversationState&, const ConversationState&) = default;
};

// Type labels and utilities ------------------------------------------------------

struct TypeSets {
  std::vector<std::string> x{"X"};
  std::vector<std::string> y{"Y"};

  const std::vector<std::string>& of(Player p) const { return p == Player::X ? x : y; }
  std::size_t find(Player p, std::string_view label) const;  // throws ConfigError

  friend bool operator==(const TypeSets&, const TypeSets&) = default;
};

// Per-player payoff over (t_X, t_Y, verdict). Every entry must be set before
// the table is used; unset entries raise ConfigError on lookup.
class UtilityTable {
 public:
  UtilityTable() = default;
  UtilityTable(std::size_t num_x_types, std::size_t num_y_types);

  void set(Player p, std::size_t tx, std::size_t ty, Verdict v, double value);
  double at(Player p, std::size_t tx, std::size_t ty, Verdict v) const;
  bool has(Player p, std::size_t tx, std::size_t ty, Verdict v) const;
  bool is_total() const;

  std::size_t num_x_types() const { return nx_; }
  std::size_t num_y_types() const { return ny_; }

  friend bool operator==(const UtilityTable&, const UtilityTable&) = default;

 private:
  std::size_t offset(Player p, std::size_t tx, std::size_t ty, Verdict v) const;

  std::size_t nx_ = 0;
  std::size_t ny_ = 0;
  std::vector<std::optional<double>> values_;
};

// Action abstraction --------------------------------------------------------------

// A finite list of legal utterances for one player. `context` is the text of
// the utterance the mover is responding to (the pending X move for Y, the
// previous Y move for X); `type` restricts the rule to one mover type label.
struct MenuRule {
  std::optional<std::string> context;
  std::optional<std::string> type;
  std::vector<Utterance> moves;

  friend bool operator==(const MenuRule&, const MenuRule&) = default;
};

class Classifier;

struct GameSpec {
  std::string name;
  std::vector<Token> alphabet;  // empty: open vocabulary
  std::size_t max_utterance_length = 1;  // l
  std::size_t max_stages = 1;            // d
  TypeSets types;
  std::vector<double> prior_y{1.0};
  std::vector<double> prior_x{1.0};
  UtilityTable utilities{1, 1};
  std::array<std::vector<MenuRule>, 2> menus;
  std::vector<Token> seed;
  std::string classifier_id;
  std::shared_ptr<const Classifier> classifier;

  bool open_vocabulary() const { return alphabet.empty(); }
  bool complete_information() const { return types.x.size() == 1 && types.y.size() == 1; }
  bool in_alphabet(std::string_view token) const;

  // Throws ConfigError on any violated invariant.
  void validate() const;

  ConversationState initial_state() const;
};

// Game rules -------------------------------------------------------------------

bool is_terminal(const GameSpec& spec, const ConversationState& state);

// Verdict that decides payoffs; Cont when the stage cap was reached.
Verdict terminal_verdict(const GameSpec& spec, const ConversationState& state);

// Checks length cap and alphabet membership. Throws IllegalMoveError.
void check_utterance(const GameSpec& spec, const Utterance& u);

// Configured menu for the mover. For Y, `pending_x` is the X move awaiting a
// reply. `mover_type` selects type-specific rules (index into the mover's type
// set); nullopt uses only type-independent rules.
std::vector<Utterance> legal_moves(const GameSpec& spec, const ConversationState& state,
                                   Player mover,
                                   const std::optional<Utterance>& pending_x = std::nullopt,
                                   std::optional<std::size_t> mover_type = std::nullopt);

ConversationState apply_stage(const GameSpec& spec, const ConversationState& state,
                              const Utterance& x_move, const Utterance& y_move,
                              Verdict verdict);

// Classifies the completed stage with spec.classifier and appends it.
struct AuditTrail;
ConversationState advance(const GameSpec& spec, const ConversationState& state,
                          const Utterance& x_move, const Utterance& y_move,
                          AuditTrail* audit = nullptr);

double payoff(const GameSpec& spec, Player player, std::size_t tx, std::size_t ty,
              Verdict terminal);
double payoff(const GameSpec& spec, Player player, std::string_view tx,
              std::string_view ty, Verdict terminal);

// Serialization -------------------------------------------------------------------

enum class SerializeStyle { Delimiters, SpeakerLabels };

std::string serialize(const ConversationState& state,
                      SerializeStyle style = SerializeStyle::Delimiters);

// Inverse of serialize. Verdicts are not part of the text, so the returned
// state carries none. Throws PreconditionError on malformed input.
ConversationState parse_conversation(std::string_view text,
                                     SerializeStyle style = SerializeStyle::Delimiters);

// Built-in games ------------------------------------------------------------------

// "court", "interrogation" or "turing". Menus and classifier are left empty.
GameSpec builtin_game(std::string_view name);

// The game restricted to a single (t_X, t_Y): complete information, same menus
// and classifier.
GameSpec induce_complete_info(const GameSpec& spec, std::size_t tx, std::size_t ty);

}  // namespace verdict
