#include "verdict/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "verdict/classifier.hpp"

namespace verdict {

std::string_view to_string(Player p) { return p == Player::X ? "X" : "Y"; }

Player player_from_string(std::string_view s) {
  if (s == "X" || s == "x") return Player::X;
  if (s == "Y" || s == "y") return Player::Y;
  throw ConfigError("unknown player '" + std::string(s) + "'");
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Zero: return "zero";
    case Verdict::One: return "one";
    case Verdict::Cont: return "cont";
  }
  return "?";
}

Verdict verdict_from_string(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "zero" || lower == "0") return Verdict::Zero;
  if (lower == "one" || lower == "1") return Verdict::One;
  if (lower == "cont") return Verdict::Cont;
  throw ConfigError("unknown verdict '" + std::string(s) + "'");
}

bool is_valid_token(std::string_view token) {
  if (token.empty()) return false;
  return std::none_of(token.begin(), token.end(), [](char c) {
    return c == '#' || c == '@' || std::isspace(static_cast<unsigned char>(c));
  });
}

Utterance Utterance::parse(std::string_view text) {
  Utterance u;
  std::istringstream in{std::string(text)};
  std::string tok;
  while (in >> tok) u.tokens.push_back(tok);
  return u;
}

std::string Utterance::text() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

ConversationState ConversationState::prefix(std::size_t n) const {
  ConversationState p;
  p.seed = seed;
  n = std::min(n, stages.size());
  p.stages.assign(stages.begin(), stages.begin() + static_cast<std::ptrdiff_t>(n));
  p.verdicts.assign(verdicts.begin(),
                    verdicts.begin() + static_cast<std::ptrdiff_t>(std::min(n, verdicts.size())));
  return p;
}

std::size_t TypeSets::find(Player p, std::string_view label) const {
  const auto& set = of(p);
  auto it = std::find(set.begin(), set.end(), label);
  if (it == set.end())
    throw ConfigError("unknown type '" + std::string(label) + "' for player " +
                      std::string(to_string(p)));
  return static_cast<std::size_t>(it - set.begin());
}

// UtilityTable ---------------------------------------------------------------------

UtilityTable::UtilityTable(std::size_t num_x_types, std::size_t num_y_types)
    : nx_(num_x_types), ny_(num_y_types), values_(2 * nx_ * ny_ * 3) {}

std::size_t UtilityTable::offset(Player p, std::size_t tx, std::size_t ty, Verdict v) const {
  if (tx >= nx_ || ty >= ny_) throw ConfigError("utility lookup: type index out of range");
  return ((index(p) * nx_ + tx) * ny_ + ty) * 3 + index(v);
}

void UtilityTable::set(Player p, std::size_t tx, std::size_t ty, Verdict v, double value) {
  if (!std::isfinite(value)) throw ConfigError("utility values must be finite");
  values_[offset(p, tx, ty, v)] = value;
}

double UtilityTable::at(Player p, std::size_t tx, std::size_t ty, Verdict v) const {
  const auto& e = values_[offset(p, tx, ty, v)];
  if (!e)
    throw ConfigError("missing utility entry for player " + std::string(to_string(p)) +
                      ", verdict " + std::string(to_string(v)));
  return *e;
}

bool UtilityTable::has(Player p, std::size_t tx, std::size_t ty, Verdict v) const {
  return values_[offset(p, tx, ty, v)].has_value();
}

bool UtilityTable::is_total() const {
  return std::all_of(values_.begin(), values_.end(), [](const auto& e) { return e.has_value(); });
}

// GameSpec ---------------------------------------------------------------------------

bool GameSpec::in_alphabet(std::string_view token) const {
  if (open_vocabulary()) return true;
  return std::find(alphabet.begin(), alphabet.end(), token) != alphabet.end();
}

namespace {

void check_distribution(const std::vector<double>& p, std::size_t n, const char* what) {
  if (p.size() != n)
    throw ConfigError(std::string(what) + ": expected " + std::to_string(n) + " probabilities");
  double sum = 0.0;
  for (double x : p) {
    if (!(x >= 0.0) || !std::isfinite(x))
      throw ConfigError(std::string(what) + ": probabilities must be finite and non-negative");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw ConfigError(std::string(what) + ": must sum to 1");
}

}  // namespace

void GameSpec::validate() const {
  if (max_stages < 1) throw ConfigError("max_stages (d) must be >= 1");
  if (max_utterance_length < 1) throw ConfigError("max_utterance_length (l) must be >= 1");
  if (types.x.empty() || types.y.empty()) throw ConfigError("type sets must be non-empty");
  for (const auto& t : alphabet)
    if (!is_valid_token(t)) throw ConfigError("invalid alphabet token '" + t + "'");
  check_distribution(prior_y, types.y.size(), "prior over T_Y");
  check_distribution(prior_x, types.x.size(), "prior over T_X");
  if (utilities.num_x_types() != types.x.size() || utilities.num_y_types() != types.y.size())
    throw ConfigError("utility table dimensions do not match type sets");
  if (!utilities.is_total()) throw ConfigError("utility table is not total");
  for (auto p : {Player::X, Player::Y}) {
    for (const auto& rule : menus[index(p)]) {
      if (rule.type) types.find(p, *rule.type);
      for (const auto& m : rule.moves) {
        try {
          check_utterance(*this, m);
        } catch (const IllegalMoveError& e) {
          throw ConfigError(std::string("menu entry for ") + std::string(to_string(p)) + ": " +
                            e.what());
        }
      }
    }
  }
  for (const auto& t : seed)
    if (!is_valid_token(t)) throw ConfigError("invalid seed token '" + t + "'");
}

ConversationState GameSpec::initial_state() const {
  ConversationState s;
  s.seed = seed;
  return s;
}

// Rules ---------------------------------------------------------------------------------

bool is_terminal(const GameSpec& spec, const ConversationState& state) {
  if (auto v = state.last_verdict(); v && is_conclusive(*v)) return true;
  return state.stage_count() >= spec.max_stages;
}

Verdict terminal_verdict(const GameSpec& spec, const ConversationState& state) {
  if (!is_terminal(spec, state)) throw PreconditionError("terminal_verdict: game not finished");
  if (state.verdicts.size() != state.stages.size())
    throw PreconditionError("terminal_verdict: state has unclassified stages");
  return state.verdicts.back();
}

void check_utterance(const GameSpec& spec, const Utterance& u) {
  if (u.tokens.empty()) throw IllegalMoveError("utterance must be non-empty");
  if (u.tokens.size() > spec.max_utterance_length)
    throw IllegalMoveError("utterance '" + u.text() + "' exceeds length cap " +
                           std::to_string(spec.max_utterance_length));
  for (const auto& t : u.tokens) {
    if (!is_valid_token(t)) throw IllegalMoveError("invalid token '" + t + "'");
    if (!spec.in_alphabet(t)) throw IllegalMoveError("token '" + t + "' not in alphabet");
  }
}

namespace {

const MenuRule* select_rule(const GameSpec& spec, Player mover, const std::string& context,
                            std::optional<std::size_t> mover_type) {
  const auto& rules = spec.menus[index(mover)];
  const std::string* type_label = nullptr;
  if (mover_type) type_label = &spec.types.of(mover).at(*mover_type);

  // Most specific first: (type, context), context, type, default.
  const MenuRule* best = nullptr;
  int best_rank = -1;
  for (const auto& r : rules) {
    if (r.context && *r.context != context) continue;
    if (r.type && (!type_label || *r.type != *type_label)) continue;
    int rank = (r.context ? 2 : 0) + (r.type ? 1 : 0);
    if (rank > best_rank) {
      best = &r;
      best_rank = rank;
    }
  }
  return best;
}

// Menu-less players (free-text mode) accept any well-formed utterance.
bool in_some_menu(const GameSpec& spec, Player p, const Utterance& u) {
  const auto& rules = spec.menus[index(p)];
  if (rules.empty()) return true;
  return std::any_of(rules.begin(), rules.end(), [&](const MenuRule& r) {
    return std::find(r.moves.begin(), r.moves.end(), u) != r.moves.end();
  });
}

}  // namespace

std::vector<Utterance> legal_moves(const GameSpec& spec, const ConversationState& state,
                                   Player mover, const std::optional<Utterance>& pending_x,
                                   std::optional<std::size_t> mover_type) {
  if (is_terminal(spec, state)) throw GameOverError();
  std::string context;
  if (mover == Player::Y) {
    if (!pending_x) throw PreconditionError("Y cannot move before X in the current stage");
    context = pending_x->text();
  } else {
    if (pending_x) throw PreconditionError("X has already moved in the current stage");
    if (!state.stages.empty()) context = state.stages.back().y_move.text();
  }
  const MenuRule* rule = select_rule(spec, mover, context, mover_type);
  if (!rule || rule->moves.empty())
    throw ConfigError("empty menu for player " + std::string(to_string(mover)) +
                      (context.empty() ? std::string() : " in context '" + context + "'"));
  return rule->moves;
}

ConversationState apply_stage(const GameSpec& spec, const ConversationState& state,
                              const Utterance& x_move, const Utterance& y_move,
                              Verdict verdict) {
  if (is_terminal(spec, state)) throw GameOverError();
  if (state.verdicts.size() != state.stages.size())
    throw PreconditionError("apply_stage: state has unclassified stages");
  check_utterance(spec, x_move);
  check_utterance(spec, y_move);
  if (!in_some_menu(spec, Player::X, x_move))
    throw IllegalMoveError("'" + x_move.text() + "' is not an X move");
  if (!in_some_menu(spec, Player::Y, y_move))
    throw IllegalMoveError("'" + y_move.text() + "' is not a Y move");
  ConversationState next = state;
  next.stages.push_back(Stage{x_move, y_move});
  next.verdicts.push_back(verdict);
  return next;
}

ConversationState advance(const GameSpec& spec, const ConversationState& state,
                          const Utterance& x_move, const Utterance& y_move, AuditTrail* audit) {
  if (!spec.classifier) throw ConfigError("game '" + spec.name + "' has no classifier");
  if (is_terminal(spec, state)) throw GameOverError();
  ConversationState probe = state;
  probe.stages.push_back(Stage{x_move, y_move});
  const Verdict v = spec.classifier->classify(probe, audit);
  return apply_stage(spec, state, x_move, y_move, v);
}

double payoff(const GameSpec& spec, Player player, std::size_t tx, std::size_t ty,
              Verdict terminal) {
  return spec.utilities.at(player, tx, ty, terminal);
}

double payoff(const GameSpec& spec, Player player, std::string_view tx, std::string_view ty,
              Verdict terminal) {
  return payoff(spec, player, spec.types.find(Player::X, tx), spec.types.find(Player::Y, ty),
                terminal);
}

// Serialization ---------------------------------------------------------------------------

namespace {

std::string join(const std::vector<Token>& tokens) { return Utterance(tokens).text(); }

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    auto pos = text.find(sep, start);
    parts.emplace_back(text.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

Utterance parse_move(std::string_view text, const char* who) {
  Utterance u = Utterance::parse(text);
  if (u.tokens.empty())
    throw PreconditionError(std::string("parse: empty ") + who + " utterance");
  return u;
}

}  // namespace

std::string serialize(const ConversationState& state, SerializeStyle style) {
  std::string out;
  if (style == SerializeStyle::Delimiters) {
    out = join(state.seed);
    for (const auto& st : state.stages) {
      out += '#';
      out += st.x_move.text();
      out += '@';
      out += st.y_move.text();
    }
    return out;
  }
  std::vector<std::string> lines;
  if (!state.seed.empty()) lines.push_back("S: " + join(state.seed));
  for (const auto& st : state.stages) {
    lines.push_back("X: " + st.x_move.text());
    lines.push_back("Y: " + st.y_move.text());
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out += '\n';
    out += lines[i];
  }
  return out;
}

ConversationState parse_conversation(std::string_view text, SerializeStyle style) {
  ConversationState state;
  if (style == SerializeStyle::Delimiters) {
    auto parts = split(text, '#');
    state.seed = Utterance::parse(parts[0]).tokens;
    for (std::size_t i = 1; i < parts.size(); ++i) {
      auto xy = split(parts[i], '@');
      if (xy.size() != 2) throw PreconditionError("parse: stage without exactly one '@'");
      state.stages.push_back(Stage{parse_move(xy[0], "X"), parse_move(xy[1], "Y")});
    }
    return state;
  }
  if (text.empty()) return state;
  auto lines = split(text, '\n');
  std::size_t i = 0;
  if (lines[0].rfind("S: ", 0) == 0) {
    state.seed = Utterance::parse(std::string_view(lines[0]).substr(3)).tokens;
    i = 1;
  }
  if ((lines.size() - i) % 2 != 0) throw PreconditionError("parse: incomplete stage");
  for (; i < lines.size(); i += 2) {
    if (lines[i].rfind("X: ", 0) != 0 || lines[i + 1].rfind("Y: ", 0) != 0)
      throw PreconditionError("parse: expected 'X: ' then 'Y: ' lines");
    state.stages.push_back(Stage{parse_move(std::string_view(lines[i]).substr(3), "X"),
                                 parse_move(std::string_view(lines[i + 1]).substr(3), "Y")});
  }
  return state;
}

// Built-in games ----------------------------------------------------------------------------

namespace {

GameSpec court() {
  GameSpec g;
  g.name = "court";
  g.types = TypeSets{{"Prosecution"}, {"Defence"}};
  g.utilities = UtilityTable(1, 1);
  // Cont counts against the prosecution (presumption of innocence).
  g.utilities.set(Player::X, 0, 0, Verdict::Zero, -1);
  g.utilities.set(Player::X, 0, 0, Verdict::One, 1);
  g.utilities.set(Player::X, 0, 0, Verdict::Cont, -1);
  g.utilities.set(Player::Y, 0, 0, Verdict::Zero, 1);
  g.utilities.set(Player::Y, 0, 0, Verdict::One, -1);
  g.utilities.set(Player::Y, 0, 0, Verdict::Cont, 1);
  return g;
}

// Y labels in the order (exonerated-type, convicted-type).
GameSpec interrogation_like(std::string name, std::string innocent, std::string guilty) {
  GameSpec g;
  g.name = std::move(name);
  g.types = TypeSets{{"Interrogator"}, {innocent, guilty}};
  g.prior_y = {0.5, 0.5};
  g.utilities = UtilityTable(1, 2);
  // X is rewarded for a verdict matching Y's true type; Cont is neutral.
  g.utilities.set(Player::X, 0, 0, Verdict::Zero, 1);
  g.utilities.set(Player::X, 0, 0, Verdict::One, -1);
  g.utilities.set(Player::X, 0, 0, Verdict::Cont, 0);
  g.utilities.set(Player::X, 0, 1, Verdict::Zero, -1);
  g.utilities.set(Player::X, 0, 1, Verdict::One, 1);
  g.utilities.set(Player::X, 0, 1, Verdict::Cont, 0);
  // Y wants exoneration whatever his type.
  for (std::size_t ty : {0u, 1u}) {
    g.utilities.set(Player::Y, 0, ty, Verdict::Zero, 1);
    g.utilities.set(Player::Y, 0, ty, Verdict::One, -1);
    g.utilities.set(Player::Y, 0, ty, Verdict::Cont, 1);
  }
  return g;
}

}  // namespace

GameSpec builtin_game(std::string_view name) {
  if (name == "court") return court();
  if (name == "interrogation") return interrogation_like("interrogation", "Non-Guilty", "Guilty");
  if (name == "turing") return interrogation_like("turing", "Human", "Machine");
  throw ConfigError("unknown builtin game '" + std::string(name) + "'");
}

GameSpec induce_complete_info(const GameSpec& spec, std::size_t tx, std::size_t ty) {
  GameSpec g = spec;
  const std::string x_label = spec.types.x.at(tx);
  const std::string y_label = spec.types.y.at(ty);
  g.types = TypeSets{{x_label}, {y_label}};
  g.prior_x = {1.0};
  g.prior_y = {1.0};
  g.utilities = UtilityTable(1, 1);
  for (auto p : {Player::X, Player::Y})
    for (auto v : kAllVerdicts) g.utilities.set(p, 0, 0, v, spec.utilities.at(p, tx, ty, v));
  // Rules for other types would fail validation against the reduced type sets.
  for (auto p : {Player::X, Player::Y}) {
    const std::string& label = p == Player::X ? x_label : y_label;
    std::vector<MenuRule> kept;
    for (const auto& rule : spec.menus[index(p)])
      if (!rule.type || *rule.type == label) kept.push_back(rule);
    g.menus[index(p)] = std::move(kept);
  }
  return g;
}

}  // namespace verdict
