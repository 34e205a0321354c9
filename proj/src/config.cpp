#include "verdict/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "verdict/classifier.hpp"
#include "verdict/rng.hpp"

namespace verdict {

using nlohmann::json;
namespace fs = std::filesystem;

std::string read_text_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("file not found: " + path.string());
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

namespace {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<T>();
}

std::vector<Token> tokens_of(const json& j) {
  if (j.is_string()) return Utterance::parse(j.get<std::string>()).tokens;
  return j.get<std::vector<Token>>();
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

// Inline text or the contents of `<key>_file`.
std::string text_field(const json& j, const std::string& key, const fs::path& base) {
  if (j.contains(key)) return j.at(key).get<std::string>();
  if (j.contains(key + "_file")) return read_text_file(resolve(base, j.at(key + "_file").get<std::string>()));
  return {};
}

Speaker speaker_from_string(const std::string& s) {
  if (s == "X" || s == "x") return Speaker::X;
  if (s == "Y" || s == "y") return Speaker::Y;
  if (s == "*" || s == "any") return Speaker::Any;
  throw ConfigError("unknown speaker '" + s + "'");
}

std::vector<KeywordClassifier::Trigger> triggers_of(const json& arr) {
  std::vector<KeywordClassifier::Trigger> out;
  for (const auto& t : arr) {
    KeywordClassifier::Trigger tr;
    for (const auto& tok : get_or<std::vector<Token>>(t, "x", {})) tr.x_tokens.insert(tok);
    for (const auto& tok : get_or<std::vector<Token>>(t, "y", {})) tr.y_tokens.insert(tok);
    const std::string scope = get_or<std::string>(t, "scope", "stage");
    if (scope == "stage")
      tr.scope = KeywordClassifier::Scope::Stage;
    else if (scope == "conversation")
      tr.scope = KeywordClassifier::Scope::Conversation;
    else
      throw ConfigError("unknown trigger scope '" + scope + "'");
    out.push_back(std::move(tr));
  }
  return out;
}

// Guilty and innocent triggers sharing a token can fire together.
bool overlapping(const std::vector<KeywordClassifier::Trigger>& g,
                 const std::vector<KeywordClassifier::Trigger>& i) {
  std::set<std::string> seen;
  for (const auto& t : g) {
    for (const auto& x : t.x_tokens) seen.insert("X " + x);
    for (const auto& y : t.y_tokens) seen.insert("Y " + y);
  }
  for (const auto& t : i) {
    for (const auto& x : t.x_tokens)
      if (seen.count("X " + x)) return true;
    for (const auto& y : t.y_tokens)
      if (seen.count("Y " + y)) return true;
  }
  return false;
}

MenuRule menu_rule_of(const json& j) {
  MenuRule r;
  if (j.contains("context")) r.context = Utterance::parse(j.at("context").get<std::string>()).text();
  if (j.contains("type")) r.type = j.at("type").get<std::string>();
  for (const auto& m : j.at("moves")) r.moves.push_back(Utterance(tokens_of(m)));
  return r;
}

LlmPlayerConfig player_llm_of(const json& j, const fs::path& base) {
  LlmPlayerConfig c;
  c.model_id = get_or<std::string>(j, "model", c.model_id);
  c.persona_prompt = text_field(j, "persona", base);
  c.case_context = text_field(j, "case_context", base);
  c.temperature = get_or<double>(j, "temperature", c.temperature);
  c.max_tokens = get_or<int>(j, "max_tokens", c.max_tokens);
  return c;
}

ModelKind model_of(const std::string& s) {
  if (s == "naive") return ModelKind::Naive;
  if (s == "spe") return ModelKind::Spe;
  throw ConfigError("unknown model '" + s + "' (naive | spe)");
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

ClassifierPtr classifier_from_json(const json& j, const fs::path& base_dir,
                                   std::shared_ptr<ChatBackend> backend) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "constant")
      return std::make_shared<ConstantClassifier>(verdict_from_string(j.at("verdict").get<std::string>()));
    if (kind == "automaton") {
      std::vector<AutomatonClassifier::Transition> ts;
      for (const auto& t : get_or<json>(j, "transitions", json::array()))
        ts.push_back({t.at("from").get<std::string>(), t.at("token").get<std::string>(),
                      speaker_from_string(get_or<std::string>(t, "speaker", "*")),
                      t.at("to").get<std::string>()});
      std::map<std::string, Verdict> outputs;
      for (const auto& [state, v] : j.at("outputs").items())
        outputs[state] = verdict_from_string(v.get<std::string>());
      return std::make_shared<AutomatonClassifier>(j.at("states").get<std::vector<std::string>>(),
                                                   j.at("start").get<std::string>(), std::move(ts),
                                                   std::move(outputs));
    }
    if (kind == "keyword") {
      auto guilty = triggers_of(get_or<json>(j, "guilty", json::array()));
      auto innocent = triggers_of(get_or<json>(j, "innocent", json::array()));
      auto prec = KeywordClassifier::Precedence::GuiltyFirst;
      if (j.contains("precedence")) {
        const std::string p = j.at("precedence").get<std::string>();
        if (p == "innocent_first")
          prec = KeywordClassifier::Precedence::InnocentFirst;
        else if (p != "guilty_first")
          throw ConfigError("unknown precedence '" + p + "'");
      } else if (overlapping(guilty, innocent)) {
        throw ConfigError("keyword classifier: guilty and innocent triggers share tokens; declare a precedence");
      }
      return std::make_shared<KeywordClassifier>(std::move(guilty), std::move(innocent), prec);
    }
    if (kind == "llm") {
      if (!backend) throw ConfigError("llm classifier needs an \"llm\" backend section");
      JudgeConfig c;
      c.model_id = get_or<std::string>(j, "model", c.model_id);
      c.case_context = text_field(j, "case_context", base_dir);
      c.instruction = text_field(j, "instruction", base_dir);
      c.strict_instruction = text_field(j, "strict_instruction", base_dir);
      if (c.strict_instruction.empty()) c.strict_instruction = c.instruction;
      c.temperature = get_or<double>(j, "temperature", c.temperature);
      if (c.instruction.empty()) throw ConfigError("llm classifier needs an instruction");
      return std::make_shared<LlmJudge>(std::move(backend), std::move(c));
    }
    throw ConfigError("unknown classifier kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("classifier: ") + e.what());
  }
}

GameSpec game_spec_from_json(const json& j, const fs::path& base_dir,
                             std::shared_ptr<ChatBackend> backend) {
  try {
    if (!j.contains("spec_version")) throw ConfigError("missing spec_version");
    if (j.at("spec_version").get<int>() != kSpecVersion)
      throw ConfigError("unsupported spec_version " + j.at("spec_version").dump());
    GameSpec g;
    if (j.contains("builtin")) g = builtin_game(j.at("builtin").get<std::string>());
    g.name = get_or<std::string>(j, "name", g.name);
    if (j.contains("alphabet")) g.alphabet = j.at("alphabet").get<std::vector<Token>>();
    g.max_utterance_length = get_or<std::size_t>(j, "max_utterance_length", g.max_utterance_length);
    g.max_stages = get_or<std::size_t>(j, "max_stages", g.max_stages);
    if (j.contains("seed")) g.seed = tokens_of(j.at("seed"));

    if (j.contains("types")) {
      TypeSets t = g.types;
      const auto& jt = j.at("types");
      if (jt.contains("X")) t.x = jt.at("X").get<std::vector<std::string>>();
      if (jt.contains("Y")) t.y = jt.at("Y").get<std::vector<std::string>>();
      if (t != g.types) {
        g.types = t;
        g.utilities = UtilityTable(t.x.size(), t.y.size());
        g.prior_x.assign(t.x.size(), 1.0 / static_cast<double>(t.x.size()));
        g.prior_y.assign(t.y.size(), 1.0 / static_cast<double>(t.y.size()));
      }
    }
    if (j.contains("prior")) {
      for (auto p : {Player::X, Player::Y}) {
        const std::string key(to_string(p));
        if (!j.at("prior").contains(key)) continue;
        auto& dist = p == Player::X ? g.prior_x : g.prior_y;
        dist.assign(g.types.of(p).size(), 0.0);
        for (const auto& [label, w] : j.at("prior").at(key).items())
          dist[g.types.find(p, label)] = w.get<double>();
      }
    }
    for (const auto& u : get_or<json>(j, "utilities", json::array())) {
      const Player p = player_from_string(u.at("player").get<std::string>());
      auto type_index = [&](Player who, const char* key) -> std::size_t {
        if (u.contains(key)) return g.types.find(who, u.at(key).get<std::string>());
        if (g.types.of(who).size() == 1) return 0;
        throw ConfigError(std::string("utility entry needs ") + key);
      };
      g.utilities.set(p, type_index(Player::X, "t_X"), type_index(Player::Y, "t_Y"),
                      verdict_from_string(u.at("verdict").get<std::string>()),
                      u.at("value").get<double>());
    }
    if (j.contains("menus")) {
      for (auto p : {Player::X, Player::Y}) {
        const std::string key(to_string(p));
        if (!j.at("menus").contains(key)) continue;
        g.menus[index(p)].clear();
        for (const auto& r : j.at("menus").at(key)) g.menus[index(p)].push_back(menu_rule_of(r));
      }
    }
    if (j.contains("classifier")) {
      g.classifier = classifier_from_json(j.at("classifier"), base_dir, backend);
      g.classifier_id = get_or<std::string>(j, "classifier_id", "inline");
    } else if (j.contains("classifier_id")) {
      g.classifier_id = j.at("classifier_id").get<std::string>();
      const json classifiers = get_or<json>(j, "classifiers", json::object());
      if (!classifiers.contains(g.classifier_id))
        throw ConfigError("classifier_id '" + g.classifier_id + "' not found in classifiers");
      g.classifier = classifier_from_json(classifiers.at(g.classifier_id), base_dir, backend);
    } else {
      throw ConfigError("game needs a classifier_id (or an inline classifier)");
    }
    g.validate();
    return g;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("game spec: ") + e.what());
  }
}

json game_spec_to_json(const GameSpec& g) {
  json j;
  j["spec_version"] = kSpecVersion;
  j["name"] = g.name;
  j["alphabet"] = g.alphabet;
  j["max_utterance_length"] = g.max_utterance_length;
  j["max_stages"] = g.max_stages;
  j["seed"] = g.seed;
  j["types"] = {{"X", g.types.x}, {"Y", g.types.y}};
  json prior;
  for (auto p : {Player::X, Player::Y}) {
    const auto& dist = p == Player::X ? g.prior_x : g.prior_y;
    json d = json::object();
    for (std::size_t i = 0; i < dist.size(); ++i) d[g.types.of(p)[i]] = dist[i];
    prior[std::string(to_string(p))] = d;
  }
  j["prior"] = prior;
  json utils = json::array();
  for (auto p : {Player::X, Player::Y})
    for (std::size_t tx = 0; tx < g.types.x.size(); ++tx)
      for (std::size_t ty = 0; ty < g.types.y.size(); ++ty)
        for (auto v : kAllVerdicts)
          if (g.utilities.has(p, tx, ty, v))
            utils.push_back({{"player", std::string(to_string(p))},
                             {"t_X", g.types.x[tx]},
                             {"t_Y", g.types.y[ty]},
                             {"verdict", std::string(to_string(v))},
                             {"value", g.utilities.at(p, tx, ty, v)}});
  j["utilities"] = utils;
  json menus = json::object();
  for (auto p : {Player::X, Player::Y}) {
    json rules = json::array();
    for (const auto& r : g.menus[index(p)]) {
      json jr;
      if (r.context) jr["context"] = *r.context;
      if (r.type) jr["type"] = *r.type;
      json moves = json::array();
      for (const auto& m : r.moves) moves.push_back(m.text());
      jr["moves"] = moves;
      rules.push_back(jr);
    }
    menus[std::string(to_string(p))] = rules;
  }
  j["menus"] = menus;
  j["classifier_id"] = g.classifier_id;
  if (g.classifier) {
    const std::string c = g.classifier->config_json();
    if (!c.empty()) j["classifier"] = json::parse(c);
  }
  return j;
}

AgentConfig agent_config_from_json(const json& j, const fs::path& base_dir) {
  try {
    AgentConfig c;
    c.kind = agent_kind_from_string(j.at("kind").get<std::string>());
    c.name = get_or<std::string>(j, "name", "");
    c.breadth = get_or<std::size_t>(j, "breadth", c.breadth);
    c.depth = get_or<std::size_t>(j, "depth", c.depth);
    c.rollouts_per_candidate = get_or<std::size_t>(j, "rollouts_per_candidate", c.rollouts_per_candidate);
    c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
    if (j.contains("desired_verdict"))
      c.desired_verdict = verdict_from_string(j.at("desired_verdict").get<std::string>());
    if (j.contains("opponent_model")) c.opponent_model = model_of(j.at("opponent_model").get<std::string>());
    if (j.contains("continuation_model"))
      c.continuation_model = model_of(j.at("continuation_model").get<std::string>());
    if (j.contains("engine")) c.engine = engine_from_string(j.at("engine").get<std::string>());
    c.iterations = get_or<std::size_t>(j, "iterations", c.iterations);
    c.exploration = get_or<double>(j, "exploration", c.exploration);
    for (const auto& m : get_or<json>(j, "script", json::array())) c.script.push_back(Utterance(tokens_of(m)));
    if (j.contains("llm")) c.llm = player_llm_of(j.at("llm"), base_dir);
    if (j.contains("opponent_llm")) c.opponent_llm = player_llm_of(j.at("opponent_llm"), base_dir);
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("agent: ") + e.what());
  }
}

LoadedConfig load_config_json(const json& j, const fs::path& base_dir, const LoadOptions& opts) {
  LoadedConfig cfg;
  cfg.raw = j;
  cfg.base_dir = base_dir;
  cfg.digest = hex64(fnv1a(j.dump()));
  try {
    if (j.contains("llm")) {
      const json& l = j.at("llm");
      LlmSettings s;
      const std::string backend = get_or<std::string>(l, "backend", "mock");
      if (backend == "mock")
        s.backend = BackendKind::Mock;
      else if (backend == "live")
        s.backend = BackendKind::Live;
      else
        throw ConfigError("unknown llm backend '" + backend + "' (mock | live)");
      if (opts.backend_override) s.backend = *opts.backend_override;
      if (l.contains("fixture")) s.fixture = resolve(base_dir, l.at("fixture").get<std::string>());
      s.http.base_url = get_or<std::string>(l, "base_url", s.http.base_url);
      s.http.api_key_env = get_or<std::string>(l, "api_key_env", s.http.api_key_env);
      s.http.max_in_flight = get_or<int>(l, "max_in_flight", s.http.max_in_flight);
      s.http.requests_per_second = get_or<double>(l, "requests_per_second", s.http.requests_per_second);
      s.http.retry.max_attempts = get_or<int>(l, "max_attempts", s.http.retry.max_attempts);
      s.http.retry.base_delay = std::chrono::milliseconds(
          get_or<std::int64_t>(l, "base_delay_ms", s.http.retry.base_delay.count()));
      s.http.retry.max_delay = std::chrono::milliseconds(
          get_or<std::int64_t>(l, "max_delay_ms", s.http.retry.max_delay.count()));
      if (s.backend == BackendKind::Mock) {
        if (s.fixture.empty()) throw ConfigError("mock llm backend needs a \"fixture\" file");
        cfg.backend = MockBackend::from_file(s.fixture);
      } else {
        cfg.backend = std::make_shared<HttpBackend>(s.http);
      }
      cfg.llm = s;
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("llm: ") + e.what());
  }
  cfg.spec = game_spec_from_json(j, base_dir, cfg.backend);
  return cfg;
}

LoadedConfig load_config(const fs::path& path, const LoadOptions& opts) {
  const std::string text = read_text_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return load_config_json(j, path.parent_path(), opts);
}

ExperimentConfig experiment_from_config(const LoadedConfig& cfg) {
  if (!cfg.raw.contains("experiment")) throw ConfigError("config has no \"experiment\" section");
  const json& e = cfg.raw.at("experiment");
  try {
    ExperimentConfig x;
    x.spec = cfg.spec;
    x.digest = cfg.digest;
    x.n_matches = get_or<std::size_t>(e, "n_matches", 1);
    x.base_seed = get_or<std::uint64_t>(e, "base_seed", 0);
    x.parallelism = get_or<std::size_t>(e, "parallelism", 1);
    x.agent_y = agent_config_from_json(e.at("agent_y"), cfg.base_dir);
    if (e.contains("agent_x")) x.agent_x = agent_config_from_json(e.at("agent_x"), cfg.base_dir);
    for (const auto& a : get_or<json>(e, "arms", json::array()))
      x.arms.push_back(Arm{a.at("name").get<std::string>(), agent_config_from_json(a.at("agent_x"), cfg.base_dir)});
    if (!e.contains("agent_x") && x.arms.empty()) throw ConfigError("experiment needs agent_x or arms");
    // A free-text strategic X simulates the configured defence by default.
    auto fill = [&](AgentConfig& a) {
      if (a.kind == AgentKind::Strategic && a.llm && !a.opponent_llm && x.agent_y.llm)
        a.opponent_llm = x.agent_y.llm;
    };
    fill(x.agent_x);
    for (auto& a : x.arms) fill(a.agent_x);
    x.validate();
    return x;
  } catch (const json::exception& err) {
    throw ConfigError(std::string("experiment: ") + err.what());
  }
}

SolveSettings solve_settings_from_config(const LoadedConfig& cfg) {
  SolveSettings s;
  if (!cfg.raw.contains("solve")) return s;
  const json& j = cfg.raw.at("solve");
  try {
    if (j.contains("engine")) s.engine = engine_from_string(j.at("engine").get<std::string>());
    s.options.node_budget = get_or<std::size_t>(j, "node_budget", s.options.node_budget);
    s.options.profile_cap = get_or<std::uint64_t>(j, "profile_cap", s.options.profile_cap);
    s.iterations = get_or<std::size_t>(j, "iterations", s.iterations);
    s.exploration = get_or<double>(j, "exploration", s.exploration);
    s.seed = get_or<std::uint64_t>(j, "seed", s.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("solve: ") + e.what());
  }
  return s;
}

json solve_report(const GameSpec& spec, const SolveResult& r) {
  json j;
  j["game"] = spec.name;
  j["status"] = r.status == SolveStatus::Ok ? "ok" : "no pure PBE";
  j["node_count"] = r.node_count;
  j["profiles_checked"] = r.profiles_checked;
  if (r.status != SolveStatus::Ok) return j;
  json rv;
  for (auto p : {Player::X, Player::Y}) {
    json per_type = json::object();
    const auto& vals = r.root_value[index(p)];
    for (std::size_t t = 0; t < vals.size() && t < spec.types.y.size(); ++t)
      per_type[spec.types.y[t]] = vals[t];
    rv[std::string(to_string(p))] = per_type;
  }
  j["root_value"] = rv;
  j["expected_value"] = {{"X", r.expected_value(spec, Player::X)},
                         {"Y", r.expected_value(spec, Player::Y)}};
  json policy = json::array();
  for (const auto& [key, move] : r.policy) policy.push_back({{"decision", key}, {"move", move.text()}});
  j["policy"] = policy;
  return j;
}

}  // namespace verdict
