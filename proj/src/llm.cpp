#include "verdict/llm.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace verdict {

using nlohmann::json;

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool contains_ci(std::string_view haystack, std::string_view needle) {
  return lower(haystack).find(lower(needle)) != std::string::npos;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xF];
  return s;
}

}  // namespace

std::string request_digest(const ChatRequest& req) {
  json msgs = json::array();
  for (const auto& m : req.messages) msgs.push_back({m.role, m.text});
  json j{{"model", req.model_id}, {"messages", msgs}};
  if (req.sampling.seed) j["seed"] = *req.sampling.seed;
  return hex64(fnv1a(j.dump()));
}

// MockBackend -------------------------------------------------------------------------

MockBackend::MockBackend(std::map<std::string, std::string> exact, std::vector<Rule> rules,
                         std::optional<std::string> fallback)
    : exact_(std::move(exact)), rules_(std::move(rules)), fallback_(std::move(fallback)) {
  for (const auto& r : rules_)
    if (r.replies.empty()) throw ConfigError("mock fixture: rule without replies");
}

std::shared_ptr<MockBackend> MockBackend::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("mock fixture not found: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("mock fixture " + path.string() + ": " + e.what());
  }
  if (j.value("fixture_version", 0) != 1)
    throw ConfigError("mock fixture " + path.string() + ": unsupported fixture_version");
  std::map<std::string, std::string> exact;
  if (j.contains("exact")) exact = j["exact"].get<std::map<std::string, std::string>>();
  std::vector<Rule> rules;
  for (const auto& r : j.value("rules", json::array())) {
    Rule rule;
    rule.system_contains = r.value("system_contains", std::vector<std::string>{});
    rule.last_contains_all = r.value("last_contains_all", std::vector<std::string>{});
    rule.last_contains_any = r.value("last_contains_any", std::vector<std::string>{});
    rule.replies = r.at("replies").get<std::vector<std::string>>();
    rules.push_back(std::move(rule));
  }
  std::optional<std::string> fallback;
  if (j.contains("default")) fallback = j["default"].get<std::string>();
  return std::make_shared<MockBackend>(std::move(exact), std::move(rules), std::move(fallback));
}

ChatResponse MockBackend::complete(const ChatRequest& req) {
  const std::string digest = request_digest(req);
  ChatResponse resp;
  resp.correlation_id = next_id_++;
  if (auto it = exact_.find(digest); it != exact_.end()) {
    resp.text = it->second;
    return resp;
  }
  std::string system, last;
  for (const auto& m : req.messages) {
    if (m.role == "system") system += m.text + "\n";
  }
  last = req.messages.back().text;
  for (const auto& r : rules_) {
    auto all_in = [](const std::vector<std::string>& needles, const std::string& hay) {
      return std::all_of(needles.begin(), needles.end(),
                         [&](const std::string& n) { return contains_ci(hay, n); });
    };
    if (!all_in(r.system_contains, system)) continue;
    if (!all_in(r.last_contains_all, last)) continue;
    if (!r.last_contains_any.empty() &&
        std::none_of(r.last_contains_any.begin(), r.last_contains_any.end(),
                     [&](const std::string& n) { return contains_ci(last, n); }))
      continue;
    resp.text = r.replies[fnv1a(digest) % r.replies.size()];
    return resp;
  }
  if (fallback_) {
    resp.text = *fallback_;
    return resp;
  }
  throw TransportError("mock backend: no fixture reply for request " + digest);
}

// RateLimiter -------------------------------------------------------------------------

RateLimiter::RateLimiter(double rate, double burst)
    : rate_(rate), burst_(std::max(1.0, burst)), tokens_(burst_),
      last_(std::chrono::steady_clock::now()) {}

void RateLimiter::acquire() {
  if (rate_ <= 0.0) return;
  std::unique_lock lock(mu_);
  while (true) {
    const auto now = std::chrono::steady_clock::now();
    const double dt = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    tokens_ = std::min(burst_, tokens_ + dt * rate_);
    if (tokens_ >= 1.0) {
      tokens_ -= 1.0;
      return;
    }
    const double wait = (1.0 - tokens_) / rate_;
    lock.unlock();
    std::this_thread::sleep_for(std::chrono::duration<double>(wait));
    lock.lock();
  }
}

// HttpBackend ---------------------------------------------------------------------------

HttpBackend::HttpBackend(HttpBackendConfig cfg)
    : cfg_(std::move(cfg)),
      in_flight_(std::clamp(cfg_.max_in_flight, 1, 1024)),
      limiter_(cfg_.requests_per_second, std::max(1, cfg_.max_in_flight)) {
  if (cfg_.api_key) {
    key_ = *cfg_.api_key;
  } else if (const char* k = std::getenv(cfg_.api_key_env.c_str())) {
    key_ = k;
  }
  // Split "scheme://host[:port][/prefix]".
  const auto scheme_end = cfg_.base_url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("base_url needs a scheme: " + cfg_.base_url);
  const auto path_start = cfg_.base_url.find('/', scheme_end + 3);
  scheme_host_port_ = cfg_.base_url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : cfg_.base_url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (cfg_.base_url.rfind("https://", 0) == 0)
    throw ConfigError("built without TLS support; https base_url unavailable");
#endif
}

namespace {

enum class Outcome { Ok, Auth, RateLimited, Timeout, Transient, Fatal };

}  // namespace

ChatResponse HttpBackend::complete(const ChatRequest& req) {
  if (key_.empty())
    throw AuthError("no API key: set " + cfg_.api_key_env + " for the live backend");

  json msgs = json::array();
  for (const auto& m : req.messages) msgs.push_back({{"role", m.role}, {"content", m.text}});
  json body{{"model", req.model_id},
            {"messages", msgs},
            {"temperature", req.sampling.temperature},
            {"max_tokens", req.sampling.max_tokens}};
  if (req.sampling.seed) body["seed"] = *req.sampling.seed;
  const std::string payload = body.dump();
  const std::uint64_t id = next_id_++;

  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{in_flight_};

  std::string last_error;
  Outcome last = Outcome::Transient;
  auto delay = cfg_.retry.base_delay;
  for (int attempt = 1; attempt <= cfg_.retry.max_attempts; ++attempt) {
    limiter_.acquire();
    httplib::Client client(scheme_host_port_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(req.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(req.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers{{"Authorization", "Bearer " + key_},
                             {"X-Request-Id", std::to_string(id)}};
    auto res = client.Post(path_prefix_ + "/chat/completions", headers, payload,
                           "application/json");
    if (!res) {
      const auto err = res.error();
      last = (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout)
                 ? Outcome::Timeout
                 : Outcome::Transient;
      last_error = httplib::to_string(err);
    } else if (res->status == 200) {
      try {
        auto j = json::parse(res->body);
        ChatResponse out;
        out.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
        out.attempts = attempt;
        out.correlation_id = id;
        return out;
      } catch (const json::exception& e) {
        throw TransportError(std::string("malformed chat response: ") + e.what());
      }
    } else if (res->status == 401 || res->status == 403) {
      throw AuthError("authentication failed (HTTP " + std::to_string(res->status) + ")");
    } else if (res->status == 429) {
      last = Outcome::RateLimited;
      last_error = "HTTP 429";
    } else if (res->status >= 500) {
      last = Outcome::Transient;
      last_error = "HTTP " + std::to_string(res->status);
    } else {
      throw TransportError("chat request rejected (HTTP " + std::to_string(res->status) +
                           "): " + res->body);
    }
    if (attempt < cfg_.retry.max_attempts) {
      std::this_thread::sleep_for(delay);
      delay = std::min(delay * 2, cfg_.retry.max_delay);
    }
  }
  const std::string msg = "after " + std::to_string(cfg_.retry.max_attempts) +
                          " attempts: " + last_error;
  switch (last) {
    case Outcome::RateLimited: throw RateLimitError("rate limited " + msg);
    case Outcome::Timeout: throw TimeoutError("timed out " + msg);
    default: throw TransportError("transport failure " + msg);
  }
}

std::string chat(ChatBackend& backend, const ChatRequest& req, AuditTrail* audit) {
  if (req.messages.empty()) throw PreconditionError("chat: request has no messages");
  if (req.timeout.count() <= 0) throw PreconditionError("chat: timeout must be positive");
  try {
    ChatResponse r = backend.complete(req);
    // Mock ids depend on call interleaving across matches; the digest does not.
    if (audit)
      audit->add("chat",
                 backend.name() + " " + req.model_id +
                     (backend.deterministic() ? " digest=" + request_digest(req)
                                              : " id=" + std::to_string(r.correlation_id)),
                 r.attempts, true);
    return r.text;
  } catch (const LlmError& e) {
    if (audit) audit->add("chat", backend.name() + " " + req.model_id + ": " + e.what(), 0, false);
    throw;
  }
}

// Judge -----------------------------------------------------------------------------------

LabelParse parse_judge_label(std::string_view reply) {
  // Precedence order; the first label present decides.
  static const std::vector<std::pair<std::regex, Verdict>> labels = {
      {std::regex(R"(\bguilty\b)", std::regex::icase), Verdict::One},
      {std::regex(R"(\binnocent\b)", std::regex::icase), Verdict::Zero},
      {std::regex(R"(\b(non[- ]?conclusive|inconclusive)\b)", std::regex::icase), Verdict::Cont},
  };
  LabelParse out;
  const std::string text(reply);
  int found = 0;
  for (const auto& [re, v] : labels) {
    if (std::regex_search(text, re)) {
      if (!out.verdict) out.verdict = v;
      ++found;
    }
  }
  out.ambiguous = found > 1;
  return out;
}

ChatRequest judge_request(const JudgeConfig& cfg, const JudgePrompt& prompt, bool strict) {
  ChatRequest req;
  req.model_id = cfg.model_id;
  req.sampling.temperature = cfg.temperature;
  req.sampling.max_tokens = 64;
  const std::string& instruction =
      strict && !cfg.strict_instruction.empty() ? cfg.strict_instruction : prompt.instruction;
  req.messages.push_back({"system", instruction});
  req.messages.push_back(
      {"user", "Case details:\n" + prompt.case_context + "\n\nTranscript:\n" + prompt.transcript});
  return req;
}

Verdict llm_judge(ChatBackend& backend, const JudgeConfig& cfg, const JudgePrompt& prompt,
                  AuditTrail* audit) {
  if (prompt.transcript.empty())
    throw PreconditionError("llm_judge: transcript has no completed stage");
  for (bool strict : {false, true}) {
    const std::string reply = chat(backend, judge_request(cfg, prompt, strict), audit);
    LabelParse p = parse_judge_label(reply);
    if (p.verdict) {
      if (p.ambiguous && audit)
        audit->add("judge_ambiguous", "reply '" + reply + "' parsed as " +
                                          std::string(to_string(*p.verdict)));
      return *p.verdict;
    }
    if (audit) audit->add("judge_unparsed", "reply '" + reply + "'", 1, false);
  }
  throw JudgeParseError("judge reply could not be parsed after a re-ask");
}

LlmJudge::LlmJudge(std::shared_ptr<ChatBackend> backend, JudgeConfig cfg)
    : backend_(std::move(backend)), cfg_(std::move(cfg)) {
  if (!backend_) throw ConfigError("llm judge needs a backend");
}

Verdict LlmJudge::classify(const ConversationState& state, AuditTrail* audit) const {
  if (state.stages.empty()) throw PreconditionError("classify: state has no completed stage");
  JudgePrompt prompt{cfg_.case_context, serialize(state, SerializeStyle::SpeakerLabels),
                     cfg_.instruction};
  return llm_judge(*backend_, cfg_, prompt, audit);
}

// Players ---------------------------------------------------------------------------------

PlayerReply to_utterance(std::string_view text, std::size_t max_tokens) {
  PlayerReply out;
  for (const auto& raw : Utterance::parse(text).tokens) {
    std::string tok;
    std::copy_if(raw.begin(), raw.end(), std::back_inserter(tok),
                 [](char c) { return c != '#' && c != '@'; });
    if (tok.empty()) continue;
    if (out.utterance.tokens.size() == max_tokens) {
      out.truncated = true;
      break;
    }
    out.utterance.tokens.push_back(std::move(tok));
  }
  if (out.utterance.tokens.empty()) out.utterance.tokens.push_back("...");
  return out;
}

ChatRequest player_request(const LlmPlayerConfig& cfg, const MoveContext& ctx,
                           std::uint64_t seed) {
  ChatRequest req;
  req.model_id = cfg.model_id;
  req.sampling.temperature = cfg.temperature;
  req.sampling.max_tokens = cfg.max_tokens;
  req.sampling.seed = seed;
  std::string system = cfg.persona_prompt;
  if (!cfg.case_context.empty()) system += "\n\nCase details:\n" + cfg.case_context;
  req.messages.push_back({"system", system});
  // The mover's own lines are "assistant", the other side's are "user".
  const bool is_x = ctx.mover == Player::X;
  for (const auto& st : ctx.state.stages) {
    req.messages.push_back({is_x ? "assistant" : "user", st.x_move.text()});
    req.messages.push_back({is_x ? "user" : "assistant", st.y_move.text()});
  }
  if (ctx.pending_x) req.messages.push_back({"user", ctx.pending_x->text()});
  if (req.messages.back().role != "user")
    req.messages.push_back({"user", ctx.state.stages.empty() ? "Begin." : "Continue."});
  return req;
}

PlayerReply llm_player_move(ChatBackend& backend, const LlmPlayerConfig& cfg,
                            const MoveContext& ctx) {
  const std::uint64_t seed = ctx.rng.next() >> 1;
  const std::string text = chat(backend, player_request(cfg, ctx, seed), ctx.audit);
  PlayerReply reply = to_utterance(text, ctx.spec.max_utterance_length);
  if (reply.truncated && ctx.audit)
    ctx.audit->add("truncated", std::string(to_string(ctx.mover)) + " reply cut to " +
                                    std::to_string(ctx.spec.max_utterance_length) + " tokens");
  return reply;
}

}  // namespace verdict
