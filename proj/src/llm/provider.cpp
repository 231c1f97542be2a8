#include "minescape/llm/provider.hpp"

#include <algorithm>
#include <cstdlib>
#include <json.hpp>
#include <regex>
#include <sstream>
#include <thread>

#include "minescape/date.hpp"
#include "minescape/util.hpp"

namespace minescape::llm {

using nlohmann::json;

std::uint64_t request_digest(const ChatRequest& r) {
  std::uint64_t h = fnv1a64(r.purpose);
  for (const auto& m : r.messages) {
    h = fnv1a64(m.role, h);
    h = fnv1a64(std::string_view("\x1f", 1), h);
    h = fnv1a64(m.content, h);
    h = fnv1a64(std::string_view("\x1e", 1), h);
  }
  for (const auto& img : r.images) {
    h = fnv1a64(img.tag, h);
    h = fnv1a64(std::span<const std::uint8_t>(img.png), h);
  }
  std::ostringstream hp;
  hp << r.temperature << '|' << r.frequency_penalty << '|' << r.max_tokens;
  return fnv1a64(hp.str(), h);
}

RequestLog::RequestLog(fs::path path, std::vector<std::string> secrets)
    : path_(std::move(path)), secrets_(std::move(secrets)) {
  secrets_.erase(std::remove_if(secrets_.begin(), secrets_.end(), [](const std::string& s) { return s.size() < 4; }),
                 secrets_.end());
  if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
}

std::string RequestLog::redact(std::string text) const {
  for (const auto& s : secrets_) {
    for (std::size_t pos = text.find(s); pos != std::string::npos; pos = text.find(s, pos)) {
      text.replace(pos, s.size(), "[REDACTED]");
      pos += 10;
    }
  }
  return text;
}

void RequestLog::record(const std::string& provider, const ChatRequest& request, int attempt,
                        const std::string& outcome, const std::string& text) {
  json msgs = json::array();
  for (const auto& m : request.messages) msgs.push_back({{"role", m.role}, {"content", redact(m.content)}});
  json imgs = json::array();
  for (const auto& i : request.images) imgs.push_back({{"tag", i.tag}, {"bytes", i.png.size()}});
  const json line = {{"ts", utc_timestamp()},
                     {"provider", redact(provider)},
                     {"purpose", request.purpose},
                     {"digest", hex64(request_digest(request))},
                     {"attempt", attempt},
                     {"outcome", outcome},
                     {"temperature", request.temperature},
                     {"frequency_penalty", request.frequency_penalty},
                     {"max_tokens", request.max_tokens},
                     {"messages", msgs},
                     {"images", imgs},
                     {"response", redact(text)}};
  std::lock_guard lock(mutex_);
  append_line(path_, line.dump(-1, ' ', false, json::error_handler_t::replace));
}

CallResult call_with_retry(ChatProvider& provider, const ChatRequest& request, const CallPolicy& policy) {
  auto delay = policy.base_delay;
  for (int attempt = 0;; ++attempt) {
    try {
      std::string text = provider.complete(request);
      if (policy.log) policy.log->record(provider.name(), request, attempt, "ok", text);
      return {std::move(text), attempt};
    } catch (const Error& e) {
      if (policy.log) policy.log->record(provider.name(), request, attempt, std::string(to_string(e.code())), e.what());
      if (!e.retryable()) {
        if (e.code() == ErrorCode::ProviderRejected) throw;
        throw Error(ErrorCode::ProviderRejected, e.what(), provider.name());
      }
      if (attempt >= policy.max_retries) {
        throw Error(ErrorCode::ProviderUnavailable,
                    provider.name() + " unavailable after " + std::to_string(attempt + 1) + " attempts: " + e.what(),
                    provider.name(), attempt, true);
      }
    }
    if (policy.sleep) policy.sleep(delay);
    else std::this_thread::sleep_for(delay);
    delay *= 2;
  }
}

namespace {

const std::vector<std::string>& sentence_bank() {
  static const std::vector<std::string> bank = {
      "Terraced benches step down into the open pit, whose floor shows exposed rock and standing water.",
      "Low NDVI values outline the disturbed ground around the pit rim and the waste dumps.",
      "Spoil heaps form irregular mounds along one side of the excavation.",
      "A tailings facility with a pale, uniform surface lies downslope of the workings.",
      "Agricultural fields in regular parcels surround the lease and keep moderate vegetation values.",
      "Fragments of woodland persist between the fields, with healthier vegetation away from the mine.",
      "Haul roads appear as thin bright lines connecting the pit to the processing area.",
      "The UDM layer separates the mining footprint from the nearby settlements.",
      "Settlements cluster along the transport corridor outside the disturbed area.",
      "Bare soil and exposed overburden indicate active extraction rather than rehabilitation.",
      "Water bodies inside the pit suggest dewatering or groundwater inflow.",
      "Vegetation stress is visible as a ring of lower index values next to the dumps.",
      "The FMI layer highlights iron-bearing material on the waste rock surfaces.",
      "Rehabilitated slopes show planting rows with intermediate vegetation values.",
      "Drainage lines run from the workings toward the lower ground beyond the lease.",
      "Dust from the exposed surfaces is a likely pressure on the adjacent fields.",
  };
  return bank;
}

std::string find_line_value(const ChatRequest& r, const std::string& key) {
  for (auto it = r.messages.rbegin(); it != r.messages.rend(); ++it) {
    std::istringstream in(it->content);
    std::string line;
    while (std::getline(in, line)) {
      if (line.rfind(key, 0) == 0) return trim(line.substr(key.size()));
    }
  }
  return {};
}

}  // namespace

std::string MockProvider::complete(const ChatRequest& request) {
  ++calls_;
  std::uint64_t state = request_digest(request) ^ (seed_ * 0x9e3779b97f4a7c15ULL);
  splitmix64(state);
  const auto& bank = sentence_bank();
  std::vector<std::size_t> order(bank.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[splitmix64(state) % i]);
  const std::size_t n = 5 + splitmix64(state) % 3;
  std::string site = find_line_value(request, "Site:");
  std::string out = site.empty() ? std::string("This Sentinel-2 image shows an open-cast mining landscape.")
                                 : "This Sentinel-2 image shows the " + site + " mining site.";
  for (std::size_t i = 0; i < n; ++i) out += " " + bank[order[i]];
  return out;
}

std::string MockJudgeProvider::complete(const ChatRequest& request) {
  ++calls_;
  const std::string dim = find_line_value(request, "Dimension:");
  const std::string caption = find_line_value(request, "Caption:");
  int score;
  if (auto it = fixed_.find(dim); it != fixed_.end()) {
    score = it->second;
  } else {
    std::uint64_t state = fnv1a64(caption, fnv1a64(dim, seed_ + 1));
    const int lo = std::clamp(min_score_, 1, 5);
    score = lo + static_cast<int>(splitmix64(state) % static_cast<std::uint64_t>(6 - lo));
  }
  return json{{"dimension", dim}, {"score", score}, {"rationale", "Deterministic mock assessment."}}.dump();
}

ScriptedProvider::ScriptedProvider(std::vector<Step> steps, std::string name)
    : steps_(steps.begin(), steps.end()), name_(std::move(name)) {}

void ScriptedProvider::push(Step step) {
  std::lock_guard lock(mutex_);
  steps_.push_back(std::move(step));
}

std::string ScriptedProvider::complete(const ChatRequest& request) {
  std::unique_lock lock(mutex_);
  ++calls_;
  seen_.push_back(request);
  if (steps_.empty()) {
    if (fallback_) {
      auto fb = fallback_;
      lock.unlock();
      return fb(request);
    }
    throw Error(ErrorCode::ProviderRejected, "script exhausted", name_);
  }
  Step step = std::move(steps_.front());
  steps_.pop_front();
  if (auto* e = std::get_if<Error>(&step)) throw *e;
  return std::get<std::string>(step);
}

std::size_t ScriptedProvider::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

std::vector<ChatRequest> ScriptedProvider::requests() const {
  std::lock_guard lock(mutex_);
  return seen_;
}

std::string EchoAnswerProvider::complete(const ChatRequest& request) {
  ++calls_;
  const std::string& prompt = request.messages.empty() ? std::string() : request.messages.back().content;
  if (request.purpose == "summarize") {
    // First sentence of the section body.
    const auto body = prompt.find("\n\n");
    std::string t = body == std::string::npos ? prompt : prompt.substr(body + 2);
    const auto dot = t.find(". ");
    return trim(dot == std::string::npos ? t : t.substr(0, dot + 1));
  }
  if (request.purpose == "refine") {
    // Current query plus the candidate terms, the same result as the heuristic.
    static const std::regex cur(R"(Current query: ([^\n]*))"), terms(R"(Candidate terms:([^\n]*))");
    std::smatch a, b;
    std::string out = std::regex_search(prompt, a, cur) ? a[1].str() : std::string();
    if (std::regex_search(prompt, b, terms)) out += b[1].str();
    return out;
  }
  static const std::regex header(R"(^\[source: ([^\]]+)\]$)");
  std::vector<std::string> labels, firsts;
  std::istringstream in(prompt);
  std::string line;
  bool want_text = false;
  while (std::getline(in, line)) {
    std::smatch m;
    if (std::regex_match(line, m, header)) {
      if (std::find(labels.begin(), labels.end(), m[1].str()) == labels.end()) labels.push_back(m[1].str());
      want_text = true;
      continue;
    }
    if (want_text && !trim(line).empty()) {
      std::string t = trim(line);
      if (!t.empty() && t.front() == '[') {
        if (auto close = t.find("] "); close != std::string::npos) t = t.substr(close + 2);
      }
      const auto dot = t.find(". ");
      firsts.push_back(dot == std::string::npos ? t : t.substr(0, dot + 1));
      want_text = false;
    }
  }
  std::string out;
  for (const auto& f : firsts) out += (out.empty() ? "" : " ") + f;
  if (out.empty()) out = "The evidence does not address the question.";
  out += "\nSources: ";
  for (std::size_t i = 0; i < labels.size(); ++i) out += (i ? "; " : "") + labels[i];
  return out;
}

std::optional<HttpProviderConfig> http_config_from_env(const std::string& prefix) {
  auto get = [&](const char* name) -> std::string {
    const char* v = std::getenv((prefix + name).c_str());
    return v ? std::string(v) : std::string();
  };
  HttpProviderConfig c;
  c.url = get("PROVIDER_URL");
  if (c.url.empty()) return std::nullopt;
  c.key = get("PROVIDER_KEY");
  c.model = get("PROVIDER_MODEL");
  return c;
}

}  // namespace minescape::llm
