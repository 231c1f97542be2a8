#include "minescape/judge/judge.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <thread>

#include "minescape/date.hpp"
#include "minescape/embedded_data.hpp"
#include "minescape/util.hpp"

namespace minescape::judge {

using nlohmann::json;

const RubricDimension& Rubric::at(std::string_view key) const {
  for (const auto& d : dimensions) {
    if (d.key == key) return d;
  }
  throw Error(ErrorCode::ConfigError, "rubric lacks dimension '" + std::string(key) + "'", std::string(key));
}

Rubric parse_rubric(std::string_view json_text) {
  Rubric r;
  std::map<std::string, RubricDimension> by_key;
  try {
    const json j = json::parse(json_text);
    r.name = j.value("name", "rubric");
    r.version = j.value("version", 1);
    for (const auto& d : j.at("dimensions")) {
      RubricDimension dim;
      dim.key = d.at("key").get<std::string>();
      dim.definition = d.at("definition").get<std::string>();
      if (d.contains("descriptors")) {
        for (const auto& [k, v] : d["descriptors"].items()) dim.descriptors[std::stoi(k)] = v.get<std::string>();
      }
      if (d.contains("exemplars")) {
        for (const auto& e : d["exemplars"]) dim.exemplars.emplace_back(e.at("excerpt"), e.at("score"));
      }
      if (std::find(kDimensionKeys.begin(), kDimensionKeys.end(), dim.key) == kDimensionKeys.end()) {
        throw Error(ErrorCode::ConfigError, "unknown rubric dimension '" + dim.key + "'", dim.key);
      }
      if (!by_key.emplace(dim.key, dim).second) {
        throw Error(ErrorCode::ConfigError, "rubric dimension '" + dim.key + "' appears twice", dim.key);
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("malformed rubric: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw Error(ErrorCode::ConfigError, "rubric descriptor keys must be integers");
  }
  for (auto k : kDimensionKeys) {
    auto it = by_key.find(std::string(k));
    if (it == by_key.end()) throw Error(ErrorCode::ConfigError, "rubric lacks dimension '" + std::string(k) + "'", std::string(k));
    r.dimensions.push_back(it->second);
  }
  return r;
}

const Rubric& default_rubric() {
  static const Rubric r = [] {
    const auto text = embedded_file("rubric_v1.json");
    if (!text) throw Error(ErrorCode::ConfigError, "missing embedded rubric");
    return parse_rubric(*text);
  }();
  return r;
}

const std::string& judge_system_prompt() {
  static const std::string s = [] {
    const auto text = embedded_file("prompts/judge_system_v1.txt");
    if (!text) throw Error(ErrorCode::ConfigError, "missing embedded judge prompt");
    return std::string(*text);
  }();
  return s;
}

bool gate(const std::vector<int>& scores, const GatePolicy& policy) {
  if (scores.empty()) return false;
  const double mean = std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
  const int lo = *std::min_element(scores.begin(), scores.end());
  return mean >= policy.mean_min && lo >= policy.dim_min;
}

llm::ChatRequest judge_request(std::string_view caption, const RubricDimension& dim) {
  llm::ChatRequest r;
  r.purpose = "judge:" + dim.key;
  r.temperature = 0.0;
  r.frequency_penalty = 0.0;
  r.max_tokens = 200;
  std::string user = "Dimension: " + dim.key + "\nDefinition: " + dim.definition + "\n";
  if (!dim.descriptors.empty()) {
    user += "Descriptors:\n";
    for (const auto& [score, text] : dim.descriptors) user += "  " + std::to_string(score) + ": " + text + "\n";
  }
  if (!dim.exemplars.empty()) {
    user += "Scored examples:\n";
    for (const auto& [excerpt, score] : dim.exemplars) user += "  \"" + excerpt + "\" -> " + std::to_string(score) + "\n";
  }
  std::string flat(caption);
  std::replace(flat.begin(), flat.end(), '\n', ' ');
  user += "Caption: " + flat + "\n";
  r.messages.push_back({"system", judge_system_prompt()});
  r.messages.push_back({"user", user});
  return r;
}

namespace {

// Extracts the score or throws JudgeFormatError / JudgeRangeError.
int read_score(const json& v, const std::string& key) {
  if (!v.is_object() || !v.contains("score")) throw Error(ErrorCode::JudgeFormatError, "judge object lacks 'score'", key);
  if (v.contains("dimension") && v["dimension"].is_string() && v["dimension"].get<std::string>() != key) {
    throw Error(ErrorCode::JudgeFormatError, "judge answered for a different dimension", key);
  }
  const json& s = v["score"];
  double value;
  if (s.is_number()) value = s.get<double>();
  else throw Error(ErrorCode::JudgeFormatError, "score is not a number", key);
  if (!std::isfinite(value) || value != std::floor(value)) throw Error(ErrorCode::JudgeFormatError, "score is not an integer", key);
  if (value < 1.0 || value > 5.0) {
    throw Error(ErrorCode::JudgeRangeError, "score " + s.dump() + " is outside [1, 5]", key,
                static_cast<std::int64_t>(std::clamp(value, -1e18, 1e18)));
  }
  return static_cast<int>(value);
}

}  // namespace

DimensionScore score_dimension(llm::ChatProvider& provider, std::string_view caption, const RubricDimension& dim,
                               const llm::CallPolicy& policy) {
  if (trim(caption).empty()) throw Error(ErrorCode::BadRequest, "caption is empty");
  const llm::ChatRequest request = judge_request(caption, dim);
  DimensionScore out;
  for (int attempt = 0;; ++attempt) {
    ++out.calls;
    const std::string raw = llm::call_with_retry(provider, request, policy).text;
    try {
      Repaired rep;
      try {
        rep = repair_json(raw);
      } catch (const Error& e) {
        throw Error(ErrorCode::JudgeFormatError, std::string("unparseable judge output: ") + e.what(), dim.key);
      }
      out.score = read_score(rep.value, dim.key);
      out.raw = raw;
      out.repairs = std::move(rep.repairs);
      return out;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::JudgeFormatError || attempt >= 1) throw;
    }
  }
}

std::string_view to_string(Verdict v) { return v == Verdict::Accept ? "accept" : "reject"; }

double JudgeScorecard::mean() const {
  if (scores.empty()) return 0.0;
  double s = 0.0;
  for (const auto& [k, v] : scores) s += v;
  return s / static_cast<double>(scores.size());
}

JudgeScorecard evaluate(llm::ChatProvider& provider, const caption::CaptionCandidate& caption, const Rubric& rubric,
                        const EvaluateOptions& options) {
  JudgeScorecard card;
  card.caption_id = caption.caption_id;
  card.policy = options.policy;
  card.judge = provider.name();

  struct Slot {
    std::optional<DimensionScore> score;
    std::string failure;
  };
  std::vector<Slot> slots(kDimensionKeys.size());
  auto run = [&](std::size_t i) {
    try {
      slots[i].score = score_dimension(provider, caption.text, rubric.at(kDimensionKeys[i]), options.call_policy);
    } catch (const Error& e) {
      slots[i].failure = std::string(to_string(e.code())) + ": " + e.what();
    }
  };
  if (options.parallel) {
    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < slots.size(); ++i) threads.emplace_back(run, i);
    for (auto& t : threads) t.join();
  } else {
    for (std::size_t i = 0; i < slots.size(); ++i) run(i);
  }

  std::vector<int> scores;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const std::string key(kDimensionKeys[i]);
    if (slots[i].score) {
      card.scores[key] = slots[i].score->score;
      card.raw_responses[key] = slots[i].score->raw;
      scores.push_back(slots[i].score->score);
    } else {
      card.failures[key] = slots[i].failure;
    }
  }
  card.verdict = card.complete() && gate(scores, options.policy) ? Verdict::Accept : Verdict::Reject;
  card.created_at = utc_timestamp();
  return card;
}

std::string scorecard_to_json(const JudgeScorecard& s) {
  return json{{"caption_id", s.caption_id},
              {"scores", s.scores},
              {"raw_responses", s.raw_responses},
              {"failures", s.failures},
              {"verdict", to_string(s.verdict)},
              {"complete", s.complete()},
              {"mean", s.mean()},
              {"policy", {{"mean_min", s.policy.mean_min}, {"dim_min", s.policy.dim_min}}},
              {"judge", s.judge},
              {"created_at", s.created_at}}
      .dump(2);
}

JudgeScorecard scorecard_from_json(std::string_view text) {
  JudgeScorecard s;
  try {
    const json j = json::parse(text);
    s.caption_id = j.at("caption_id").get<std::string>();
    s.scores = j.at("scores").get<std::map<std::string, int>>();
    s.raw_responses = j.value("raw_responses", std::map<std::string, std::string>{});
    s.failures = j.value("failures", std::map<std::string, std::string>{});
    s.verdict = j.at("verdict").get<std::string>() == "accept" ? Verdict::Accept : Verdict::Reject;
    if (j.contains("policy")) {
      s.policy.mean_min = j["policy"].value("mean_min", s.policy.mean_min);
      s.policy.dim_min = j["policy"].value("dim_min", s.policy.dim_min);
    }
    s.judge = j.value("judge", "");
    s.created_at = j.value("created_at", "");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadRequest, std::string("malformed scorecard: ") + e.what());
  }
  return s;
}

}  // namespace minescape::judge
