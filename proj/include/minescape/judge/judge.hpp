#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "minescape/caption/caption.hpp"
#include "minescape/llm/provider.hpp"

namespace minescape::judge {

struct Repaired {
  nlohmann::json value;
  std::vector<std::string> repairs;  // names of the steps that changed the text, in order
};

/// Repairs common model output defects, in order: fence_strip (markdown code
/// fence), object_extract (first balanced {...}, recorded only when text
/// outside it is dropped), trailing_comma (before } or ]), quote_normalize
/// (single-quoted strings to double-quoted), then a strict parse.
/// Throws NoObjectFound or ParseFailed.
Repaired repair_json(std::string_view text);

inline constexpr std::array<std::string_view, 5> kDimensionKeys = {
    "environment_focus", "terminology", "patterns", "constraints", "conciseness"};

struct RubricDimension {
  std::string key;
  std::string definition;
  std::map<int, std::string> descriptors;                // 1..5
  std::vector<std::pair<std::string, int>> exemplars;    // (excerpt, score)
};

struct Rubric {
  std::string name;
  int version = 1;
  std::vector<RubricDimension> dimensions;  // kDimensionKeys order
  const RubricDimension& at(std::string_view key) const;
};

/// Throws ConfigError unless every key in kDimensionKeys appears exactly once.
Rubric parse_rubric(std::string_view json_text);
const Rubric& default_rubric();
const std::string& judge_system_prompt();

struct GatePolicy {
  double mean_min = 4.0;
  int dim_min = 3;
};

/// accept iff mean(scores) >= mean_min and min(scores) >= dim_min; false for
/// an empty list.
bool gate(const std::vector<int>& scores, const GatePolicy& policy);

struct DimensionScore {
  int score = 0;
  std::string raw;                    // verbatim text of the accepted response
  std::vector<std::string> repairs;
  int calls = 0;
};

llm::ChatRequest judge_request(std::string_view caption, const RubricDimension& dim);

/// One provider call asking for {"dimension", "score", "rationale"}. An
/// unparseable response (or one without an integral score for this
/// dimension) is retried once, then raises JudgeFormatError; a score outside
/// [1, 5] raises JudgeRangeError without retry.
DimensionScore score_dimension(llm::ChatProvider& provider, std::string_view caption, const RubricDimension& dim,
                               const llm::CallPolicy& policy = {});

enum class Verdict { Accept, Reject };
std::string_view to_string(Verdict v);

struct JudgeScorecard {
  std::string caption_id;
  std::map<std::string, int> scores;
  std::map<std::string, std::string> raw_responses;
  std::map<std::string, std::string> failures;  // dimension -> error code and message
  Verdict verdict = Verdict::Reject;
  GatePolicy policy;
  std::string judge;
  std::string created_at;

  bool complete() const { return scores.size() == kDimensionKeys.size() && failures.empty(); }
  double mean() const;
};

struct EvaluateOptions {
  GatePolicy policy;
  llm::CallPolicy call_policy;
  bool parallel = false;  // run the five dimension calls concurrently
};

/// Scores all five dimensions with one call each (plus format retries) and
/// applies the gate. A dimension that fails leaves the scorecard incomplete
/// and the verdict reject, with the failure recorded.
JudgeScorecard evaluate(llm::ChatProvider& provider, const caption::CaptionCandidate& caption, const Rubric& rubric,
                        const EvaluateOptions& options = {});

std::string scorecard_to_json(const JudgeScorecard& s);
JudgeScorecard scorecard_from_json(std::string_view text);

}  // namespace minescape::judge
