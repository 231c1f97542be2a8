#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "minescape/llm/provider.hpp"
#include "minescape/raster/render.hpp"
#include "minescape/sites/site.hpp"

namespace minescape::caption {

/// Section names every caption template must define.
inline constexpr std::array<std::string_view, 7> kRequiredSections = {
    "index_semantics", "settlement_focus", "environment_focus", "landscape_signatures",
    "caption_template", "output_format",   "constraints"};

/// Marker substrings the assembled system prompt must contain, one per
/// required section.
inline constexpr std::array<std::string_view, 7> kSectionMarkers = {
    "[INDEX SEMANTICS]",   "[SETTLEMENT FOCUS]", "[ENVIRONMENT FOCUS]", "[LANDSCAPE SIGNATURES]",
    "[CAPTION TEMPLATE]",  "[OUTPUT FORMAT]",    "[CONSTRAINTS]"};

inline constexpr std::string_view kContextOpen = "=== SITE CONTEXT ===";
inline constexpr std::string_view kContextClose = "=== END CONTEXT ===";
inline constexpr std::string_view kNoSpeculation =
    "Public information on this site is limited. Do not speculate about history, ownership or disputes "
    "beyond what the context states.";

/// Versioned template text split at "@@section <name>" lines. Lines before
/// the first marker and lines starting with '#' outside sections are
/// comments.
struct PromptTemplate {
  std::string name;
  std::map<std::string, std::string> sections;
};

/// Throws TemplateError when a required section is missing or empty.
PromptTemplate parse_template(std::string_view text, std::string name = "caption_system_v1");
const PromptTemplate& default_template();

struct Exemplar {
  std::string question;
  std::string answer;
  bool operator==(const Exemplar&) const = default;
};

std::vector<Exemplar> parse_exemplars(std::string_view json_text);
const std::vector<Exemplar>& default_exemplars();

struct GenerationHyperparams {
  double temperature = 0.2;
  double frequency_penalty = 0.3;
  int max_tokens = 400;
  std::vector<std::string> banned_phrases = {"many", "various", "numerous", "a lot of", "huge",
                                             "massive", "enormous", "truly"};
  void validate() const;  // ConfigError unless 0 <= temperature <= 2 and 1 <= max_tokens <= 32768
  bool operator==(const GenerationHyperparams&) const = default;
};

enum class PayloadArm { RgbOnly, RgbNdviUdm };

struct CaptionConfig {
  bool multi_shot = true;
  std::size_t word_cap = 250;
  PayloadArm arm = PayloadArm::RgbNdviUdm;
  GenerationHyperparams hyperparams;
};

struct PromptBundle {
  std::string system_prompt;
  std::vector<Exemplar> exemplars;
  std::string context;
  std::string query;
  std::vector<std::string> constraints_digest;

  bool operator==(const PromptBundle&) const = default;
};

/// Assembles the system prompt from the template sections (in the order of
/// kRequiredSections, after an optional "role" section), the dossier under a
/// delimited context header and the query. Empty dossier segments lose their
/// header; a sparse dossier adds the no-speculation directive. With
/// multi-shot on the exemplar count must be 5..10 (TemplateError otherwise).
PromptBundle build_prompt(const sites::SiteRecord& site, const sites::Dossier& dossier,
                          const std::vector<Exemplar>& exemplars, const CaptionConfig& config,
                          const PromptTemplate& tmpl = default_template());

std::string bundle_to_json(const PromptBundle& b);
PromptBundle bundle_from_json(std::string_view text);

struct PayloadImage {
  std::string role;  // rgb, ndvi, udm
  raster::RenderImage image;
};

struct ImagePayload {
  std::vector<PayloadImage> images;
  std::vector<std::string> roles() const;
};

/// Arm A sends {rgb}; arm B sends {rgb, ndvi, udm}. Throws PayloadInvalid
/// when a required render is missing.
ImagePayload make_payload(PayloadArm arm, const raster::RenderImage& rgb, const raster::RenderImage* ndvi,
                          const raster::RenderImage* udm);
/// 1..3 non-empty images with distinct roles, else PayloadInvalid.
void validate_payload(const ImagePayload& payload);

struct CaptionCandidate {
  std::string caption_id;
  std::string site_id;
  std::string text;
  std::string provider;
  GenerationHyperparams hyperparams;
  std::vector<std::string> payload_roles;
  std::string created_at;
  int retries = 0;
  bool regenerated = false;
  std::vector<std::string> banned_hits;  // phrases still present after regeneration
};

std::string candidate_to_json(const CaptionCandidate& c);
CaptionCandidate candidate_from_json(std::string_view text);

/// Banned phrases present in `text` (case-insensitive, whole words).
std::vector<std::string> banned_phrases_in(std::string_view text, const std::vector<std::string>& phrases);

/// The provider request for a bundle and payload.
llm::ChatRequest make_request(const PromptBundle& bundle, const ImagePayload& payload,
                              const GenerationHyperparams& hp);

struct GenerateOptions {
  std::string site_id;
  std::size_t word_cap = 250;
  llm::CallPolicy policy;
};

/// Validates the payload before any call, calls the provider with retries,
/// and checks the text. Empty text raises EmptyGeneration. A banned phrase or
/// a text over the word cap triggers one regeneration with a corrective
/// instruction; a second over-cap text raises CaptionTooLong.
CaptionCandidate generate_caption(llm::ChatProvider& provider, const PromptBundle& bundle,
                                  const ImagePayload& payload, const GenerationHyperparams& hp,
                                  const GenerateOptions& options);

struct CaptionJob {
  PromptBundle bundle;
  ImagePayload payload;
  GenerationHyperparams hyperparams;
  GenerateOptions options;
};

using CaptionOutcome = std::variant<CaptionCandidate, Error>;

/// Runs jobs with at most `concurrency` provider requests in flight.
/// Results keep the job order.
std::vector<CaptionOutcome> generate_batch(llm::ChatProvider& provider, const std::vector<CaptionJob>& jobs,
                                           std::size_t concurrency = 4);

}  // namespace minescape::caption
