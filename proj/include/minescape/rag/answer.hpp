#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "minescape/llm/provider.hpp"
#include "minescape/rag/store.hpp"

namespace minescape::rag {

/// Citation label of a hit: the site id for caption chunks,
/// "<source_file> > Page <N>" for document chunks that carry a page, and
/// the bare source file otherwise.
std::string evidence_label(const Chunk& chunk);
bool is_caption_chunk(const Chunk& chunk);

struct DocumentSource {
  std::string file;
  std::optional<int> page;
  std::string section_id;

  bool operator==(const DocumentSource&) const = default;
};

std::string to_string(const DocumentSource& s);

struct GroundedAnswer {
  std::string query;
  std::string text;  // model answer without its "Sources:" line
  std::vector<std::string> caption_sources;
  std::vector<DocumentSource> document_sources;  // one per cited document hit
  std::vector<Hit> evidence;
  std::string source_log;
};

nlohmann::json answer_to_json(const GroundedAnswer& a);

/// "Caption Sources:" then the ids joined by ", ", then "Document Sources:"
/// and one "<file> > Page <N>" line per entry. The id line is left out when
/// there are no caption sources.
std::string format_source_log(const std::vector<std::string>& caption_sources,
                              const std::vector<DocumentSource>& document_sources);

extern const char* const kClosedDomainPrompt;

/// The request sent for `query` over `hits`. Context blocks are
/// "[source: <label>]" followed by the chunk text.
llm::ChatRequest answer_request(const std::string& query, const std::vector<Hit>& hits);

/// Labels named on the last "Sources:" line of a reply; nullopt when the
/// reply has no such line.
std::optional<std::vector<std::string>> parse_citations(const std::string& reply);

struct AnswerOptions {
  llm::CallPolicy call_policy{};
};

/// Closed-domain answer over `hits`. Throws InsufficientEvidence without
/// calling the provider when `hits` is empty, and UngroundedCitation when
/// the reply cites nothing or cites a label absent from the evidence.
GroundedAnswer answer(llm::ChatProvider& provider, const std::string& query, const std::vector<Hit>& hits,
                      const AnswerOptions& options = {});

}  // namespace minescape::rag
