#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "minescape/llm/provider.hpp"
#include "minescape/rag/store.hpp"

namespace minescape::agentic {

struct Section {
  std::string section_id;  // "<doc_id>/s001"
  std::string header;
  int page_first = 1;
  int page_last = 1;
  std::size_t token_begin = 0;  // span in the document's tokens (markers removed)
  std::size_t token_end = 0;
};

struct DocumentMap {
  std::string doc_id;
  std::string title;
  std::string source_file;
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<Section> sections;
  bool flat = false;  // no headings or contents found; one synthetic section
  int page_count = 1;

  const Section* find(const std::string& section_id) const;
};

nlohmann::json map_to_json(const DocumentMap& m);
DocumentMap map_from_json(const nlohmann::json& j);

struct DocumentHierarchy {
  DocumentMap map;
  std::vector<rag::Chunk> summaries;  // one per section, chunk_id "<section_id>:summary"
  std::vector<rag::Chunk> chunks;     // metadata carries parent_section_id and page
};

/// One table-of-contents entry: a section starting at the top of `page`.
struct TocEntry {
  std::string header;
  int page = 1;
};

std::vector<TocEntry> parse_toc(const nlohmann::json& j);

struct HierarchyOptions {
  std::size_t summary_budget = 60;
  std::size_t chunk_size = rag::kDefaultChunkSize;
  std::size_t overlap = rag::kDefaultOverlap;
  std::optional<std::vector<TocEntry>> toc;  // sidecar; used instead of headings
  // Abstractive summaries from this provider (purpose "summarize"), cut to
  // summary_budget tokens. Null, or an empty reply, keeps the extractive
  // summary: the leading summary_budget tokens of the section.
  llm::ChatProvider* summarizer = nullptr;
};

/// Page markers have the form "[[page:N]]" and mark the start of page N.
/// They are removed before tokenizing; text ahead of the first marker is
/// on page 1.
struct PagedText {
  std::string text;
  std::vector<std::pair<std::size_t, int>> page_starts;  // (byte offset in text, page)
  int page_at(std::size_t offset) const;
};

PagedText strip_page_markers(std::string_view raw);

/// Splits `raw` into sections at "#" heading lines (or at the pages named by
/// `options.toc`), then summarizes and chunks each section. Text before the
/// first heading becomes a front-matter section. Without headings or
/// contents the whole document is one section and map.flat is set. Chunks
/// carry the metadata prefix and the page holding most of their tokens.
/// Throws ConfigError for a contents entry whose page has no marker and
/// BadRequest for an empty document.
DocumentHierarchy build_hierarchy(std::string_view raw, const std::string& doc_id, const std::string& source_file,
                                  const HierarchyOptions& options = {},
                                  const nlohmann::json& metadata = nlohmann::json::object());

}  // namespace minescape::agentic
