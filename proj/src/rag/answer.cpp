#include "minescape/rag/answer.hpp"

#include <algorithm>
#include <sstream>

#include "minescape/error.hpp"
#include "minescape/util.hpp"

namespace minescape::rag {

using nlohmann::json;

const char* const kClosedDomainPrompt =
    "You answer questions about mining landscapes using only the context supplied in the user message. "
    "Do not use outside knowledge. If the context does not contain the answer, say that the evidence does "
    "not address the question. Refer to specific sites, places and documents from the context. "
    "Each context block starts with a header of the form [source: <label>]. End your reply with one line "
    "of the form \"Sources: <label>; <label>\" naming every block you used, with labels copied exactly.";

bool is_caption_chunk(const Chunk& chunk) {
  if (chunk.metadata.contains("kind")) return chunk.metadata["kind"] == "caption";
  return chunk.metadata.contains("mine_name");
}

namespace {

std::optional<int> page_of(const Chunk& c) {
  if (!c.metadata.contains("page") || c.metadata["page"].is_null()) return std::nullopt;
  return c.metadata["page"].get<int>();
}

DocumentSource document_source(const Chunk& c) {
  DocumentSource s;
  s.file = c.metadata.value("source_file", c.doc_id);
  s.page = page_of(c);
  s.section_id = c.metadata.value("parent_section_id", "");
  return s;
}

}  // namespace

std::string evidence_label(const Chunk& chunk) {
  if (is_caption_chunk(chunk)) return chunk.metadata.value("site_id", chunk.doc_id);
  return to_string(document_source(chunk));
}

std::string to_string(const DocumentSource& s) {
  if (s.page) return s.file + " > Page " + std::to_string(*s.page);
  return s.file;
}

std::string format_source_log(const std::vector<std::string>& caption_sources,
                              const std::vector<DocumentSource>& document_sources) {
  std::string out = "Caption Sources:\n";
  for (std::size_t i = 0; i < caption_sources.size(); ++i) out += (i ? ", " : "") + caption_sources[i];
  if (!caption_sources.empty()) out += "\n";
  out += "Document Sources:\n";
  for (const auto& d : document_sources) out += to_string(d) + "\n";
  return out;
}

json answer_to_json(const GroundedAnswer& a) {
  json docs = json::array();
  for (const auto& d : a.document_sources) {
    docs.push_back({{"file", d.file},
                    {"page", d.page ? json(*d.page) : json(nullptr)},
                    {"section_id", d.section_id},
                    {"label", to_string(d)}});
  }
  json evidence = json::array();
  for (const auto& h : a.evidence) {
    evidence.push_back({{"chunk", chunk_to_json(h.chunk)}, {"score", h.score}, {"label", evidence_label(h.chunk)}});
  }
  json lines = json::array();
  std::istringstream in(a.source_log);
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return {{"query", a.query},
          {"text", a.text},
          {"caption_sources", a.caption_sources},
          {"document_sources", docs},
          {"evidence", evidence},
          {"source_log", a.source_log},
          {"source_log_lines", lines}};
}

llm::ChatRequest answer_request(const std::string& query, const std::vector<Hit>& hits) {
  std::string context;
  for (const auto& h : hits) {
    context += "[source: " + evidence_label(h.chunk) + "]\n" + h.chunk.text + "\n\n";
  }
  llm::ChatRequest req;
  req.purpose = "answer";
  req.temperature = 0.0;
  req.frequency_penalty = 0.0;
  req.max_tokens = 600;
  req.messages.push_back({"system", kClosedDomainPrompt});
  req.messages.push_back({"user", "Question: " + query + "\n\nContext:\n\n" + context});
  return req;
}

std::optional<std::vector<std::string>> parse_citations(const std::string& reply) {
  std::vector<std::string> lines;
  std::istringstream in(reply);
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    const std::string t = trim(*it);
    if (t.size() < 8 || to_lower(t.substr(0, 8)) != "sources:") continue;
    std::vector<std::string> out;
    std::istringstream parts(t.substr(8));
    for (std::string p; std::getline(parts, p, ';');) {
      p = trim(p);
      if (!p.empty()) out.push_back(p);
    }
    return out;
  }
  return std::nullopt;
}

namespace {

std::string strip_sources_line(const std::string& reply) {
  std::vector<std::string> lines;
  std::istringstream in(reply);
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  for (std::size_t i = lines.size(); i-- > 0;) {
    const std::string t = trim(lines[i]);
    if (t.size() >= 8 && to_lower(t.substr(0, 8)) == "sources:") {
      lines.erase(lines.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  std::string body;
  for (const auto& l : lines) body += l + "\n";
  return trim(body);
}

}  // namespace

GroundedAnswer answer(llm::ChatProvider& provider, const std::string& query, const std::vector<Hit>& hits,
                      const AnswerOptions& options) {
  if (hits.empty()) throw Error(ErrorCode::InsufficientEvidence, "no evidence retrieved for the query", query);
  const auto reply = llm::call_with_retry(provider, answer_request(query, hits), options.call_policy).text;
  const auto cited = parse_citations(reply);
  if (!cited || cited->empty()) throw Error(ErrorCode::UngroundedCitation, "answer cites no source");

  std::vector<std::string> labels;
  labels.reserve(hits.size());
  for (const auto& h : hits) labels.push_back(evidence_label(h.chunk));
  for (const auto& c : *cited) {
    if (std::find(labels.begin(), labels.end(), c) == labels.end()) {
      throw Error(ErrorCode::UngroundedCitation, "answer cites a source outside the evidence", c);
    }
  }

  GroundedAnswer out;
  out.query = query;
  out.text = strip_sources_line(reply);
  out.evidence = hits;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    if (std::find(cited->begin(), cited->end(), labels[i]) == cited->end()) continue;
    if (is_caption_chunk(hits[i].chunk)) {
      if (std::find(out.caption_sources.begin(), out.caption_sources.end(), labels[i]) == out.caption_sources.end()) {
        out.caption_sources.push_back(labels[i]);
      }
    } else {
      out.document_sources.push_back(document_source(hits[i].chunk));
    }
  }
  out.source_log = format_source_log(out.caption_sources, out.document_sources);
  return out;
}

}  // namespace minescape::rag
