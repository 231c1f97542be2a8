#include "minescape/agentic/hierarchy.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <regex>

#include "minescape/error.hpp"
#include "minescape/util.hpp"

namespace minescape::agentic {

using nlohmann::json;

const Section* DocumentMap::find(const std::string& id) const {
  for (const auto& s : sections) {
    if (s.section_id == id) return &s;
  }
  return nullptr;
}

json map_to_json(const DocumentMap& m) {
  json sections = json::array();
  for (const auto& s : m.sections) {
    sections.push_back({{"section_id", s.section_id},
                        {"header", s.header},
                        {"page_range", {s.page_first, s.page_last}},
                        {"token_span", {s.token_begin, s.token_end}}});
  }
  return {{"doc_id", m.doc_id},       {"title", m.title}, {"source_file", m.source_file},
          {"metadata", m.metadata},   {"flat", m.flat},   {"page_count", m.page_count},
          {"sections", sections}};
}

DocumentMap map_from_json(const json& j) {
  DocumentMap m;
  m.doc_id = j.at("doc_id").get<std::string>();
  m.title = j.value("title", "");
  m.source_file = j.value("source_file", "");
  m.metadata = j.value("metadata", json::object());
  m.flat = j.value("flat", false);
  m.page_count = j.value("page_count", 1);
  for (const auto& s : j.at("sections")) {
    Section sec;
    sec.section_id = s.at("section_id").get<std::string>();
    sec.header = s.value("header", "");
    sec.page_first = s.at("page_range").at(0).get<int>();
    sec.page_last = s.at("page_range").at(1).get<int>();
    sec.token_begin = s.at("token_span").at(0).get<std::size_t>();
    sec.token_end = s.at("token_span").at(1).get<std::size_t>();
    m.sections.push_back(std::move(sec));
  }
  return m;
}

std::vector<TocEntry> parse_toc(const json& j) {
  const json& entries = j.is_object() ? j.at("sections") : j;
  std::vector<TocEntry> out;
  for (const auto& e : entries) {
    TocEntry t;
    t.header = e.value("header", e.value("title", ""));
    t.page = e.at("page").get<int>();
    if (t.page < 1) throw Error(ErrorCode::ConfigError, "contents page numbers start at 1", t.header);
    out.push_back(std::move(t));
  }
  return out;
}

int PagedText::page_at(std::size_t offset) const {
  auto it = std::upper_bound(page_starts.begin(), page_starts.end(), offset,
                             [](std::size_t o, const auto& ps) { return o < ps.first; });
  return it == page_starts.begin() ? 1 : std::prev(it)->second;
}

PagedText strip_page_markers(std::string_view raw) {
  static const std::regex marker(R"(\[\[page:(\d+)\]\])");
  PagedText out;
  const std::string s(raw);
  std::size_t last = 0;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), marker); it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    out.text.append(s, last, static_cast<std::size_t>(m.position()) - last);
    out.page_starts.emplace_back(out.text.size(), std::stoi(m[1].str()));
    last = static_cast<std::size_t>(m.position() + m.length());
  }
  out.text.append(s, last, std::string::npos);
  return out;
}

namespace {

struct Boundary {
  std::size_t offset;
  std::string header;
};

std::vector<Boundary> heading_boundaries(const std::string& text) {
  static const std::regex heading(R"(^ {0,3}#{1,6}[ \t]+(\S.*)$)");
  std::vector<Boundary> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    const std::string line = text.substr(pos, nl - pos);
    std::smatch m;
    if (std::regex_match(line, m, heading)) out.push_back({pos, trim(m[1].str())});
    pos = nl + 1;
  }
  return out;
}

// The page holding most of the chunk's tokens; the earlier page on a tie.
int majority_page(const PagedText& paged, const std::vector<rag::Token>& tokens, std::size_t b, std::size_t e) {
  std::map<int, std::size_t> count;
  for (std::size_t i = b; i < e; ++i) count[paged.page_at(tokens[i].begin)]++;
  int best = paged.page_at(tokens[b].begin);
  std::size_t n = 0;
  for (const auto& [page, k] : count) {
    if (k > n) {
      best = page;
      n = k;
    }
  }
  return best;
}

std::string section_id(const std::string& doc_id, std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "/s%03zu", i + 1);
  return doc_id + buf;
}

}  // namespace

DocumentHierarchy build_hierarchy(std::string_view raw, const std::string& doc_id, const std::string& source_file,
                                  const HierarchyOptions& options, const json& metadata) {
  if (options.summary_budget == 0) throw Error(ErrorCode::ConfigError, "summary budget must be positive");
  const PagedText paged = strip_page_markers(raw);
  const std::string& text = paged.text;
  const auto tokens = rag::tokenize(text);
  if (tokens.empty()) throw Error(ErrorCode::BadRequest, "document has no text", doc_id);

  std::vector<Boundary> bounds;
  if (options.toc && !options.toc->empty()) {
    for (const auto& e : *options.toc) {
      auto it = std::find_if(paged.page_starts.begin(), paged.page_starts.end(),
                             [&](const auto& ps) { return ps.second == e.page; });
      if (it == paged.page_starts.end()) {
        throw Error(ErrorCode::ConfigError, "contents entry points at a page without a marker", e.header);
      }
      bounds.push_back({it->first, e.header});
    }
    std::stable_sort(bounds.begin(), bounds.end(), [](const Boundary& a, const Boundary& b) { return a.offset < b.offset; });
  } else {
    bounds = heading_boundaries(text);
  }

  DocumentHierarchy h;
  DocumentMap& map = h.map;
  map.doc_id = doc_id;
  map.source_file = source_file;
  map.metadata = metadata.is_object() ? metadata : json::object();
  map.flat = bounds.empty();
  for (const auto& ps : paged.page_starts) map.page_count = std::max(map.page_count, ps.second);

  auto first_token_at = [&](std::size_t offset) {
    return static_cast<std::size_t>(
        std::lower_bound(tokens.begin(), tokens.end(), offset, [](const rag::Token& t, std::size_t o) { return t.begin < o; }) -
        tokens.begin());
  };

  std::vector<std::pair<std::size_t, std::string>> starts;  // (token index, header)
  if (map.flat) {
    starts.emplace_back(0, "");
  } else {
    const std::size_t first = first_token_at(bounds.front().offset);
    if (first > 0) starts.emplace_back(0, "Front matter");
    for (const auto& b : bounds) starts.emplace_back(first_token_at(b.offset), b.header);
  }

  map.title = map.metadata.value("title", "");
  if (map.title.empty() && !map.flat) {
    static const std::regex h1(R"(^ {0,3}#[ \t]+\S)");
    for (const auto& b : bounds) {
      const std::string line = text.substr(b.offset, text.find('\n', b.offset) - b.offset);
      if (options.toc || std::regex_search(line, h1)) {
        map.title = b.header;
        break;
      }
    }
  }
  if (map.title.empty()) map.title = doc_id;

  for (std::size_t i = 0; i < starts.size(); ++i) {
    const std::size_t b = starts[i].first;
    const std::size_t e = i + 1 < starts.size() ? starts[i + 1].first : tokens.size();
    if (b >= e) continue;
    Section s;
    s.section_id = section_id(doc_id, map.sections.size());
    s.header = starts[i].second.empty() ? map.title : starts[i].second;
    s.token_begin = b;
    s.token_end = e;
    s.page_first = paged.page_at(tokens[b].begin);
    s.page_last = paged.page_at(tokens[e - 1].begin);

    json base = map.metadata;
    base.erase("title");
    base["kind"] = "document";
    base["source_file"] = source_file;
    base["parent_section_id"] = s.section_id;
    base["section_header"] = s.header;

    const std::size_t se = std::min(e, b + options.summary_budget);
    rag::Chunk summary;
    summary.chunk_id = s.section_id + ":summary";
    summary.doc_id = doc_id;
    summary.token_begin = b;
    summary.token_end = se;
    summary.text = text.substr(tokens[b].begin, tokens[se - 1].end - tokens[b].begin);
    summary.metadata = base;
    summary.metadata["kind"] = "summary";
    summary.metadata["summary_mode"] = "extractive";
    if (options.summarizer) {
      const std::size_t cap = std::min(e, b + 2000);
      llm::ChatRequest req;
      req.purpose = "summarize";
      req.messages = {{"system", "Summarize the document section below in at most " +
                                     std::to_string(options.summary_budget) +
                                     " words. Keep place names, company names and dates. Reply with the summary only."},
                      {"user", "Section: " + s.header + "\n\n" +
                                   text.substr(tokens[b].begin, tokens[cap - 1].end - tokens[b].begin)}};
      const std::string reply = trim(options.summarizer->complete(req));
      const auto rt = rag::tokenize(reply);
      if (!rt.empty()) {
        const std::size_t n = std::min(rt.size(), options.summary_budget);
        summary.text = reply.substr(0, rt[n - 1].end);
        summary.token_end = e;
        summary.metadata["summary_mode"] = "abstractive";
      }
    }
    summary.metadata["page"] = s.page_first;
    h.summaries.push_back(rag::prepend_metadata(summary));

    const std::vector<rag::Token> slice(tokens.begin() + static_cast<std::ptrdiff_t>(b),
                                        tokens.begin() + static_cast<std::ptrdiff_t>(e));
    for (auto& c : rag::chunk_tokens(text, slice, s.section_id, options.chunk_size, options.overlap, base)) {
      c.doc_id = doc_id;
      c.token_begin += b;
      c.token_end += b;
      c.metadata["page"] = majority_page(paged, tokens, c.token_begin, c.token_end);
      h.chunks.push_back(rag::prepend_metadata(c));
    }
    map.sections.push_back(std::move(s));
  }
  return h;
}

}  // namespace minescape::agentic
