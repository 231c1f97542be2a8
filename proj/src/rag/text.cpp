#include "minescape/rag/text.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <set>

#include "minescape/error.hpp"
#include "minescape/util.hpp"

namespace minescape::rag {

using nlohmann::json;

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    while (i < n && is_space(text[i])) ++i;
    if (i >= n) break;
    std::size_t j = i;
    while (j < n && !is_space(text[j])) ++j;
    std::size_t a = i, b = j;
    while (a < b && is_punct(text[a])) {
      out.push_back({std::string(1, text[a]), a, a + 1});
      ++a;
    }
    std::size_t tail = b;
    while (tail > a && is_punct(text[tail - 1])) --tail;
    if (a < tail) out.push_back({std::string(text.substr(a, tail - a)), a, tail});
    for (std::size_t k = tail; k < b; ++k) out.push_back({std::string(1, text[k]), k, k + 1});
    i = j;
  }
  return out;
}

std::vector<std::string> token_strings(std::string_view text) {
  std::vector<std::string> out;
  for (auto& t : tokenize(text)) out.push_back(std::move(t.text));
  return out;
}

bool is_stop_word(std::string_view w) {
  static const std::set<std::string, std::less<>> stop = {
      "a",     "about", "above", "after", "again", "all",   "also",  "am",    "an",    "and",   "any",   "are",
      "as",    "at",    "be",    "been",  "being", "both",  "but",   "by",    "can",   "could", "did",   "do",
      "does",  "doing", "each",  "for",   "from",  "had",   "has",   "have",  "having", "he",   "her",   "here",
      "hers",  "him",   "his",   "how",   "i",     "if",    "in",    "into",  "is",    "it",    "its",   "itself",
      "me",    "more",  "most",  "my",    "no",    "nor",   "not",   "of",    "on",    "once",  "only",  "or",
      "other", "our",   "ours",  "out",   "over",  "own",   "same",  "she",   "should", "so",   "some",  "such",
      "than",  "that",  "the",   "their", "theirs", "them", "then",  "there", "these", "they",  "this",  "those",
      "through", "to",  "too",   "under", "until", "up",    "very",  "was",   "we",    "were",  "what",  "when",
      "where", "which", "while", "who",   "whom",  "why",   "will",  "with",  "would", "you",   "your",  "yours",
      "elaborate", "describe", "tell", "explain", "give", "examples", "example", "specific"};
  return stop.count(w) != 0;
}

std::vector<std::string> content_words(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& t : tokenize(text)) {
    if (t.text.size() == 1 && is_punct(t.text[0])) continue;
    std::string w = to_lower(t.text);
    if (!is_stop_word(w)) out.push_back(std::move(w));
  }
  return out;
}

json chunk_to_json(const Chunk& c) {
  return json{{"chunk_id", c.chunk_id},
              {"doc_id", c.doc_id},
              {"text", c.text},
              {"token_span", {c.token_begin, c.token_end}},
              {"metadata", c.metadata}};
}

Chunk chunk_from_json(const json& j) {
  Chunk c;
  c.chunk_id = j.at("chunk_id").get<std::string>();
  c.doc_id = j.at("doc_id").get<std::string>();
  c.text = j.at("text").get<std::string>();
  c.token_begin = j.at("token_span").at(0).get<std::size_t>();
  c.token_end = j.at("token_span").at(1).get<std::size_t>();
  c.metadata = j.value("metadata", json::object());
  return c;
}

namespace {

// Strength of the boundary after token i.
int boundary_level(std::string_view text, const std::vector<Token>& tokens, std::size_t i) {
  if (i + 1 >= tokens.size()) return 4;
  const std::string_view gap = text.substr(tokens[i].end, tokens[i + 1].begin - tokens[i].end);
  const std::size_t nl = gap.find('\n');
  if (nl != std::string_view::npos) {
    return gap.find('\n', nl + 1) != std::string_view::npos ? 3 : 2;
  }
  const std::string& t = tokens[i].text;
  if (t == "." || t == "!" || t == "?") return 1;
  return 0;
}

std::string chunk_id(const std::string& doc_id, std::size_t idx) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04zu", idx);
  return doc_id + "#" + buf;
}

}  // namespace

std::vector<Chunk> chunk_tokens(std::string_view text, const std::vector<Token>& tokens, const std::string& doc_id,
                                std::size_t chunk_size, std::size_t overlap, const json& metadata) {
  if (chunk_size == 0 || overlap >= chunk_size) {
    throw Error(ErrorCode::ConfigError, "chunking requires 0 <= overlap < chunk_size");
  }
  std::vector<Chunk> out;
  const std::size_t n = tokens.size();
  std::size_t s = 0;
  while (s < n) {
    std::size_t e;
    if (n - s <= chunk_size) {
      e = n;
    } else {
      const std::size_t lo = s + std::max(overlap + 1, chunk_size / 2);
      e = s + chunk_size;
      int best = boundary_level(text, tokens, e - 1);
      for (std::size_t cand = s + chunk_size; cand-- > lo;) {
        const int lvl = boundary_level(text, tokens, cand - 1);
        if (lvl > best) {
          best = lvl;
          e = cand;
        }
      }
    }
    Chunk c;
    c.chunk_id = chunk_id(doc_id, out.size());
    c.doc_id = doc_id;
    c.token_begin = s;
    c.token_end = e;
    c.text = std::string(text.substr(tokens[s].begin, tokens[e - 1].end - tokens[s].begin));
    c.metadata = metadata.is_object() ? metadata : json::object();
    out.push_back(std::move(c));
    if (e == n) break;
    s = e - overlap;
  }
  return out;
}

std::vector<Chunk> chunk_text(std::string_view text, const std::string& doc_id, std::size_t chunk_size,
                              std::size_t overlap, const json& metadata) {
  return chunk_tokens(text, tokenize(text), doc_id, chunk_size, overlap, metadata);
}

namespace {

std::string meta_string(const json& m, const char* key) {
  if (!m.contains(key)) return {};
  const auto& v = m[key];
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) return v.dump();
  return {};
}

}  // namespace

std::string metadata_prefix(const Chunk& chunk) {
  const json& m = chunk.metadata;
  const bool caption = meta_string(m, "kind") == "caption" || !meta_string(m, "mine_name").empty();
  if (caption) {
    for (const char* k : {"mine_name", "country", "lat", "lon"}) {
      if (!m.contains(k) || m[k].is_null() || (m[k].is_string() && m[k].get<std::string>().empty())) {
        throw Error(ErrorCode::MetadataMissing, "caption chunk " + chunk.chunk_id + " lacks '" + k + "'", k);
      }
    }
    if (!m["lat"].is_number() || !m["lon"].is_number()) {
      throw Error(ErrorCode::MetadataMissing, "caption chunk " + chunk.chunk_id + " has non-numeric coordinates", "lat");
    }
    char coords[64];
    std::snprintf(coords, sizeof coords, "%.2f,%.2f", m["lat"].get<double>(), m["lon"].get<double>());
    return "[" + meta_string(m, "mine_name") + " | " + meta_string(m, "country") + " | " + coords + "] ";
  }
  const std::string file = meta_string(m, "source_file");
  if (file.empty()) throw Error(ErrorCode::MetadataMissing, "chunk " + chunk.chunk_id + " lacks 'source_file'", "source_file");
  return "[" + file + "] ";
}

Chunk prepend_metadata(const Chunk& chunk) {
  const std::string prefix = metadata_prefix(chunk);
  Chunk out = chunk;
  if (out.text.rfind(prefix, 0) != 0) out.text = prefix + out.text;
  return out;
}

}  // namespace minescape::rag
