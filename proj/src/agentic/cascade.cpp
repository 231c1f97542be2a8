#include "minescape/agentic/cascade.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "minescape/util.hpp"

namespace minescape::agentic {

using nlohmann::json;

KnowledgeBase::KnowledgeBase(std::string embedder, std::size_t dimension)
    : captions("captions", embedder, dimension),
      summaries("summaries", embedder, dimension),
      chunks("chunks", embedder, dimension) {}

const Section* KnowledgeBase::section(const std::string& section_id) const {
  for (const auto& m : maps) {
    if (const auto* s = m.find(section_id)) return s;
  }
  return nullptr;
}

std::size_t KnowledgeBase::add_document(const DocumentHierarchy& h, rag::Embedder& embedder) {
  for (auto* store : {&summaries, &chunks}) {
    for (const auto& e : store->entries()) {
      if (e.chunk.doc_id == h.map.doc_id) store->remove(e.chunk.chunk_id);
    }
  }
  std::erase_if(maps, [&](const DocumentMap& m) { return m.doc_id == h.map.doc_id; });
  for (const auto& s : h.summaries) summaries.upsert(rag::embed_chunk(embedder, s));
  std::size_t added = 0;
  for (const auto& c : h.chunks) added += chunks.upsert(rag::embed_chunk(embedder, c)) ? 1 : 0;
  maps.push_back(h.map);
  return added;
}

void KnowledgeBase::save(const fs::path& dir) const {
  captions.save(dir / "captions");
  summaries.save(dir / "summaries");
  chunks.save(dir / "chunks");
  json j = json::array();
  for (const auto& m : maps) j.push_back(map_to_json(m));
  write_file_atomic(dir / "maps.json", j.dump(2));
}

bool KnowledgeBase::exists(const fs::path& dir) { return rag::VectorStore::exists(dir / "captions"); }

KnowledgeBase KnowledgeBase::load(const fs::path& dir) {
  auto caps = rag::VectorStore::load(dir / "captions");
  KnowledgeBase kb(caps.embedder(), caps.dimension());
  kb.captions = std::move(caps);
  if (rag::VectorStore::exists(dir / "summaries")) kb.summaries = rag::VectorStore::load(dir / "summaries");
  if (rag::VectorStore::exists(dir / "chunks")) kb.chunks = rag::VectorStore::load(dir / "chunks");
  for (const auto* s : {&kb.summaries, &kb.chunks}) {
    if (s->embedder() != kb.embedder() || s->dimension() != kb.dimension()) {
      throw Error(ErrorCode::EmbedderMismatch, "knowledge base stores were built by different embedders", dir.string());
    }
  }
  if (fs::exists(dir / "maps.json")) {
    try {
      for (const auto& m : json::parse(read_text_file(dir / "maps.json"))) kb.maps.push_back(map_from_json(m));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::DecodeError, std::string("unreadable document maps: ") + e.what(), dir.string());
    }
  }
  return kb;
}

namespace {

std::vector<double> embed_query(const std::string& query, const KnowledgeBase& kb, rag::Embedder& embedder) {
  if (embedder.name() != kb.embedder() || embedder.dimension() != kb.dimension()) {
    throw Error(ErrorCode::EmbedderMismatch, "knowledge base was built with " + kb.embedder() + ", query uses " + embedder.name());
  }
  return embedder.embed(query);
}

void drop_weak(std::vector<rag::Hit>& hits, double min_score) {
  std::erase_if(hits, [&](const rag::Hit& h) { return !(h.score > min_score); });
}

bool hit_order(const rag::Hit& a, const rag::Hit& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.chunk.chunk_id < b.chunk.chunk_id;
}

}  // namespace

EvidenceSet cascade_retrieve(const std::string& query, const KnowledgeBase& kb, rag::Embedder& embedder,
                             const CascadeParams& params) {
  if (kb.empty()) throw Error(ErrorCode::InsufficientEvidence, "the caption and document stores are empty", query);
  const auto q = embed_query(query, kb, embedder);
  EvidenceSet ev;

  std::set<std::string> routed;
  if (params.k_sections > 0 && kb.summaries.size() > 0) {
    for (const auto& h : kb.summaries.search_vector(q, params.k_sections)) {
      const std::string id = h.chunk.metadata.value("parent_section_id", "");
      if (routed.insert(id).second) ev.routed_sections.push_back(id);
    }
  }
  if (!routed.empty() && params.k_chunks > 0) {
    ev.document_hits = kb.chunks.search_vector(q, params.k_chunks, [&](const rag::Chunk& c) {
      return routed.count(c.metadata.value("parent_section_id", "")) > 0;
    });
    drop_weak(ev.document_hits, params.min_score);
  }
  if (params.k_captions > 0 && kb.captions.size() > 0) {
    ev.caption_hits = kb.captions.search_vector(q, params.k_captions);
    drop_weak(ev.caption_hits, params.min_score);
  }

  std::set<std::string> seen;
  for (const auto* list : {&ev.caption_hits, &ev.document_hits}) {
    for (const auto& h : *list) {
      if (seen.insert(h.chunk.chunk_id).second) ev.consolidated.push_back(h);
    }
  }
  std::sort(ev.consolidated.begin(), ev.consolidated.end(), hit_order);
  return ev;
}

std::vector<rag::Hit> flat_retrieve(const std::string& query, const KnowledgeBase& kb, rag::Embedder& embedder,
                                    std::size_t k) {
  if (kb.empty()) return {};
  const auto q = embed_query(query, kb, embedder);
  auto hits = kb.captions.search_vector(q, k);
  auto docs = kb.chunks.search_vector(q, k);
  hits.insert(hits.end(), docs.begin(), docs.end());
  std::sort(hits.begin(), hits.end(), hit_order);
  if (hits.size() > k) hits.resize(k);
  drop_weak(hits, 0.0);
  return hits;
}

double coverage(const std::string& question, const std::vector<rag::Hit>& hits) {
  const auto words = rag::content_words(question);
  const std::set<std::string> wanted(words.begin(), words.end());
  if (wanted.empty()) return 0.0;
  std::set<std::string> found;
  for (const auto& h : hits) {
    for (auto& w : rag::content_words(h.chunk.text)) {
      if (wanted.count(w)) found.insert(std::move(w));
    }
  }
  return static_cast<double>(found.size()) / static_cast<double>(wanted.size());
}

Sufficiency sufficiency(const std::string& question, const std::string& current_query, const EvidenceSet& evidence,
                        const SufficiencyParams& params) {
  Sufficiency s;
  s.refined_query = current_query;
  s.top_score = evidence.consolidated.empty() ? 0.0 : evidence.consolidated.front().score;
  s.coverage = coverage(question, evidence.consolidated);
  s.sufficient = !evidence.consolidated.empty() && s.top_score >= params.threshold && s.coverage >= params.min_coverage;
  if (s.sufficient) return s;

  const auto present = rag::content_words(current_query);
  const std::set<std::string> have(present.begin(), present.end());
  std::map<std::string, double> weight;
  for (const auto& h : evidence.consolidated) {
    auto words = rag::content_words(h.chunk.text);
    std::sort(words.begin(), words.end());
    words.erase(std::unique(words.begin(), words.end()), words.end());
    for (const auto& w : words) {
      if (!have.count(w)) weight[w] += h.score;
    }
  }
  std::vector<std::pair<std::string, double>> ranked(weight.begin(), weight.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  for (std::size_t i = 0; i < ranked.size() && i < params.refine_terms; ++i) {
    if (!(ranked[i].second > 0.0)) break;
    s.added_terms.push_back(ranked[i].first);
    s.refined_query += " " + ranked[i].first;
  }
  return s;
}

std::optional<std::string> provider_refinement(llm::ChatProvider& provider, const std::string& question,
                                               const std::string& current_query, const Sufficiency& verdict,
                                               const EvidenceSet& evidence) {
  std::string user = "Question: " + question + "\nCurrent query: " + current_query + "\nCandidate terms:";
  for (const auto& t : verdict.added_terms) user += " " + t;
  user += "\nEvidence excerpts:\n";
  for (std::size_t i = 0; i < evidence.consolidated.size() && i < 5; ++i) {
    std::string t = evidence.consolidated[i].chunk.text.substr(0, 200);
    std::replace(t.begin(), t.end(), '\n', ' ');
    user += "- " + t + "\n";
  }
  llm::ChatRequest req;
  req.purpose = "refine";
  req.messages = {{"system",
                   "You rewrite search queries for a retrieval system over mining-site captions and documents. "
                   "The current query did not retrieve enough evidence. Reply with one line holding the new query "
                   "and nothing else."},
                  {"user", user}};
  std::istringstream in(provider.complete(req));
  std::string line;
  while (std::getline(in, line) && trim(line).empty()) {
  }
  line = trim(line);
  if (line.rfind("Query:", 0) == 0) line = trim(line.substr(6));
  if (line.size() >= 2 && (line.front() == '"' || line.front() == '\'') && line.back() == line.front()) {
    line = trim(line.substr(1, line.size() - 2));
  }
  if (line.empty() || line == current_query) return std::nullopt;
  return line;
}

json trace_to_json(const CascadeTrace& t) {
  json it = json::array();
  for (const auto& s : t.iterations) {
    it.push_back({{"query", s.query},
                  {"routed_sections", s.routed_sections},
                  {"caption_hits", s.caption_hits},
                  {"document_hits", s.document_hits},
                  {"top_score", s.top_score},
                  {"coverage", s.coverage},
                  {"sufficient", s.sufficient},
                  {"refined_by", s.refined_by}});
  }
  return {{"iterations", it}, {"final_query", t.final_query}, {"threshold", t.threshold}, {"min_coverage", t.min_coverage}};
}

json agentic_to_json(const AgenticResult& r) {
  json j = {{"trace", trace_to_json(r.trace)}};
  if (r.answer) {
    j["answer"] = rag::answer_to_json(*r.answer);
    j["refused"] = false;
  } else {
    j["answer"] = nullptr;
    j["refused"] = true;
  }
  if (r.refusal) j["refusal"] = {{"code", to_string(r.refusal->code)}, {"message", r.refusal->message}};
  return j;
}

AgenticResult agentic_answer(llm::ChatProvider& provider, const std::string& query, const KnowledgeBase& kb,
                             rag::Embedder& embedder, const AgenticParams& params) {
  AgenticResult r;
  r.trace.threshold = params.sufficiency.threshold;
  r.trace.min_coverage = params.sufficiency.min_coverage;
  if (kb.empty()) {
    r.trace.final_query = query;
    r.refusal = Refusal{ErrorCode::InsufficientEvidence, "the caption and document stores are empty"};
    return r;
  }
  std::string current = query;
  bool sufficient = false;
  const int rounds = std::max(0, params.max_refinements) + 1;
  for (int i = 0; i < rounds; ++i) {
    r.evidence = cascade_retrieve(current, kb, embedder, params.cascade);
    const auto verdict = sufficiency(query, current, r.evidence, params.sufficiency);
    r.trace.iterations.push_back({current, r.evidence.routed_sections, r.evidence.caption_hits.size(),
                                  r.evidence.document_hits.size(), verdict.top_score, verdict.coverage,
                                  verdict.sufficient});
    r.trace.final_query = current;
    if (verdict.sufficient) {
      sufficient = true;
      break;
    }
    if (i + 1 == rounds) break;
    std::string next = verdict.refined_query;
    std::string by = "heuristic";
    if (params.refine == "provider") {
      try {
        if (auto q = provider_refinement(provider, query, current, verdict, r.evidence)) {
          next = *q;
          by = "provider";
        }
      } catch (const Error& e) {
        if (e.code() != ErrorCode::ProviderUnavailable) throw;
      }
    }
    if (next == current) break;  // nothing left to add; another round repeats this one
    r.trace.iterations.back().refined_by = by;
    current = next;
  }
  if (!sufficient) {
    r.refusal = Refusal{ErrorCode::InsufficientEvidence,
                        "the stores hold no sufficient evidence for this question after " +
                            std::to_string(r.trace.iterations.size()) + " retrieval round(s)"};
    return r;
  }
  try {
    auto a = rag::answer(provider, query, r.evidence.consolidated, params.answer);
    r.answer = std::move(a);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::UngroundedCitation && e.code() != ErrorCode::InsufficientEvidence) throw;
    r.refusal = Refusal{e.code(), e.what()};
  }
  return r;
}

}  // namespace minescape::agentic
