#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "minescape/agentic/hierarchy.hpp"
#include "minescape/error.hpp"
#include "minescape/rag/answer.hpp"

namespace minescape::agentic {

/// The caption store plus the hierarchical document index: section
/// summaries, atomic chunks and the document maps. On disk:
///   <dir>/captions/  <dir>/summaries/  <dir>/chunks/   vector stores
///   <dir>/maps.json                                    document maps
class KnowledgeBase {
 public:
  KnowledgeBase(std::string embedder, std::size_t dimension);

  rag::VectorStore captions;
  rag::VectorStore summaries;
  rag::VectorStore chunks;
  std::vector<DocumentMap> maps;

  const std::string& embedder() const noexcept { return captions.embedder(); }
  std::size_t dimension() const noexcept { return captions.dimension(); }
  bool empty() const { return captions.size() == 0 && chunks.size() == 0; }
  const Section* section(const std::string& section_id) const;

  /// Embeds and stores a hierarchy, replacing an earlier one with the same
  /// doc_id. Returns the number of new chunk ids.
  std::size_t add_document(const DocumentHierarchy& h, rag::Embedder& embedder);

  void save(const fs::path& dir) const;
  static KnowledgeBase load(const fs::path& dir);
  static bool exists(const fs::path& dir);
};

struct CascadeParams {
  std::size_t k_sections = 3;
  std::size_t k_chunks = 3;
  std::size_t k_captions = 3;
  /// Chunk and caption hits must score strictly above this.
  double min_score = 0.0;
};

struct EvidenceSet {
  std::vector<rag::Hit> caption_hits;
  std::vector<rag::Hit> document_hits;
  std::vector<rag::Hit> consolidated;  // deduplicated, score descending, ties by chunk_id
  std::vector<std::string> routed_sections;
};

/// Stage 1 ranks section summaries and keeps the top k_sections; stage 2
/// searches chunks of those sections only. The caption store is searched
/// flat. Throws InsufficientEvidence when both stores are empty.
EvidenceSet cascade_retrieve(const std::string& query, const KnowledgeBase& kb, rag::Embedder& embedder,
                             const CascadeParams& params = {});

/// Flat retrieval over captions and chunks together.
std::vector<rag::Hit> flat_retrieve(const std::string& query, const KnowledgeBase& kb, rag::Embedder& embedder,
                                    std::size_t k);

struct SufficiencyParams {
  double threshold = 0.15;    // minimum top consolidated score
  double min_coverage = 0.5;  // share of question content words found in evidence
  std::size_t refine_terms = 3;
};

struct Sufficiency {
  bool sufficient = false;
  double top_score = 0.0;
  double coverage = 0.0;
  std::string refined_query;  // equals the input query when nothing can be added
  std::vector<std::string> added_terms;
};

/// Content-word coverage of `question` by the texts in `hits`; 0 when the
/// question has no content words.
double coverage(const std::string& question, const std::vector<rag::Hit>& hits);

/// Sufficient iff the top score reaches the threshold and the coverage of
/// `question` reaches min_coverage. Otherwise the refined query appends the
/// best evidence terms absent from `current_query`: each term scores the
/// sum of the scores of the hits containing it; ties go alphabetically.
Sufficiency sufficiency(const std::string& question, const std::string& current_query, const EvidenceSet& evidence,
                        const SufficiencyParams& params = {});

struct TraceStep {
  std::string query;
  std::vector<std::string> routed_sections;
  std::size_t caption_hits = 0;
  std::size_t document_hits = 0;
  double top_score = 0.0;
  double coverage = 0.0;
  bool sufficient = false;
  std::string refined_by;  // "heuristic" or "provider"; empty on the last round
};

struct CascadeTrace {
  std::vector<TraceStep> iterations;
  std::string final_query;
  double threshold = 0.0;
  double min_coverage = 0.0;
};

nlohmann::json trace_to_json(const CascadeTrace& t);

struct AgenticParams {
  CascadeParams cascade{};
  SufficiencyParams sufficiency{};
  int max_refinements = 3;
  std::string refine = "heuristic";  // heuristic | provider
  rag::AnswerOptions answer{};
};

/// Asks `provider` for a rewritten query (purpose "refine"). The prompt holds
/// the question, the current query, the heuristic candidate terms and short
/// evidence excerpts. Returns the first line of the reply with quotes and a
/// "Query:" prefix stripped, or nullopt when that is empty or unchanged.
std::optional<std::string> provider_refinement(llm::ChatProvider& provider, const std::string& question,
                                               const std::string& current_query, const Sufficiency& verdict,
                                               const EvidenceSet& evidence);

struct Refusal {
  ErrorCode code = ErrorCode::InsufficientEvidence;
  std::string message;
};

struct AgenticResult {
  std::optional<rag::GroundedAnswer> answer;
  std::optional<Refusal> refusal;
  CascadeTrace trace;
  EvidenceSet evidence;
};

nlohmann::json agentic_to_json(const AgenticResult& r);

/// Retrieve, check, refine; at most max_refinements + 1 rounds. The answer
/// is produced only from sufficient evidence; otherwise the result carries a
/// refusal and the trace, and the provider is not called. A reply citing
/// outside the evidence is also returned as a refusal. With refine =
/// "provider" the provider rewrites insufficient queries; a failed or empty
/// rewrite falls back to the heuristic one.
AgenticResult agentic_answer(llm::ChatProvider& provider, const std::string& query, const KnowledgeBase& kb,
                             rag::Embedder& embedder, const AgenticParams& params = {});

}  // namespace minescape::agentic
