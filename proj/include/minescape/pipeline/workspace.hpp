#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "minescape/agentic/cascade.hpp"
#include "minescape/llm/provider.hpp"
#include "minescape/pipeline/config.hpp"
#include "minescape/sites/catalog.hpp"
#include "minescape/sites/site.hpp"

namespace minescape::pipeline {

enum class Stage { Catalog, Quality, Indices, Udm, Caption, Judge };
inline constexpr std::array<Stage, 6> kStages = {Stage::Catalog, Stage::Quality, Stage::Indices,
                                                 Stage::Udm,     Stage::Caption, Stage::Judge};
std::string_view to_string(Stage s);
Stage stage_from_string(std::string_view s);

/// External collaborators. Anything left empty is built from the config
/// and the environment by default_services().
struct Services {
  std::shared_ptr<sites::CatalogProvider> catalog;
  std::shared_ptr<llm::ChatProvider> caption_provider;
  std::shared_ptr<llm::ChatProvider> judge_provider;
  std::shared_ptr<llm::ChatProvider> answer_provider;
  std::shared_ptr<rag::Embedder> embedder;
  llm::Sleeper sleep;  // backoff sleeper for providers and the catalog
};

/// Fills the empty members of `s`. Mock and hash components need no
/// network; "http" settings read credentials from the environment and raise
/// ConfigError when they are missing.
Services default_services(const Config& config, Services s = {});

struct StageRecord {
  Stage stage = Stage::Catalog;
  std::string status;  // done | cached | skipped | failed
  std::string key;
  std::string started_at;
  std::string finished_at;
  nlohmann::json outputs = nlohmann::json::object();
  std::optional<std::string> error_code;
  std::string error_message;
};

struct PipelineRun {
  std::string run_id;
  std::string site_id;
  std::string config_hash;
  std::string state;  // running | partial | complete | failed
  std::vector<StageRecord> stages;
  std::string chosen_scene;
  std::string caption_id;
  std::string verdict;
  std::string created_at;
  std::string updated_at;

  const StageRecord* stage(Stage s) const;
};

nlohmann::json run_to_json(const PipelineRun& r);
PipelineRun run_from_json(const nlohmann::json& j);

struct ReviewDecision {
  std::string caption_id;
  std::string reviewer;
  std::string decision;  // accept | reject
  std::string note;
  std::string decided_at;
};

nlohmann::json review_to_json(const ReviewDecision& r);
ReviewDecision review_from_json(const nlohmann::json& j);

struct SyncCounts {
  std::size_t added = 0;
  std::size_t updated = 0;
  std::size_t skipped = 0;
  std::size_t removed = 0;
};

struct SyncSummary {
  SyncCounts captions;
  SyncCounts documents;  // atomic document chunks
  SyncCounts summaries;  // section summaries
  std::size_t added = 0;    // captions + document chunks
  std::size_t updated = 0;
  std::size_t skipped = 0;
  bool written = false;
  std::string generation;
};

nlohmann::json sync_to_json(const SyncSummary& s);

/// A directory holding one pipeline deployment:
///   config.ini
///   registry/sites/<id>.json, registry/dossiers/<id>.json
///   catalog/                       recorded scene catalog (fixtures)
///   documents/<name>.txt           pre-extracted long-form documents, with
///                                  optional <name>.meta.json and <name>.toc.json
///   sites/<id>/...                 per-site artifacts and stage records
///   runs/<run_id>.json, runs/journal.jsonl
///   rag/CURRENT, rag/kb-<n>/       knowledge base generations
/// Every artifact is written with write-then-rename. A stage's record is
/// written after its outputs, so a stage interrupted at any point is simply
/// recomputed on the next run.
class Workspace {
 public:
  Workspace(Config config, Services services);
  static Workspace open(const fs::path& root, Services services = {});

  const Config& config() const noexcept { return config_; }
  const fs::path& root() const noexcept { return config_.root; }
  sites::Registry& registry() noexcept { return registry_; }
  const Services& services() const noexcept { return services_; }
  fs::path site_dir(std::string_view site_id) const;

  /// Runs the stages in order up to and including `until`, reusing any
  /// stage whose inputs are unchanged. A stage error is recorded on the run,
  /// stops the remaining stages and is rethrown.
  PipelineRun run_site(const std::string& site_id, Stage until = Stage::Judge);
  std::string run_id_for(const std::string& site_id) const;
  std::optional<PipelineRun> load_run(const std::string& run_id) const;
  std::optional<PipelineRun> latest_run(const std::string& site_id) const;

  /// Stores scribbles after checking them against the chosen scene and
  /// moves the site to annotated. Returns rasterization counts.
  nlohmann::json save_scribbles(const std::string& site_id, std::string_view geojson);
  nlohmann::json train_udm(const std::string& site_id);
  nlohmann::json classify_udm(const std::string& site_id);
  /// Copies the trained model of `from_site` to `site_id`; models are
  /// per-scene by default and this shares one across scenes.
  nlohmann::json reuse_udm(const std::string& site_id, const std::string& from_site);

  /// PNG bytes for rgb, ndvi, ndbi, fmi or udm. Throws BadRequest for other
  /// layers and NotFound when the layer has not been produced yet.
  std::vector<std::uint8_t> render(const std::string& site_id, std::string_view layer) const;

  /// Caption, scorecard, review and reviewability for every caption of a site.
  nlohmann::json captions(const std::string& site_id) const;
  nlohmann::json caption_view(const std::string& caption_id) const;
  std::vector<std::string> review_queue() const;  // judge-accepted captions without a decision

  /// Records a decision. NotFound for an unknown caption; IllegalTransition
  /// for a judge-rejected or already-decided caption; BadRequest for a
  /// decision other than accept or reject. Accepting moves the site to
  /// accepted.
  ReviewDecision review(const std::string& caption_id, const std::string& decision, const std::string& note,
                        const std::string& reviewer = "operator");

  /// Chunks, embeds and upserts accepted captions and registered documents
  /// into a new knowledge-base generation, committed by replacing
  /// rag/CURRENT. Nothing is written when nothing changed or when the
  /// embedder fails (SyncFailed).
  SyncSummary rag_sync();
  agentic::KnowledgeBase load_knowledge_base() const;
  /// mode is "flat" or "agentic".
  nlohmann::json rag_query(const std::string& query, const std::string& mode);

 private:
  struct State;
  std::mutex& site_lock(const std::string& site_id);
  void journal(const std::string& run_id, const std::string& site_id, const std::string& stage,
               const std::string& event, const std::string& detail = {});
  llm::CallPolicy call_policy() const;

  Config config_;
  Services services_;
  sites::Registry registry_;
  std::shared_ptr<State> state_;
};

/// Creates the workspace skeleton and a default config.ini if absent.
void init_workspace(const fs::path& root);

}  // namespace minescape::pipeline
