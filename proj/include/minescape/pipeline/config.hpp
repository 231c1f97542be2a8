#pragma once

#include <map>
#include <string>

#include "minescape/agentic/cascade.hpp"
#include "minescape/caption/caption.hpp"
#include "minescape/date.hpp"
#include "minescape/io.hpp"
#include "minescape/judge/judge.hpp"
#include "minescape/raster/render.hpp"
#include "minescape/udm/model.hpp"

namespace minescape::pipeline {

/// Workspace configuration, read from <root>/config.ini. The file holds
/// "[section]" headers and "key = value" lines; '#' and ';' start comments.
/// Keys are addressed as "section.key". Unknown keys and malformed values
/// raise ConfigError. Secrets never live here: provider keys come from the
/// environment only.
struct Config {
  fs::path root;

  // [catalog]
  fs::path catalog_file = "catalog/catalog.json";  // relative to root
  Date horizon{std::chrono::year{2024}, std::chrono::month{12}, std::chrono::day{31}};
  double max_cloud_pct = 20.0;
  int lookback_months = 18;
  std::size_t max_candidates = 5;

  // [quality]
  double gap_threshold = 0.05;
  raster::EnhanceParams enhance{};

  // [udm]
  bool udm_enabled = true;
  bool udm_veto = true;
  std::size_t texture_window = 5;
  udm::UdmParams udm{};

  // [caption]
  std::string caption_provider = "mock";  // mock | http
  std::uint64_t caption_seed = 0;
  std::string payload = "auto";  // rgb | rgb_ndvi_udm | auto (udm layer when present)
  caption::CaptionConfig caption{};

  // [judge]
  std::string judge_provider = "mock";  // mock | http
  std::uint64_t judge_seed = 0;
  judge::GatePolicy gate{};
  bool judge_parallel = false;

  // [rag]
  std::string embedder = "hash";  // hash | http
  std::size_t embedding_dimension = 256;
  std::size_t chunk_size = rag::kDefaultChunkSize;
  std::size_t overlap = rag::kDefaultOverlap;
  std::size_t summary_budget = 60;
  fs::path documents_dir = "documents";
  std::string answer_provider = "echo";  // echo | http
  std::string summaries = "extractive";  // extractive | abstractive (answer provider)
  agentic::AgenticParams agentic{};

  // [service]
  std::string host = "127.0.0.1";
  int port = 8080;

  // [llm]
  int max_retries = 3;
  int base_delay_ms = 500;

  /// Normalized "key=value" lines, sorted; the basis of config_hash().
  std::map<std::string, std::string> entries;
  std::string config_hash() const;
  fs::path resolve(const fs::path& p) const { return p.is_absolute() ? p : root / p; }
};

Config parse_config(std::string_view text, const fs::path& root);
/// Reads <root>/config.ini; a missing file gives the defaults.
Config load_config(const fs::path& root);
/// The documented defaults as config.ini text.
std::string default_config_text();

}  // namespace minescape::pipeline
