#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "minescape/io.hpp"
#include "minescape/sites/site.hpp"

namespace minescape::sites {

struct SceneCandidate {
  std::string scene_id;
  Date capture_date;
  double cloud_pct = 0.0;
  std::string asset;               // download reference, relative to the catalog file
  std::optional<GeoBox> footprint;  // absent means "covers any box"

  bool operator==(const SceneCandidate&) const = default;
};

std::string candidates_to_json(const std::vector<SceneCandidate>& c);
std::vector<SceneCandidate> candidates_from_json(std::string_view text);

/// Anything that can list scenes over a box. Implementations signal
/// transient failures by throwing Error with retryable() set.
class CatalogProvider {
 public:
  virtual ~CatalogProvider() = default;
  virtual std::vector<SceneCandidate> search(const GeoBox& box, const DateWindow& window) = 0;
  /// Resolves a candidate's asset to a local file.
  virtual fs::path fetch(const SceneCandidate& candidate) = 0;
};

/// Recorded catalog: a JSON array of candidates
///   [{"scene_id", "capture_date", "cloud_pct", "asset", "footprint": [min_lon, min_lat, max_lon, max_lat]}]
/// Assets resolve relative to the catalog file's directory.
class FixtureCatalog final : public CatalogProvider {
 public:
  explicit FixtureCatalog(fs::path catalog_file);
  std::vector<SceneCandidate> search(const GeoBox& box, const DateWindow& window) override;
  fs::path fetch(const SceneCandidate& candidate) override;

 private:
  fs::path file_;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_delay{200};  // doubles after each failed attempt
  Sleeper sleep;                              // defaults to std::this_thread::sleep_for
};

/// Searches the provider, retrying retryable failures with exponential
/// backoff, and keeps candidates inside the box, the window's dates and
/// months, and the cloud limit. Sorted by cloud_pct, then date, then id.
/// Throws CatalogUnavailable (retryable) once the attempts are spent, or
/// immediately for a non-retryable provider error.
std::vector<SceneCandidate> query_catalog(CatalogProvider& provider, const GeoBox& box, const DateWindow& window,
                                          const RetryPolicy& policy = {});

}  // namespace minescape::sites
