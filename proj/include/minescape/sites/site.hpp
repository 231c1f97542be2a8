#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "minescape/date.hpp"
#include "minescape/io.hpp"

namespace minescape::sites {

enum class SiteStatus { New, Scened, Annotated, Captioned, Accepted };

std::string_view to_string(SiteStatus s);
SiteStatus site_status_from_string(std::string_view s);

/// new -> scened -> annotated -> captioned -> accepted, where annotated may
/// be skipped. Staying put is allowed; moving backwards is not.
bool transition_allowed(SiteStatus from, SiteStatus to);

struct SiteRecord {
  std::string site_id;
  std::string name;
  std::string country;
  double lat = 0.0;
  double lon = 0.0;
  std::vector<std::string> commodity;
  SiteStatus status = SiteStatus::New;

  bool operator==(const SiteRecord&) const = default;
};

/// Throws BadRequest when the id is empty or not filename-safe, or the
/// coordinates are out of range.
void validate_site(const SiteRecord& site);
std::string site_to_json(const SiteRecord& site);
SiteRecord site_from_json(std::string_view text);

struct GeoBox {
  double min_lon = 0.0, min_lat = 0.0, max_lon = 0.0, max_lat = 0.0;
  bool contains(double lon, double lat) const {
    return lon >= min_lon && lon <= max_lon && lat >= min_lat && lat <= max_lat;
  }
  bool intersects(const GeoBox& o) const {
    return min_lon <= o.max_lon && o.min_lon <= max_lon && min_lat <= o.max_lat && o.min_lat <= max_lat;
  }
  bool operator==(const GeoBox&) const = default;
};

/// 10 km x 10 km square centred on the site: half-widths 5000 / 111320
/// degrees of latitude and 5000 / (111320 cos lat) degrees of longitude.
/// Throws UnsupportedLatitude for |lat| >= 85.
GeoBox bbox_for(const SiteRecord& site);
/// Area in square kilometres under the same meters-per-degree model.
double box_area_km2(const GeoBox& box);

inline constexpr double kDefaultMaxCloudPct = 20.0;
inline constexpr int kLookbackMonths = 18;

struct DateWindow {
  std::set<unsigned> months;
  Date earliest;
  Date latest;
  double max_cloud_pct = kDefaultMaxCloudPct;
  Date horizon;

  bool admits(const Date& d) const {
    return d >= earliest && d <= latest && months.count(static_cast<unsigned>(d.month())) != 0;
  }
};

/// Northern sites (lat > 23.5) take May-September, southern sites
/// (lat < -23.5) November-March, everything between all months. The window
/// ends at the horizon and starts 18 months earlier.
DateWindow date_window(const SiteRecord& site, const Date& horizon, double max_cloud_pct = kDefaultMaxCloudPct,
                       int lookback_months = kLookbackMonths);

struct Dossier {
  std::string site_id;
  std::string history;
  std::string geology;
  std::string controversies;
  std::vector<std::string> sources;
  bool sparse_flag = false;

  bool operator==(const Dossier&) const = default;
};

inline constexpr std::size_t kSegmentHardCap = 300;

/// Rejects a segment over 300 words with SegmentTooLong(name, count) and an
/// all-empty dossier with EmptyDossier. Returns a copy with sparse_flag set
/// when any segment is empty.
Dossier validate_dossier(const Dossier& d);
std::string dossier_to_json(const Dossier& d);
Dossier dossier_from_json(std::string_view text, std::string_view site_id = {});

/// File-backed registry: <root>/sites/<id>.json and <root>/dossiers/<id>.json.
/// Reads may run concurrently; every mutation is serialized and written
/// atomically.
class Registry {
 public:
  explicit Registry(fs::path root);

  const fs::path& root() const noexcept { return root_; }
  std::vector<SiteRecord> list() const;
  bool exists(std::string_view site_id) const;
  /// Throws NotFound.
  SiteRecord get(std::string_view site_id) const;
  /// Adds a new site; throws BadRequest if the id exists.
  void add(const SiteRecord& site);
  /// Replaces name, country, coordinates and commodity, keeping status.
  void upsert(const SiteRecord& site);
  /// Moves to `to`; throws IllegalTransition when the state machine forbids it.
  SiteRecord set_status(std::string_view site_id, SiteStatus to);
  /// Moves forward to `to` unless the site is already at or past it.
  SiteRecord promote(std::string_view site_id, SiteStatus to);

  std::optional<Dossier> dossier(std::string_view site_id) const;
  /// Validates, then stores.
  Dossier put_dossier(const Dossier& d);

 private:
  fs::path site_path(std::string_view id) const;
  fs::path dossier_path(std::string_view id) const;

  fs::path root_;
  mutable std::mutex mutex_;
};

}  // namespace minescape::sites
