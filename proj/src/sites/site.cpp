#include "minescape/sites/site.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "minescape/error.hpp"
#include "minescape/raster/scene.hpp"
#include "minescape/util.hpp"

namespace minescape::sites {

using nlohmann::json;

std::string_view to_string(SiteStatus s) {
  switch (s) {
    case SiteStatus::New: return "new";
    case SiteStatus::Scened: return "scened";
    case SiteStatus::Annotated: return "annotated";
    case SiteStatus::Captioned: return "captioned";
    case SiteStatus::Accepted: return "accepted";
  }
  return "?";
}

SiteStatus site_status_from_string(std::string_view s) {
  for (auto st : {SiteStatus::New, SiteStatus::Scened, SiteStatus::Annotated, SiteStatus::Captioned,
                  SiteStatus::Accepted}) {
    if (to_string(st) == s) return st;
  }
  throw Error(ErrorCode::BadRequest, "unknown site status '" + std::string(s) + "'");
}

bool transition_allowed(SiteStatus from, SiteStatus to) {
  const int f = static_cast<int>(from), t = static_cast<int>(to);
  if (t == f || t == f + 1) return true;
  return from == SiteStatus::Scened && to == SiteStatus::Captioned;
}

void validate_site(const SiteRecord& site) {
  if (site.site_id.empty() || site.site_id.size() > 128) throw Error(ErrorCode::BadRequest, "site_id must be 1-128 characters");
  for (char c : site.site_id) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) {
      throw Error(ErrorCode::BadRequest, "site_id may hold only letters, digits, '-', '_' and '.'", site.site_id);
    }
  }
  if (site.site_id.front() == '.') throw Error(ErrorCode::BadRequest, "site_id may not start with '.'", site.site_id);
  if (!(site.lat >= -90.0 && site.lat <= 90.0) || !(site.lon >= -180.0 && site.lon <= 180.0)) {
    throw Error(ErrorCode::BadRequest, "coordinates out of range", site.site_id);
  }
}

std::string site_to_json(const SiteRecord& s) {
  return json{{"site_id", s.site_id}, {"name", s.name},           {"country", s.country},
              {"lat", s.lat},         {"lon", s.lon},             {"commodity", s.commodity},
              {"status", to_string(s.status)}}
      .dump(2);
}

SiteRecord site_from_json(std::string_view text) {
  SiteRecord s;
  try {
    const json j = json::parse(text);
    s.site_id = j.at("site_id").get<std::string>();
    s.name = j.value("name", s.site_id);
    s.country = j.value("country", "");
    s.lat = j.at("lat").get<double>();
    s.lon = j.at("lon").get<double>();
    if (j.contains("commodity")) {
      if (j["commodity"].is_string()) s.commodity = {j["commodity"].get<std::string>()};
      else s.commodity = j["commodity"].get<std::vector<std::string>>();
    }
    s.status = site_status_from_string(j.value("status", "new"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadRequest, std::string("malformed site record: ") + e.what());
  }
  validate_site(s);
  return s;
}

GeoBox bbox_for(const SiteRecord& site) {
  if (!(std::fabs(site.lat) < 85.0)) {
    throw Error(ErrorCode::UnsupportedLatitude, "latitude " + std::to_string(site.lat) + " is too close to a pole",
                site.site_id);
  }
  constexpr double kPi = 3.14159265358979323846;
  const double dlat = 5000.0 / raster::kMetersPerDegree;
  const double dlon = 5000.0 / (raster::kMetersPerDegree * std::cos(site.lat * kPi / 180.0));
  return {site.lon - dlon, site.lat - dlat, site.lon + dlon, site.lat + dlat};
}

double box_area_km2(const GeoBox& b) {
  constexpr double kPi = 3.14159265358979323846;
  const double mid = (b.min_lat + b.max_lat) / 2.0;
  const double h = (b.max_lat - b.min_lat) * raster::kMetersPerDegree;
  const double w = (b.max_lon - b.min_lon) * raster::kMetersPerDegree * std::cos(mid * kPi / 180.0);
  return h * w / 1e6;
}

DateWindow date_window(const SiteRecord& site, const Date& horizon, double max_cloud_pct, int lookback_months) {
  if (!(max_cloud_pct >= 0.0 && max_cloud_pct <= 100.0)) throw Error(ErrorCode::ConfigError, "max_cloud_pct must be in [0, 100]");
  if (lookback_months < 0) throw Error(ErrorCode::ConfigError, "lookback must be nonnegative");
  DateWindow w;
  if (site.lat > 23.5) w.months = {5, 6, 7, 8, 9};
  else if (site.lat < -23.5) w.months = {11, 12, 1, 2, 3};
  else w.months = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
  w.horizon = horizon;
  w.latest = horizon;
  w.earliest = add_months(horizon, -lookback_months);
  w.max_cloud_pct = max_cloud_pct;
  return w;
}

Dossier validate_dossier(const Dossier& d) {
  const std::pair<const char*, const std::string*> segments[] = {
      {"history", &d.history}, {"geology", &d.geology}, {"controversies", &d.controversies}};
  bool any = false, sparse = false;
  for (const auto& [name, text] : segments) {
    const std::size_t n = word_count(*text);
    if (n > kSegmentHardCap) {
      throw Error(ErrorCode::SegmentTooLong,
                  std::string(name) + " has " + std::to_string(n) + " words (limit " +
                      std::to_string(kSegmentHardCap) + ")",
                  name, static_cast<std::int64_t>(n));
    }
    if (n == 0) sparse = true;
    else any = true;
  }
  if (!any) throw Error(ErrorCode::EmptyDossier, "dossier has no content", d.site_id);
  Dossier out = d;
  out.sparse_flag = sparse;
  return out;
}

std::string dossier_to_json(const Dossier& d) {
  return json{{"site_id", d.site_id},
              {"history", d.history},
              {"geology", d.geology},
              {"controversies", d.controversies},
              {"sources", d.sources},
              {"sparse_flag", d.sparse_flag}}
      .dump(2);
}

Dossier dossier_from_json(std::string_view text, std::string_view site_id) {
  Dossier d;
  try {
    const json j = json::parse(text);
    d.site_id = j.value("site_id", std::string(site_id));
    d.history = j.value("history", "");
    d.geology = j.value("geology", "");
    d.controversies = j.value("controversies", "");
    if (j.contains("sources")) d.sources = j["sources"].get<std::vector<std::string>>();
    d.sparse_flag = j.value("sparse_flag", false);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadRequest, std::string("malformed dossier: ") + e.what());
  }
  return d;
}

Registry::Registry(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_ / "sites");
  fs::create_directories(root_ / "dossiers");
}

fs::path Registry::site_path(std::string_view id) const { return root_ / "sites" / (std::string(id) + ".json"); }
fs::path Registry::dossier_path(std::string_view id) const { return root_ / "dossiers" / (std::string(id) + ".json"); }

std::vector<SiteRecord> Registry::list() const {
  std::vector<SiteRecord> out;
  for (const auto& e : fs::directory_iterator(root_ / "sites")) {
    if (e.path().extension() != ".json") continue;
    out.push_back(site_from_json(read_text_file(e.path())));
  }
  std::sort(out.begin(), out.end(), [](const SiteRecord& a, const SiteRecord& b) { return a.site_id < b.site_id; });
  return out;
}

bool Registry::exists(std::string_view site_id) const {
  SiteRecord probe;
  probe.site_id = std::string(site_id);
  try {
    validate_site(probe);
  } catch (const Error&) {
    return false;
  }
  return fs::exists(site_path(site_id));
}

SiteRecord Registry::get(std::string_view site_id) const {
  if (!exists(site_id)) throw Error(ErrorCode::NotFound, "unknown site '" + std::string(site_id) + "'", std::string(site_id));
  return site_from_json(read_text_file(site_path(site_id)));
}

void Registry::add(const SiteRecord& site) {
  validate_site(site);
  std::lock_guard lock(mutex_);
  if (fs::exists(site_path(site.site_id))) {
    throw Error(ErrorCode::BadRequest, "site '" + site.site_id + "' already exists", site.site_id);
  }
  write_file_atomic(site_path(site.site_id), site_to_json(site));
}

void Registry::upsert(const SiteRecord& site) {
  validate_site(site);
  std::lock_guard lock(mutex_);
  SiteRecord rec = site;
  if (fs::exists(site_path(site.site_id))) rec.status = site_from_json(read_text_file(site_path(site.site_id))).status;
  write_file_atomic(site_path(site.site_id), site_to_json(rec));
}

SiteRecord Registry::set_status(std::string_view site_id, SiteStatus to) {
  std::lock_guard lock(mutex_);
  SiteRecord rec = get(site_id);
  if (!transition_allowed(rec.status, to)) {
    throw Error(ErrorCode::IllegalTransition,
                "site '" + rec.site_id + "' cannot move from " + std::string(to_string(rec.status)) + " to " +
                    std::string(to_string(to)),
                rec.site_id);
  }
  if (rec.status != to) {
    rec.status = to;
    write_file_atomic(site_path(site_id), site_to_json(rec));
  }
  return rec;
}

SiteRecord Registry::promote(std::string_view site_id, SiteStatus to) {
  std::lock_guard lock(mutex_);
  SiteRecord rec = get(site_id);
  if (static_cast<int>(rec.status) >= static_cast<int>(to)) return rec;
  if (!transition_allowed(rec.status, to)) {
    throw Error(ErrorCode::IllegalTransition,
                "site '" + rec.site_id + "' cannot move from " + std::string(to_string(rec.status)) + " to " +
                    std::string(to_string(to)),
                rec.site_id);
  }
  rec.status = to;
  write_file_atomic(site_path(site_id), site_to_json(rec));
  return rec;
}

std::optional<Dossier> Registry::dossier(std::string_view site_id) const {
  const auto p = dossier_path(site_id);
  if (!exists(site_id) || !fs::exists(p)) return std::nullopt;
  return dossier_from_json(read_text_file(p), site_id);
}

Dossier Registry::put_dossier(const Dossier& d) {
  if (!exists(d.site_id)) throw Error(ErrorCode::NotFound, "unknown site '" + d.site_id + "'", d.site_id);
  const Dossier v = validate_dossier(d);
  std::lock_guard lock(mutex_);
  write_file_atomic(dossier_path(d.site_id), dossier_to_json(v));
  return v;
}

}  // namespace minescape::sites
