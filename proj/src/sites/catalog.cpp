#include "minescape/sites/catalog.hpp"

#include <algorithm>
#include <json.hpp>
#include <thread>

#include "minescape/error.hpp"

namespace minescape::sites {

using nlohmann::json;

std::string candidates_to_json(const std::vector<SceneCandidate>& cs) {
  json arr = json::array();
  for (const auto& c : cs) {
    json j = {{"scene_id", c.scene_id},
              {"capture_date", format_date(c.capture_date)},
              {"cloud_pct", c.cloud_pct},
              {"asset", c.asset}};
    if (c.footprint) {
      j["footprint"] = {c.footprint->min_lon, c.footprint->min_lat, c.footprint->max_lon, c.footprint->max_lat};
    }
    arr.push_back(j);
  }
  return arr.dump(2);
}

std::vector<SceneCandidate> candidates_from_json(std::string_view text) {
  std::vector<SceneCandidate> out;
  try {
    const json arr = json::parse(text);
    if (!arr.is_array()) throw Error(ErrorCode::BadRequest, "catalog must be a JSON array");
    for (const auto& j : arr) {
      SceneCandidate c;
      c.scene_id = j.at("scene_id").get<std::string>();
      c.capture_date = parse_date_or_throw(j.at("capture_date").get<std::string>());
      c.cloud_pct = j.at("cloud_pct").get<double>();
      c.asset = j.value("asset", "");
      if (j.contains("footprint")) {
        const auto f = j["footprint"].get<std::vector<double>>();
        if (f.size() != 4) throw Error(ErrorCode::BadRequest, "footprint must have four numbers");
        c.footprint = GeoBox{f[0], f[1], f[2], f[3]};
      }
      out.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadRequest, std::string("malformed catalog: ") + e.what());
  }
  return out;
}

FixtureCatalog::FixtureCatalog(fs::path catalog_file) : file_(std::move(catalog_file)) {}

std::vector<SceneCandidate> FixtureCatalog::search(const GeoBox&, const DateWindow&) {
  if (!fs::exists(file_)) {
    throw Error(ErrorCode::CatalogUnavailable, "catalog fixture " + file_.string() + " not found", {}, std::nullopt,
                false);
  }
  return candidates_from_json(read_text_file(file_));
}

fs::path FixtureCatalog::fetch(const SceneCandidate& c) {
  const fs::path p = fs::path(c.asset).is_absolute() ? fs::path(c.asset) : file_.parent_path() / c.asset;
  if (!fs::exists(p)) throw Error(ErrorCode::DecodeError, "scene asset " + p.string() + " not found", c.scene_id);
  return p;
}

std::vector<SceneCandidate> query_catalog(CatalogProvider& provider, const GeoBox& box, const DateWindow& window,
                                          const RetryPolicy& policy) {
  std::vector<SceneCandidate> raw;
  auto delay = policy.base_delay;
  const int attempts = std::max(1, policy.max_attempts);
  for (int attempt = 1;; ++attempt) {
    try {
      raw = provider.search(box, window);
      break;
    } catch (const Error& e) {
      if (!e.retryable()) throw;
      if (attempt >= attempts) {
        throw Error(ErrorCode::CatalogUnavailable,
                    "catalog unavailable after " + std::to_string(attempts) + " attempts: " + e.what(), {}, attempts,
                    true);
      }
    }
    if (policy.sleep) policy.sleep(delay);
    else std::this_thread::sleep_for(delay);
    delay *= 2;
  }
  std::vector<SceneCandidate> out;
  for (auto& c : raw) {
    if (c.footprint && !c.footprint->intersects(box)) continue;
    if (!window.admits(c.capture_date)) continue;
    if (!(c.cloud_pct <= window.max_cloud_pct)) continue;
    out.push_back(std::move(c));
  }
  std::sort(out.begin(), out.end(), [](const SceneCandidate& a, const SceneCandidate& b) {
    if (a.cloud_pct != b.cloud_pct) return a.cloud_pct < b.cloud_pct;
    if (a.capture_date != b.capture_date) return a.capture_date < b.capture_date;
    return a.scene_id < b.scene_id;
  });
  return out;
}

}  // namespace minescape::sites
