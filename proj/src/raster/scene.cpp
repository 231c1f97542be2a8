#include "minescape/raster/scene.hpp"

#include <cmath>
#include <json.hpp>

#include "minescape/error.hpp"
#include "minescape/io.hpp"
#include "minescape/raster/tiff.hpp"

namespace minescape::raster {

using nlohmann::json;

std::array<double, 2> GeoTransform::to_pixel(double lon, double lat) const {
  if (!geographic()) throw Error(ErrorCode::GeoreferenceMissing, "scene has no geographic transform");
  return {(lon - origin_lon) / pixel_dlon - 0.5, (origin_lat - lat) / pixel_dlat - 0.5};
}

std::array<double, 2> GeoTransform::to_lonlat(double x, double y) const {
  if (!geographic()) throw Error(ErrorCode::GeoreferenceMissing, "scene has no geographic transform");
  return {origin_lon + (x + 0.5) * pixel_dlon, origin_lat - (y + 0.5) * pixel_dlat};
}

SceneCube::SceneCube(std::string scene_id, std::map<std::string, Grid<double>, std::less<>> bands, GeoTransform geo,
                     Mask nodata, Date capture_date, std::string crs_code)
    : scene_id_(std::move(scene_id)),
      bands_(std::move(bands)),
      geo_(geo),
      nodata_(std::move(nodata)),
      capture_date_(capture_date),
      crs_code_(std::move(crs_code)) {
  if (!capture_date_.ok()) throw Error(ErrorCode::BadRequest, "invalid capture date");
  for (const auto& [name, grid] : bands_) {
    if (!grid.same_shape(nodata_)) throw Error(ErrorCode::ShapeError, "band " + name + " differs from mask shape", name);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (!nodata_[i] && !std::isfinite(grid[i])) {
        throw Error(ErrorCode::DecodeError, "non-finite reflectance in band " + name, name);
      }
    }
  }
}

bool SceneCube::has_band(std::string_view name) const { return bands_.find(name) != bands_.end(); }

const Grid<double>& SceneCube::band(std::string_view name) const {
  auto it = bands_.find(name);
  if (it == bands_.end()) throw Error(ErrorCode::MissingBand, "band " + std::string(name) + " not present", std::string(name));
  return it->second;
}

std::size_t SceneCube::valid_count() const {
  std::size_t n = 0;
  for (auto m : nodata_) n += m ? 0 : 1;
  return n;
}

std::filesystem::path sidecar_path(const std::filesystem::path& scene_path) {
  auto p = scene_path;
  p += ".json";
  return p;
}

SceneCube load_scene(const std::filesystem::path& path) {
  const TiffImage img = read_tiff(path);

  json sidecar = json::object();
  if (const auto sc = sidecar_path(path); std::filesystem::exists(sc)) {
    try {
      sidecar = json::parse(read_text_file(sc));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::DecodeError, "bad sidecar " + sc.string() + ": " + e.what());
    }
  }

  std::vector<std::string> names = img.band_names;
  const bool named = !names.empty() && std::all_of(names.begin(), names.end(), [](const auto& n) { return !n.empty(); });
  if (!named) {
    if (!sidecar.contains("bands")) {
      throw Error(ErrorCode::DecodeError, "band names missing and no sidecar band order for " + path.string());
    }
    names = sidecar.at("bands").get<std::vector<std::string>>();
    if (names.size() != img.bands.size()) {
      throw Error(ErrorCode::DecodeError, "sidecar lists " + std::to_string(names.size()) + " bands, raster has " +
                                              std::to_string(img.bands.size()));
    }
  }

  std::map<std::string, const Grid<double>*> raw;
  for (std::size_t i = 0; i < names.size(); ++i) raw[names[i]] = &img.bands[i];
  for (auto req : kRequiredBands) {
    if (!raw.count(std::string(req))) {
      throw Error(ErrorCode::MissingBand, "band " + std::string(req) + " not present in " + path.string(), std::string(req));
    }
  }

  if (!img.pixel_scale || !img.tiepoint) throw Error(ErrorCode::GeoreferenceMissing, "no georeference in " + path.string());
  GeoTransform geo;
  const auto& scale = *img.pixel_scale;
  const auto& tie = *img.tiepoint;
  const int epsg = img.epsg.value_or(4326);
  // Tiepoint maps raster (I, J) to model (X, Y); shift to the raster origin.
  const double origin_x = tie[3] - tie[0] * scale[0];
  const double origin_y = tie[4] + tie[1] * scale[1];
  if (epsg == 4326) {
    geo.origin_lon = origin_x;
    geo.origin_lat = origin_y;
    geo.pixel_dlon = scale[0];
    geo.pixel_dlat = scale[1];
    geo.pixel_size_m = scale[1] * kMetersPerDegree;
  } else {
    geo.origin_lon = origin_x;
    geo.origin_lat = origin_y;
    geo.pixel_size_m = scale[0];
  }

  std::optional<double> nodata = img.nodata;
  if (sidecar.contains("nodata") && sidecar["nodata"].is_number()) nodata = sidecar["nodata"].get<double>();

  const std::size_t rows = img.height, cols = img.width;
  Mask mask(rows, cols, 0);
  for (std::size_t i = 0; i < rows * cols; ++i) {
    bool all_zero = true;
    bool bad = false;
    for (auto req : kRequiredBands) {
      const double v = (*raw[std::string(req)])[i];
      if (!std::isfinite(v) || (nodata && v == *nodata)) bad = true;
      if (v != 0.0) all_zero = false;
    }
    mask[i] = (bad || all_zero) ? 1 : 0;
  }

  const double scale_factor = is_integer(img.sample_type) ? 1.0 / kReflectanceScale : 1.0;
  std::map<std::string, Grid<double>, std::less<>> bands;
  for (auto req : kRequiredBands) {
    Grid<double> g = *raw[std::string(req)];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = mask[i] ? 0.0 : g[i] * scale_factor;
    bands.emplace(std::string(req), std::move(g));
  }

  std::string scene_id = sidecar.value("scene_id", path.stem().string());
  std::optional<Date> date;
  if (sidecar.contains("capture_date")) date = parse_date(sidecar["capture_date"].get<std::string>());
  if (!date && img.datetime) date = parse_date(*img.datetime);
  if (!date) throw Error(ErrorCode::DecodeError, "no valid capture date for " + path.string());

  return SceneCube(std::move(scene_id), std::move(bands), geo, std::move(mask), *date, "EPSG:" + std::to_string(epsg));
}

void save_scene(const std::filesystem::path& path, const SceneCube& cube) {
  TiffImage img;
  img.width = cube.cols();
  img.height = cube.rows();
  img.sample_type = SampleType::UInt16;
  for (auto req : kRequiredBands) {
    Grid<double> g = cube.band(req);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = cube.nodata()[i] ? 0.0 : g[i] * kReflectanceScale;
    img.bands.push_back(std::move(g));
    img.band_names.emplace_back(req);
  }
  const auto& geo = cube.geo();
  img.pixel_scale = std::array<double, 3>{geo.pixel_dlon, geo.pixel_dlat, 0.0};
  img.tiepoint = std::array<double, 6>{0, 0, 0, geo.origin_lon, geo.origin_lat, 0};
  img.epsg = 4326;
  img.nodata = 0.0;
  const Date d = cube.capture_date();
  img.datetime = format_date(d) + " 00:00:00";
  for (char& c : *img.datetime) {
    if (c == '-') c = ':';
  }
  write_tiff(path, img);
  json sc = {{"scene_id", cube.scene_id()}, {"capture_date", format_date(d)}};
  write_file_atomic(sidecar_path(path), sc.dump(2));
}

}  // namespace minescape::raster
