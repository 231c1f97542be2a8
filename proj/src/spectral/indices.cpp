#include "minescape/spectral/indices.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "minescape/embedded_data.hpp"
#include "minescape/error.hpp"
#include "minescape/raster/tiff.hpp"

namespace minescape::spectral {

std::string_view to_string(IndexKind kind) {
  switch (kind) {
    case IndexKind::NDVI: return "NDVI";
    case IndexKind::NDBI: return "NDBI";
    case IndexKind::FMI: return "FMI";
  }
  return "?";
}

IndexKind index_kind_from_string(std::string_view name) {
  std::string up(name);
  std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (up == "NDVI") return IndexKind::NDVI;
  if (up == "NDBI" || up == "NBDI") return IndexKind::NDBI;
  if (up == "FMI") return IndexKind::FMI;
  throw Error(ErrorCode::BadRequest, "unknown index '" + std::string(name) + "'", std::string(name));
}

IndexGrid normalized_difference(const Grid<double>& a, const Grid<double>& b, const Mask& nodata) {
  require_same_shape(a, b, "normalized_difference");
  require_same_shape(a, nodata, "normalized_difference");
  IndexGrid out{Grid<double>(a.rows(), a.cols(), 0.0), Mask(a.rows(), a.cols(), 0)};
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double sum = a[i] + b[i];
    if (nodata[i] || sum == 0.0) continue;
    out.values[i] = (a[i] - b[i]) / sum;
    out.valid[i] = 1;
  }
  return out;
}

IndexGrid band_ratio(const Grid<double>& a, const Grid<double>& b, const Mask& nodata) {
  require_same_shape(a, b, "band_ratio");
  require_same_shape(a, nodata, "band_ratio");
  IndexGrid out{Grid<double>(a.rows(), a.cols(), 0.0), Mask(a.rows(), a.cols(), 0)};
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (nodata[i] || b[i] == 0.0) continue;
    out.values[i] = a[i] / b[i];
    out.valid[i] = 1;
  }
  return out;
}

namespace {

IndexRaster wrap(IndexKind kind, IndexGrid g) { return {kind, std::move(g.values), std::move(g.valid)}; }

}  // namespace

IndexRaster ndvi(const raster::SceneCube& cube) {
  return wrap(IndexKind::NDVI, normalized_difference(cube.band("B08"), cube.band("B04"), cube.nodata()));
}

IndexRaster ndbi(const raster::SceneCube& cube) {
  return wrap(IndexKind::NDBI, normalized_difference(cube.band("B11"), cube.band("B08"), cube.nodata()));
}

IndexRaster fmi(const raster::SceneCube& cube) {
  return wrap(IndexKind::FMI, band_ratio(cube.band("B11"), cube.band("B08"), cube.nodata()));
}

IndexRaster compute_index(const raster::SceneCube& cube, IndexKind kind) {
  switch (kind) {
    case IndexKind::NDVI: return ndvi(cube);
    case IndexKind::NDBI: return ndbi(cube);
    case IndexKind::FMI: return fmi(cube);
  }
  throw Error(ErrorCode::BadRequest, "unknown index kind");
}

raster::Rgb Palette::color_at(double value) const {
  if (anchors.empty()) return invalid;
  if (value <= anchors.front().value) return anchors.front().color;
  if (value >= anchors.back().value) return anchors.back().color;
  auto hi = std::upper_bound(anchors.begin(), anchors.end(), value,
                             [](double v, const PaletteAnchor& a) { return v < a.value; });
  auto lo = hi - 1;
  const double t = (value - lo->value) / (hi->value - lo->value);
  raster::Rgb out{};
  for (std::size_t c = 0; c < 3; ++c) {
    const double a = lo->color[c], b = hi->color[c];
    out[c] = static_cast<std::uint8_t>(std::lround(a + t * (b - a)));
  }
  return out;
}

Palette parse_palette(std::string_view json_text) {
  using nlohmann::json;
  Palette p;
  try {
    const json j = json::parse(json_text);
    p.name = j.at("name").get<std::string>();
    p.version = j.at("version").get<int>();
    for (const auto& a : j.at("anchors")) {
      const auto rgb = a.at("rgb").get<std::array<int, 3>>();
      PaletteAnchor anchor;
      anchor.value = a.at("value").get<double>();
      for (std::size_t c = 0; c < 3; ++c) anchor.color[c] = static_cast<std::uint8_t>(std::clamp(rgb[c], 0, 255));
      p.anchors.push_back(anchor);
    }
    if (j.contains("invalid")) {
      const auto rgb = j["invalid"].get<std::array<int, 3>>();
      for (std::size_t c = 0; c < 3; ++c) p.invalid[c] = static_cast<std::uint8_t>(std::clamp(rgb[c], 0, 255));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("bad palette: ") + e.what());
  }
  if (p.anchors.size() < 2) throw Error(ErrorCode::ConfigError, "palette needs at least two anchors");
  for (std::size_t i = 1; i < p.anchors.size(); ++i) {
    if (!(p.anchors[i].value > p.anchors[i - 1].value)) {
      throw Error(ErrorCode::ConfigError, "palette anchors must be strictly ascending");
    }
  }
  return p;
}

const Palette& default_palette(IndexKind kind) {
  auto load = [](std::string_view file) {
    const auto text = embedded_file(file);
    if (!text) throw Error(ErrorCode::ConfigError, "missing embedded palette " + std::string(file));
    return parse_palette(*text);
  };
  static const Palette ndvi_p = load("palettes/ndvi.json");
  static const Palette ndbi_p = load("palettes/ndbi.json");
  static const Palette fmi_p = load("palettes/fmi.json");
  switch (kind) {
    case IndexKind::NDVI: return ndvi_p;
    case IndexKind::NDBI: return ndbi_p;
    case IndexKind::FMI: return fmi_p;
  }
  return ndvi_p;
}

raster::RenderImage render_index(const IndexRaster& raster, const Palette& palette) {
  require_same_shape(raster.values, raster.valid, "render_index");
  if (raster.values.empty()) throw Error(ErrorCode::EmptyScene, "empty index raster");
  raster::RenderImage out;
  out.pixels = Grid<raster::Rgb>(raster.values.rows(), raster.values.cols(), palette.invalid);
  out.provenance.source = "index:" + std::string(to_string(raster.kind)) + ":" + palette.name + "@v" +
                          std::to_string(palette.version);
  for (std::size_t i = 0; i < raster.values.size(); ++i) {
    if (raster.valid[i]) out.pixels[i] = palette.color_at(raster.values[i]);
  }
  return out;
}

raster::RenderImage render_index(const IndexRaster& raster) { return render_index(raster, default_palette(raster.kind)); }

void save_index_tiff(const std::filesystem::path& path, const IndexRaster& raster, const raster::GeoTransform& geo) {
  raster::TiffImage img;
  img.width = raster.values.cols();
  img.height = raster.values.rows();
  img.sample_type = raster::SampleType::Float32;
  Grid<double> band = raster.values;
  for (std::size_t i = 0; i < band.size(); ++i) {
    if (!raster.valid[i]) band[i] = -9999.0;
  }
  img.bands.push_back(std::move(band));
  img.band_names.emplace_back(to_string(raster.kind));
  img.pixel_scale = std::array<double, 3>{geo.pixel_dlon, geo.pixel_dlat, 0.0};
  img.tiepoint = std::array<double, 6>{0, 0, 0, geo.origin_lon, geo.origin_lat, 0};
  img.epsg = 4326;
  img.nodata = -9999.0;
  raster::write_tiff(path, img);
}

}  // namespace minescape::spectral
