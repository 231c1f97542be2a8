#include "minescape/udm/scribbles.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "minescape/error.hpp"

namespace minescape::udm {

using nlohmann::json;

std::string_view to_string(StrokeClass c) {
  switch (c) {
    case StrokeClass::Urban: return "urban";
    case StrokeClass::Mining: return "mining";
    case StrokeClass::Negative: return "negative";
  }
  return "?";
}

StrokeClass stroke_class_from_string(std::string_view name) {
  if (name == "urban") return StrokeClass::Urban;
  if (name == "mining") return StrokeClass::Mining;
  if (name == "negative") return StrokeClass::Negative;
  throw Error(ErrorCode::BadRequest, "unknown stroke class '" + std::string(name) + "'", std::string(name));
}

namespace {

std::vector<std::array<double, 2>> parse_points(const json& coords) {
  std::vector<std::array<double, 2>> pts;
  for (const auto& p : coords) {
    if (!p.is_array() || p.size() < 2 || !p[0].is_number() || !p[1].is_number()) {
      throw Error(ErrorCode::BadRequest, "coordinate must be [x, y]");
    }
    pts.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  if (pts.empty()) throw Error(ErrorCode::BadRequest, "geometry has no coordinates");
  return pts;
}

}  // namespace

ScribbleSet parse_scribbles(std::string_view geojson) {
  json doc;
  try {
    doc = json::parse(geojson);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::BadRequest, std::string("scribbles are not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" || !doc.contains("features") ||
      !doc["features"].is_array()) {
    throw Error(ErrorCode::BadRequest, "scribbles must be a GeoJSON FeatureCollection");
  }
  ScribbleSet set;
  if (doc.contains("scene_id") && doc["scene_id"].is_string()) set.scene_id = doc["scene_id"].get<std::string>();
  const std::string space = doc.value("coordinate_space", "pixel");
  if (space == "pixel") set.space = CoordinateSpace::Pixel;
  else if (space == "geographic") set.space = CoordinateSpace::Geographic;
  else throw Error(ErrorCode::BadRequest, "coordinate_space must be 'pixel' or 'geographic'");

  for (const auto& f : doc["features"]) {
    if (!f.is_object() || !f.contains("geometry") || !f["geometry"].is_object()) {
      throw Error(ErrorCode::BadRequest, "feature without geometry");
    }
    const auto& g = f["geometry"];
    const json props = f.value("properties", json::object());
    if (!props.contains("class") || !props["class"].is_string()) {
      throw Error(ErrorCode::BadRequest, "feature without a 'class' property");
    }
    Stroke s;
    s.cls = stroke_class_from_string(props["class"].get<std::string>());
    if (props.contains("width_px")) {
      if (!props["width_px"].is_number_integer() || props["width_px"].get<long>() < 1) {
        throw Error(ErrorCode::BadRequest, "width_px must be a positive integer");
      }
      s.width_px = props["width_px"].get<int>();
    }
    const std::string type = g.value("type", "");
    if (!g.contains("coordinates") || !g["coordinates"].is_array()) {
      throw Error(ErrorCode::BadRequest, "geometry without coordinates");
    }
    if (type == "LineString") {
      s.points = parse_points(g["coordinates"]);
    } else if (type == "Polygon") {
      if (g["coordinates"].empty()) throw Error(ErrorCode::BadRequest, "polygon without rings");
      s.polygon = true;
      s.points = parse_points(g["coordinates"][0]);
      if (s.points.size() > 1 && s.points.front() == s.points.back()) s.points.pop_back();
    } else {
      throw Error(ErrorCode::BadRequest, "unsupported geometry type '" + type + "'");
    }
    set.strokes.push_back(std::move(s));
  }
  return set;
}

std::string to_geojson(const ScribbleSet& set) {
  json features = json::array();
  for (const auto& s : set.strokes) {
    json coords = json::array();
    for (const auto& p : s.points) coords.push_back({p[0], p[1]});
    json geometry;
    if (s.polygon) {
      if (!s.points.empty()) coords.push_back({s.points.front()[0], s.points.front()[1]});
      geometry = {{"type", "Polygon"}, {"coordinates", json::array({coords})}};
    } else {
      geometry = {{"type", "LineString"}, {"coordinates", coords}};
    }
    features.push_back({{"type", "Feature"},
                        {"geometry", geometry},
                        {"properties", {{"class", to_string(s.cls)}, {"width_px", s.width_px}}}});
  }
  json doc = {{"type", "FeatureCollection"},
              {"coordinate_space", set.space == CoordinateSpace::Pixel ? "pixel" : "geographic"},
              {"features", features}};
  if (!set.scene_id.empty()) doc["scene_id"] = set.scene_id;
  return doc.dump();
}

namespace {

double segment_distance(double px, double py, const std::array<double, 2>& a, const std::array<double, 2>& b) {
  const double dx = b[0] - a[0], dy = b[1] - a[1];
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((px - a[0]) * dx + (py - a[1]) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double qx = a[0] + t * dx - px, qy = a[1] + t * dy - py;
  return std::sqrt(qx * qx + qy * qy);
}

bool inside_polygon(double px, double py, const std::vector<std::array<double, 2>>& ring) {
  bool in = false;
  for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
    const auto& a = ring[i];
    const auto& b = ring[j];
    if ((a[1] > py) != (b[1] > py)) {
      const double x = a[0] + (py - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
      if (px < x) in = !in;
    }
  }
  return in;
}

}  // namespace

RasterizedScribbles rasterize_scribbles(const ScribbleSet& set, const raster::SceneCube& cube) {
  const long rows = static_cast<long>(cube.rows()), cols = static_cast<long>(cube.cols());
  const auto& geo = cube.geo();
  if (set.space == CoordinateSpace::Geographic && !geo.geographic()) {
    throw Error(ErrorCode::GeoreferenceMissing, "geographic scribbles need a geographic scene transform");
  }
  // Bit per class for every pixel.
  std::vector<std::uint8_t> claims(cube.rows() * cube.cols(), 0);

  for (std::size_t si = 0; si < set.strokes.size(); ++si) {
    const Stroke& s = set.strokes[si];
    std::vector<std::array<double, 2>> pts;
    pts.reserve(s.points.size());
    for (const auto& p : s.points) pts.push_back(set.space == CoordinateSpace::Pixel ? p : geo.to_pixel(p[0], p[1]));
    const double half = s.width_px / 2.0;
    double minx = pts[0][0], maxx = minx, miny = pts[0][1], maxy = miny;
    for (const auto& p : pts) {
      minx = std::min(minx, p[0]);
      maxx = std::max(maxx, p[0]);
      miny = std::min(miny, p[1]);
      maxy = std::max(maxy, p[1]);
    }
    const long c0 = std::max(0L, static_cast<long>(std::ceil(minx - half)));
    const long c1 = std::min(cols - 1, static_cast<long>(std::floor(maxx + half)));
    const long r0 = std::max(0L, static_cast<long>(std::ceil(miny - half)));
    const long r1 = std::min(rows - 1, static_cast<long>(std::floor(maxy + half)));
    if (c0 > c1 || r0 > r1) {
      throw Error(ErrorCode::OutOfExtent, "stroke " + std::to_string(si) + " lies outside the scene",
                  std::string(to_string(s.cls)));
    }
    const std::uint8_t bit = static_cast<std::uint8_t>(1u << static_cast<unsigned>(s.cls));
    for (long r = r0; r <= r1; ++r) {
      for (long c = c0; c <= c1; ++c) {
        const double x = static_cast<double>(c), y = static_cast<double>(r);
        bool hit = s.polygon && pts.size() >= 3 && inside_polygon(x, y, pts);
        if (!hit) {
          if (pts.size() == 1) {
            hit = segment_distance(x, y, pts[0], pts[0]) <= half;
          } else {
            const std::size_t edges = s.polygon ? pts.size() : pts.size() - 1;
            for (std::size_t e = 0; e < edges && !hit; ++e) {
              hit = segment_distance(x, y, pts[e], pts[(e + 1) % pts.size()]) <= half;
            }
          }
        }
        if (hit) claims[static_cast<std::size_t>(r * cols + c)] |= bit;
      }
    }
  }

  RasterizedScribbles out;
  const Mask& mask = cube.nodata();
  for (std::size_t i = 0; i < claims.size(); ++i) {
    const std::uint8_t b = claims[i];
    if (b == 0) continue;
    if ((b & (b - 1)) != 0) {
      ++out.conflicts;
      continue;
    }
    if (mask[i]) {
      ++out.masked;
      continue;
    }
    const auto cls = b == 1 ? StrokeClass::Urban : b == 2 ? StrokeClass::Mining : StrokeClass::Negative;
    out.samples.push_back({i, cls});
  }
  return out;
}

}  // namespace minescape::udm
