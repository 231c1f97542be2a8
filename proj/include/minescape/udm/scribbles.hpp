#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "minescape/raster/scene.hpp"

namespace minescape::udm {

enum class StrokeClass : std::uint8_t { Urban, Mining, Negative };

std::string_view to_string(StrokeClass c);
/// Throws BadRequest for anything but "urban", "mining" or "negative".
StrokeClass stroke_class_from_string(std::string_view name);

enum class CoordinateSpace { Pixel, Geographic };

struct Stroke {
  StrokeClass cls = StrokeClass::Urban;
  bool polygon = false;                       // LineString otherwise
  std::vector<std::array<double, 2>> points;  // (x, y) = (col, row) or (lon, lat)
  int width_px = 1;
};

struct ScribbleSet {
  std::string scene_id;
  CoordinateSpace space = CoordinateSpace::Pixel;
  std::vector<Stroke> strokes;
};

/// GeoJSON FeatureCollection of LineString/Polygon features with properties
/// {"class", "width_px"}. Optional top-level members: "scene_id" and
/// "coordinate_space" ("pixel", the default, or "geographic"). Polygon
/// features use the outer ring only. Throws BadRequest on schema errors.
ScribbleSet parse_scribbles(std::string_view geojson);
std::string to_geojson(const ScribbleSet& set);

struct Sample {
  std::size_t pixel = 0;  // row-major index
  StrokeClass cls = StrokeClass::Urban;
};

struct RasterizedScribbles {
  std::vector<Sample> samples;  // ascending pixel index
  std::size_t conflicts = 0;    // pixels claimed by more than one class, dropped
  std::size_t masked = 0;       // stroke pixels dropped because they are nodata
};

/// A pixel belongs to a stroke when its center lies within width_px / 2 of
/// the polyline (or of the polygon boundary, or inside the polygon).
/// Pixels claimed by two classes are dropped and counted once each; masked
/// pixels are dropped. A stroke that misses the scene entirely raises
/// OutOfExtent; geographic strokes on a scene without a geographic
/// transform raise GeoreferenceMissing.
RasterizedScribbles rasterize_scribbles(const ScribbleSet& set, const raster::SceneCube& cube);

}  // namespace minescape::udm
