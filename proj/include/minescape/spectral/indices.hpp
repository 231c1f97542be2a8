#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "minescape/grid.hpp"
#include "minescape/raster/render.hpp"
#include "minescape/raster/scene.hpp"

namespace minescape::spectral {

enum class IndexKind { NDVI, NDBI, FMI };

std::string_view to_string(IndexKind kind);
IndexKind index_kind_from_string(std::string_view name);

/// Values are meaningful only where `valid` is set.
struct IndexGrid {
  Grid<double> values;
  Mask valid;
};

struct IndexRaster {
  IndexKind kind = IndexKind::NDVI;
  Grid<double> values;
  Mask valid;
};

/// (a - b) / (a + b) at unmasked pixels with a + b != 0.
IndexGrid normalized_difference(const Grid<double>& a, const Grid<double>& b, const Mask& nodata);

/// a / b at unmasked pixels with b != 0.
IndexGrid band_ratio(const Grid<double>& a, const Grid<double>& b, const Mask& nodata);

/// NDVI = (B08 - B04) / (B08 + B04)
IndexRaster ndvi(const raster::SceneCube& cube);
/// NDBI = (B11 - B08) / (B11 + B08)
IndexRaster ndbi(const raster::SceneCube& cube);
/// Ferrous ratio FMI = B11 / B08
IndexRaster fmi(const raster::SceneCube& cube);

IndexRaster compute_index(const raster::SceneCube& cube, IndexKind kind);

struct PaletteAnchor {
  double value = 0.0;
  raster::Rgb color{};
};

/// Piecewise-linear colormap. Values below the first or above the last
/// anchor clamp to the end colors; channels round half away from zero.
struct Palette {
  std::string name;
  int version = 1;
  std::vector<PaletteAnchor> anchors;  // strictly ascending values
  raster::Rgb invalid{0, 0, 0};

  raster::Rgb color_at(double value) const;
};

Palette parse_palette(std::string_view json_text);
/// The versioned palette shipped under data/palettes/ for `kind`.
const Palette& default_palette(IndexKind kind);

/// Colors every valid pixel through `palette`; invalid pixels take
/// `palette.invalid`. Throws EmptyScene for a zero-size raster.
raster::RenderImage render_index(const IndexRaster& raster, const Palette& palette);
raster::RenderImage render_index(const IndexRaster& raster);

/// Single-band Float32 GeoTIFF; invalid pixels carry the nodata value -9999.
void save_index_tiff(const std::filesystem::path& path, const IndexRaster& raster, const raster::GeoTransform& geo);

}  // namespace minescape::spectral
