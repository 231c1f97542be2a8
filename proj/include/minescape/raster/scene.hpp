#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "minescape/date.hpp"
#include "minescape/grid.hpp"

namespace minescape::raster {

/// The ten Sentinel-2 bands the pipeline consumes, in canonical order.
inline constexpr std::array<std::string_view, 10> kRequiredBands = {
    "B02", "B03", "B04", "B05", "B06", "B07", "B08", "B8A", "B11", "B12"};

/// Meters per degree of latitude (and of longitude at the equator) under the
/// equirectangular approximation used throughout.
inline constexpr double kMetersPerDegree = 111320.0;

/// Integer digital numbers are divided by this to obtain reflectance.
inline constexpr double kReflectanceScale = 10000.0;

/// North-up affine georeference. The origin is the outer corner of the
/// top-left pixel.
struct GeoTransform {
  double origin_lon = 0.0;
  double origin_lat = 0.0;
  double pixel_dlon = 0.0;  // degrees per column; 0 when the CRS is projected
  double pixel_dlat = 0.0;  // degrees per row (positive, rows run south)
  double pixel_size_m = 0.0;

  bool geographic() const noexcept { return pixel_dlon > 0.0 && pixel_dlat > 0.0; }
  /// Fractional pixel coordinates (x = column, y = row) of a lon/lat, where
  /// integer coordinates are pixel centers.
  std::array<double, 2> to_pixel(double lon, double lat) const;
  std::array<double, 2> to_lonlat(double x, double y) const;

  bool operator==(const GeoTransform&) const = default;
};

/// Immutable multi-band scene. Bands hold reflectance; `nodata` marks pixels
/// every consumer must ignore.
class SceneCube {
 public:
  SceneCube(std::string scene_id, std::map<std::string, Grid<double>, std::less<>> bands, GeoTransform geo,
            Mask nodata, Date capture_date, std::string crs_code);

  const std::string& scene_id() const noexcept { return scene_id_; }
  const GeoTransform& geo() const noexcept { return geo_; }
  const Mask& nodata() const noexcept { return nodata_; }
  const Date& capture_date() const noexcept { return capture_date_; }
  const std::string& crs_code() const noexcept { return crs_code_; }
  std::size_t rows() const noexcept { return nodata_.rows(); }
  std::size_t cols() const noexcept { return nodata_.cols(); }

  bool has_band(std::string_view name) const;
  /// Throws Error(MissingBand) naming the band.
  const Grid<double>& band(std::string_view name) const;
  const std::map<std::string, Grid<double>, std::less<>>& bands() const noexcept { return bands_; }

  std::size_t valid_count() const;

 private:
  std::string scene_id_;
  std::map<std::string, Grid<double>, std::less<>> bands_;
  GeoTransform geo_;
  Mask nodata_;
  Date capture_date_;
  std::string crs_code_;
};

/// Optional JSON sidecar at "<scene path>.json":
///   {"scene_id": "...", "capture_date": "YYYY-MM-DD", "bands": ["B02", ...], "nodata": 0}
/// `bands` gives the positional band order when the raster has no names.
std::filesystem::path sidecar_path(const std::filesystem::path& scene_path);

/// Reads a GeoTIFF scene. Masks pixels where any required band equals the
/// declared nodata value, where all required bands are zero, or where a
/// sample is not finite.
SceneCube load_scene(const std::filesystem::path& path);

/// Writes the ten required bands as UInt16 digital numbers with band names,
/// georeference (EPSG:4326), capture date and nodata=0. Masked pixels are
/// written as zero in every band.
void save_scene(const std::filesystem::path& path, const SceneCube& cube);

}  // namespace minescape::raster
