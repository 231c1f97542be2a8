#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "minescape/grid.hpp"

namespace minescape::raster {

enum class SampleType { UInt8, UInt16, Int16, UInt32, Int32, Float32, Float64 };

/// Decoded contents of the first image directory of a (Geo)TIFF file.
/// Sample values are returned unscaled.
struct TiffImage {
  std::size_t width = 0;
  std::size_t height = 0;
  SampleType sample_type = SampleType::UInt16;
  std::vector<Grid<double>> bands;
  /// Per-band names from the GDAL_METADATA DESCRIPTION items; empty when the
  /// file carries none.
  std::vector<std::string> band_names;
  std::optional<std::array<double, 3>> pixel_scale;  // ModelPixelScaleTag
  std::optional<std::array<double, 6>> tiepoint;     // ModelTiepointTag (first point)
  std::optional<int> epsg;
  std::optional<double> nodata;                      // GDAL_NODATA
  std::optional<std::string> datetime;               // TIFF DateTime
};

bool is_integer(SampleType t);

/// Baseline TIFF reader: classic (non-Big) TIFF in either byte order,
/// strips or tiles, chunky or planar layout, no compression or Deflate,
/// optional horizontal predictor. Anything else raises DecodeError.
TiffImage read_tiff(std::span<const std::uint8_t> bytes);
TiffImage read_tiff(const std::filesystem::path& path);

/// Little-endian, uncompressed, planar-separate writer. Only UInt16 and
/// Float32 sample types are written. Band names go into GDAL_METADATA.
std::vector<std::uint8_t> encode_tiff(const TiffImage& image);
void write_tiff(const std::filesystem::path& path, const TiffImage& image);

}  // namespace minescape::raster
