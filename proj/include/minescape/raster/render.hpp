#pragma once

#include <optional>
#include <string>
#include <vector>

#include "minescape/date.hpp"
#include "minescape/grid.hpp"
#include "minescape/raster/png.hpp"
#include "minescape/raster/scene.hpp"

namespace minescape::raster {

struct RenderProvenance {
  std::string source;  // e.g. "rgb:B04,B03,B02" or "index:NDVI"
  std::string scene_id;
  std::optional<Date> capture_date;
};

/// 3-channel 8-bit image ready for a multimodal model or a PNG file.
struct RenderImage {
  Grid<Rgb> pixels;
  RenderProvenance provenance;

  std::size_t rows() const noexcept { return pixels.rows(); }
  std::size_t cols() const noexcept { return pixels.cols(); }
  std::vector<std::uint8_t> to_png() const { return encode_png_rgb(pixels); }
};

struct EnhanceParams {
  double low_pct = 2.0;
  double high_pct = 98.0;
  double sat_gain = 1.2;
};

/// Percentile with linear interpolation between order statistics
/// (position p/100 * (n-1) in the sorted sample). `values` is reordered.
double percentile(std::vector<double>& values, double pct);

/// True-color composite (B04, B03, B02). Each channel is stretched linearly
/// between its low and high percentile over valid pixels and clamped to
/// [0, 255]; saturation is then multiplied by `sat_gain` in HSV space
/// (hue and value unchanged). Masked pixels are black.
RenderImage render_rgb(const SceneCube& cube, const EnhanceParams& params = {});

}  // namespace minescape::raster
