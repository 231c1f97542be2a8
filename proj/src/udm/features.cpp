#include "minescape/udm/features.hpp"

#include <algorithm>
#include <cmath>

namespace minescape::udm {

std::array<std::string_view, kFeatureCount> feature_names() {
  std::array<std::string_view, kFeatureCount> names{};
  for (std::size_t i = 0; i < raster::kRequiredBands.size(); ++i) names[i] = raster::kRequiredBands[i];
  names[kFeatureCount - 1] = "texture";
  return names;
}

Grid<double> brightness(const raster::SceneCube& cube) {
  const auto& r = cube.band("B04");
  const auto& g = cube.band("B03");
  const auto& b = cube.band("B02");
  Grid<double> out(cube.rows(), cube.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (r[i] + g[i] + b[i]) / 3.0;
  return out;
}

Grid<double> local_std(const Grid<double>& values, const Mask& mask, std::size_t window) {
  require_same_shape(values, mask, "local_std");
  const std::size_t rows = values.rows(), cols = values.cols();
  const std::size_t half = window / 2;
  Grid<double> out(rows, cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t r0 = r >= half ? r - half : 0, r1 = std::min(rows, r + half + 1);
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t c0 = c >= half ? c - half : 0, c1 = std::min(cols, c + half + 1);
      double sum = 0.0, lo = 0.0, hi = 0.0;
      std::size_t n = 0;
      for (std::size_t rr = r0; rr < r1; ++rr) {
        for (std::size_t cc = c0; cc < c1; ++cc) {
          if (mask(rr, cc)) continue;
          const double v = values(rr, cc);
          lo = n == 0 ? v : std::min(lo, v);
          hi = n == 0 ? v : std::max(hi, v);
          sum += v;
          ++n;
        }
      }
      if (n == 0 || lo == hi) continue;
      const double m = sum / static_cast<double>(n);
      double ss = 0.0;
      for (std::size_t rr = r0; rr < r1; ++rr) {
        for (std::size_t cc = c0; cc < c1; ++cc) {
          if (!mask(rr, cc)) ss += (values(rr, cc) - m) * (values(rr, cc) - m);
        }
      }
      out(r, c) = std::sqrt(ss / static_cast<double>(n));
    }
  }
  return out;
}

FeatureStack extract_features(const raster::SceneCube& cube, std::size_t texture_window) {
  if (texture_window < 3 || texture_window % 2 == 0) {
    throw Error(ErrorCode::ConfigError, "texture_window must be odd and >= 3");
  }
  std::array<const Grid<double>*, 10> bands{};
  for (std::size_t b = 0; b < bands.size(); ++b) bands[b] = &cube.band(raster::kRequiredBands[b]);

  const Grid<double> tex = local_std(brightness(cube), cube.nodata(), texture_window);
  FeatureStack fs;
  fs.rows = cube.rows();
  fs.cols = cube.cols();
  fs.data.assign(fs.size() * kFeatureCount, 0.0);
  fs.valid = Mask(fs.rows, fs.cols, 0);
  for (std::size_t i = 0; i < fs.size(); ++i) {
    if (cube.nodata()[i]) continue;
    auto v = fs.at(i);
    for (std::size_t b = 0; b < bands.size(); ++b) v[b] = (*bands[b])[i];
    v[kFeatureCount - 1] = tex[i];
    fs.valid[i] = 1;
  }
  return fs;
}

}  // namespace minescape::udm
