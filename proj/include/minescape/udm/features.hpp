#pragma once

#include <array>
#include <span>
#include <string_view>
#include <vector>

#include "minescape/grid.hpp"
#include "minescape/raster/scene.hpp"

namespace minescape::udm {

inline constexpr std::size_t kFeatureCount = 11;
inline constexpr std::size_t kDefaultTextureWindow = 5;

/// Feature order: the ten required bands in canonical order, then texture.
std::array<std::string_view, kFeatureCount> feature_names();

/// Per-pixel feature vectors stored row-major, kFeatureCount values each.
struct FeatureStack {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;
  Mask valid;

  std::size_t size() const noexcept { return rows * cols; }
  std::span<const double> at(std::size_t pixel) const {
    return {data.data() + pixel * kFeatureCount, kFeatureCount};
  }
  std::span<double> at(std::size_t pixel) { return {data.data() + pixel * kFeatureCount, kFeatureCount}; }
};

/// Brightness proxy (B04 + B03 + B02) / 3.
Grid<double> brightness(const raster::SceneCube& cube);

/// Population standard deviation of `values` over the window centred on each
/// pixel, using only in-bounds pixels not flagged in `mask`. Pixels whose
/// window holds no usable sample get 0.
Grid<double> local_std(const Grid<double>& values, const Mask& mask, std::size_t window);

/// Ten reflectances plus the local std of brightness. A pixel's features are
/// valid when the pixel itself is unmasked. Throws ConfigError for an even
/// window or one smaller than 3.
FeatureStack extract_features(const raster::SceneCube& cube, std::size_t texture_window = kDefaultTextureWindow);

}  // namespace minescape::udm
