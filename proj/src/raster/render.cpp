#include "minescape/raster/render.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "minescape/error.hpp"

namespace minescape::raster {

namespace {

// Snap to a 1e-9 grid so ulp-level noise in the stretch cannot flip the
// final 8-bit rounding (keeps renders invariant under global band scaling).
double snap(double v) { return std::round(v * 1e9) / 1e9; }

std::array<double, 3> rgb_to_hsv(double r, double g, double b) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double delta = mx - mn;
  double h = 0.0;
  if (delta > 0.0) {
    if (mx == r) h = std::fmod((g - b) / delta, 6.0);
    else if (mx == g) h = (b - r) / delta + 2.0;
    else h = (r - g) / delta + 4.0;
    if (h < 0.0) h += 6.0;
  }
  const double s = mx > 0.0 ? delta / mx : 0.0;
  return {h, s, mx};
}

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  const double c = v * s;
  const double x = c * (1.0 - std::fabs(std::fmod(h, 2.0) - 1.0));
  const double m = v - c;
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(h) % 6) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  return {r + m, g + m, b + m};
}

std::uint8_t to_byte(double unit) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(unit, 0.0, 1.0) * 255.0));
}

}  // namespace

double percentile(std::vector<double>& values, double pct) {
  if (values.empty()) throw Error(ErrorCode::EmptyScene, "percentile of empty sample");
  std::sort(values.begin(), values.end());
  const double pos = pct / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

RenderImage render_rgb(const SceneCube& cube, const EnhanceParams& params) {
  if (!(params.low_pct >= 0.0 && params.low_pct < params.high_pct && params.high_pct <= 100.0)) {
    throw Error(ErrorCode::ConfigError, "require 0 <= low_pct < high_pct <= 100");
  }
  if (params.sat_gain < 0.0) throw Error(ErrorCode::ConfigError, "sat_gain must be nonnegative");
  if (cube.valid_count() == 0) throw Error(ErrorCode::EmptyScene, "scene " + cube.scene_id() + " has no valid pixels");

  const std::array<const Grid<double>*, 3> channels = {&cube.band("B04"), &cube.band("B03"), &cube.band("B02")};
  const Mask& mask = cube.nodata();
  std::array<double, 3> lo{}, hi{};
  std::vector<double> sample;
  sample.reserve(cube.valid_count());
  for (std::size_t c = 0; c < 3; ++c) {
    sample.clear();
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (!mask[i]) sample.push_back((*channels[c])[i]);
    }
    lo[c] = percentile(sample, params.low_pct);
    hi[c] = percentile(sample, params.high_pct);
  }

  RenderImage out;
  out.pixels = Grid<Rgb>(cube.rows(), cube.cols(), Rgb{0, 0, 0});
  out.provenance = {"rgb:B04,B03,B02", cube.scene_id(), cube.capture_date()};
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) continue;
    std::array<double, 3> unit{};
    for (std::size_t c = 0; c < 3; ++c) {
      const double span = hi[c] - lo[c];
      const double t = span > 0.0 ? ((*channels[c])[i] - lo[c]) / span : 0.0;
      unit[c] = snap(std::clamp(t, 0.0, 1.0));
    }
    auto [h, s, v] = rgb_to_hsv(unit[0], unit[1], unit[2]);
    s = std::min(1.0, s * params.sat_gain);
    const auto rgb = hsv_to_rgb(h, s, v);
    out.pixels[i] = {to_byte(snap(rgb[0])), to_byte(snap(rgb[1])), to_byte(snap(rgb[2]))};
  }
  return out;
}

}  // namespace minescape::raster
