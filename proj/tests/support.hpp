#pragma once

#include <atomic>
#include <filesystem>
#include <cstdlib>
#include <functional>
#include <optional>
#include <random>
#include <string>

#include <unistd.h>

#include <gtest/gtest.h>

#include "minescape/date.hpp"
#include "minescape/error.hpp"
#include "minescape/raster/scene.hpp"

namespace testing_support {

namespace fs = std::filesystem;
using minescape::Date;

inline fs::path source_dir() { return fs::path(MINESCAPE_SOURCE_DIR); }
inline fs::path data_dir() { return source_dir() / "tests" / "data"; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<unsigned> counter{0};
    path_ = fs::temp_directory_path() /
            ("minescape-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& p) const { return path_ / p; }

 private:
  fs::path path_;
};

/// Code of the Error thrown by f; records a failure when nothing is thrown.
template <typename F>
minescape::ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const minescape::Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return minescape::ErrorCode::IoError;
}

/// Sets an environment variable for the lifetime of the object.
class ScopedEnv {
 public:
  ScopedEnv(const char* name, const char* value) : name_(name) {
    if (const char* old = std::getenv(name)) old_ = old;
    ::setenv(name, value, 1);
  }
  ~ScopedEnv() {
    if (old_) ::setenv(name_, old_->c_str(), 1);
    else ::unsetenv(name_);
  }
  ScopedEnv(const ScopedEnv&) = delete;
  ScopedEnv& operator=(const ScopedEnv&) = delete;

 private:
  const char* name_;
  std::optional<std::string> old_;
};

inline Date ymd(int y, unsigned m, unsigned d) {
  return Date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
}

inline minescape::raster::GeoTransform test_geo(double lon = 10.0, double lat = 45.0) {
  minescape::raster::GeoTransform g;
  g.origin_lon = lon;
  g.origin_lat = lat;
  g.pixel_dlon = 1e-4;
  g.pixel_dlat = 1e-4;
  g.pixel_size_m = 10.0;
  return g;
}

/// Cube with every required band filled by value(band_index, row, col).
inline minescape::raster::SceneCube make_cube(
    std::size_t rows, std::size_t cols, const std::function<double(std::size_t, std::size_t, std::size_t)>& value,
    const std::function<bool(std::size_t, std::size_t)>& masked = {}, const std::string& id = "TEST") {
  std::map<std::string, minescape::Grid<double>, std::less<>> bands;
  std::size_t b = 0;
  for (auto name : minescape::raster::kRequiredBands) {
    minescape::Grid<double> g(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) g(r, c) = value(b, r, c);
    }
    bands.emplace(std::string(name), std::move(g));
    ++b;
  }
  minescape::Mask mask(rows, cols);
  if (masked) {
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) mask(r, c) = masked(r, c) ? 1 : 0;
    }
  }
  return minescape::raster::SceneCube(id, std::move(bands), test_geo(), std::move(mask), ymd(2024, 1, 15),
                                      "EPSG:4326");
}

/// Random reflectance cube; about `masked_share` of pixels masked.
inline minescape::raster::SceneCube random_cube(std::size_t rows, std::size_t cols, std::uint64_t seed,
                                                double masked_share = 0.1, const std::string& id = "RAND") {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(10 * rows * cols);
  for (auto& x : v) x = u(rng) < 0.03 ? 0.0 : u(rng);  // zeros exercise the denominator rule
  std::vector<char> m(rows * cols);
  for (auto& x : m) x = u(rng) < masked_share;
  return make_cube(
      rows, cols, [&](std::size_t b, std::size_t r, std::size_t c) { return v[(b * rows + r) * cols + c]; },
      [&](std::size_t r, std::size_t c) { return m[r * cols + c] != 0; }, id);
}

}  // namespace testing_support
