#include <gtest/gtest.h>

#include <cmath>
#include <queue>

#include "../support.hpp"
#include "minescape/error.hpp"
#include "minescape/pipeline/demo.hpp"
#include "minescape/spectral/indices.hpp"
#include "minescape/udm/features.hpp"
#include "minescape/udm/model.hpp"
#include "minescape/udm/scribbles.hpp"

using namespace minescape;
using namespace minescape::udm;
using namespace testing_support;

namespace {

Stroke stroke(StrokeClass cls, std::vector<std::array<double, 2>> pts, int width = 1, bool polygon = false) {
  Stroke s;
  s.cls = cls;
  s.points = std::move(pts);
  s.width_px = width;
  s.polygon = polygon;
  return s;
}

ScribbleSet pixel_set(std::vector<Stroke> strokes) {
  ScribbleSet s;
  s.scene_id = "TEST";
  s.strokes = std::move(strokes);
  return s;
}

// Hand-built feature stack: one row, feature vectors given explicitly.
FeatureStack stack_of(const std::vector<std::array<double, kFeatureCount>>& rows_of_features) {
  FeatureStack fs;
  fs.rows = 1;
  fs.cols = rows_of_features.size();
  fs.valid = Mask(1, fs.cols, 1);
  for (const auto& v : rows_of_features) fs.data.insert(fs.data.end(), v.begin(), v.end());
  return fs;
}

spectral::IndexRaster no_ndvi(std::size_t rows, std::size_t cols) {
  spectral::IndexRaster r;
  r.values = Grid<double>(rows, cols);
  r.valid = Mask(rows, cols, 0);
  return r;
}

// Brute-force 8-connected component sizes of `value` pixels.
std::vector<std::size_t> oracle_components(const Grid<std::uint8_t>& g, std::uint8_t value) {
  std::vector<std::size_t> sizes;
  Mask seen(g.rows(), g.cols());
  for (std::size_t r0 = 0; r0 < g.rows(); ++r0) {
    for (std::size_t c0 = 0; c0 < g.cols(); ++c0) {
      if (g(r0, c0) != value || seen(r0, c0)) continue;
      std::size_t n = 0;
      std::queue<std::pair<long, long>> q;
      q.push({static_cast<long>(r0), static_cast<long>(c0)});
      seen(r0, c0) = 1;
      while (!q.empty()) {
        auto [r, c] = q.front();
        q.pop();
        ++n;
        for (long dr = -1; dr <= 1; ++dr) {
          for (long dc = -1; dc <= 1; ++dc) {
            const long rr = r + dr, cc = c + dc;
            if (rr < 0 || cc < 0 || rr >= static_cast<long>(g.rows()) || cc >= static_cast<long>(g.cols())) continue;
            if (g(rr, cc) != value || seen(rr, cc)) continue;
            seen(rr, cc) = 1;
            q.push({rr, cc});
          }
        }
      }
      sizes.push_back(n);
    }
  }
  std::sort(sizes.begin(), sizes.end());
  return sizes;
}

}  // namespace

TEST(Features, ConstantCubeHasZeroTexture) {
  const auto cube = make_cube(6, 6, [](std::size_t b, std::size_t, std::size_t) { return 0.05 * static_cast<double>(b + 1); });
  const auto fs = extract_features(cube);
  for (std::size_t i = 0; i < fs.size(); ++i) {
    EXPECT_EQ(fs.at(i)[10], 0.0);
    EXPECT_EQ(fs.at(i)[0], 0.05);
    EXPECT_EQ(fs.at(i)[9], 0.5);
  }
}

TEST(Features, CheckerboardTextureMatchesWindowStd) {
  const std::size_t n = 9, w = 5;
  const auto cube = make_cube(
      n, n, [](std::size_t, std::size_t r, std::size_t c) { return (r + c) % 2 ? 0.3 : 0.1; },
      [](std::size_t r, std::size_t c) { return r == 4 && c == 6; });
  const auto fs = extract_features(cube, w);
  const long h = static_cast<long>(w / 2);
  for (long r = 0; r < static_cast<long>(n); ++r) {
    for (long c = 0; c < static_cast<long>(n); ++c) {
      if (r == 4 && c == 6) continue;
      std::vector<double> v;
      for (long rr = r - h; rr <= r + h; ++rr) {
        for (long cc = c - h; cc <= c + h; ++cc) {
          if (rr < 0 || cc < 0 || rr >= static_cast<long>(n) || cc >= static_cast<long>(n)) continue;
          if (rr == 4 && cc == 6) continue;
          v.push_back((rr + cc) % 2 ? 0.3 : 0.1);
        }
      }
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      const auto i = static_cast<std::size_t>(r) * n + static_cast<std::size_t>(c);
      EXPECT_NEAR(fs.at(i)[10], std::sqrt(ss / static_cast<double>(v.size())), 1e-12) << r << "," << c;
      EXPECT_TRUE(std::isfinite(fs.at(i)[10]));
    }
  }
  EXPECT_EQ(fs.valid(4, 6), 0);
  EXPECT_EQ(fs.valid(0, 0), 1);
}

TEST(Features, WindowMustBeOddAndAtLeastThree) {
  const auto cube = random_cube(4, 4, 1);
  EXPECT_EQ(code_of([&] { extract_features(cube, 4); }), ErrorCode::ConfigError);
  EXPECT_EQ(code_of([&] { extract_features(cube, 1); }), ErrorCode::ConfigError);
  EXPECT_NO_THROW(extract_features(cube, 3));
}

TEST(Scribbles, OnePixelRowStroke) {
  const auto cube = make_cube(
      8, 10, [](std::size_t, std::size_t, std::size_t) { return 0.2; }, [](std::size_t r, std::size_t c) { return r == 5 && c == 2; });
  const auto rs = rasterize_scribbles(pixel_set({stroke(StrokeClass::Mining, {{0, 5}, {9, 5}})}), cube);
  ASSERT_EQ(rs.samples.size(), 9u);
  EXPECT_EQ(rs.masked, 1u);
  for (const auto& s : rs.samples) {
    EXPECT_EQ(s.pixel / 10, 5u);
    EXPECT_EQ(s.cls, StrokeClass::Mining);
  }
}

TEST(Scribbles, CrossingClassesDropTheSharedPixel) {
  const auto cube = random_cube(8, 8, 2, 0.0);
  const auto rs = rasterize_scribbles(
      pixel_set({stroke(StrokeClass::Urban, {{0, 3}, {7, 3}}), stroke(StrokeClass::Negative, {{4, 0}, {4, 7}})}), cube);
  EXPECT_EQ(rs.conflicts, 1u);
  EXPECT_EQ(rs.samples.size(), 14u);
  for (const auto& s : rs.samples) EXPECT_NE(s.pixel, 3u * 8 + 4);
}

TEST(Scribbles, StrokeOverSwathLeavesClassEmpty) {
  const auto cube = make_cube(
      8, 8, [](std::size_t b, std::size_t r, std::size_t c) { return 0.01 * static_cast<double>(1 + b + r * c); },
      [](std::size_t, std::size_t c) { return c < 2; });
  const auto rs = rasterize_scribbles(pixel_set({stroke(StrokeClass::Mining, {{0, 0}, {0, 7}}),
                                                 stroke(StrokeClass::Urban, {{5, 0}, {5, 7}}),
                                                 stroke(StrokeClass::Negative, {{7, 0}, {7, 7}})}),
                                      cube);
  EXPECT_EQ(rs.masked, 8u);
  const auto fs = extract_features(cube);
  try {
    train(fs, rs.samples);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientSamples);
    EXPECT_EQ(e.subject(), "mining");
  }
}

TEST(Scribbles, OutsideSceneIsOutOfExtent) {
  const auto cube = random_cube(8, 8, 3);
  EXPECT_EQ(code_of([&] { rasterize_scribbles(pixel_set({stroke(StrokeClass::Urban, {{50, 50}, {60, 60}})}), cube); }),
            ErrorCode::OutOfExtent);
}

TEST(Scribbles, GeographicStrokesUseTheTransform) {
  const auto cube = random_cube(10, 10, 4, 0.0);
  ScribbleSet set;
  set.space = CoordinateSpace::Geographic;
  const auto a = cube.geo().to_lonlat(1, 2), b = cube.geo().to_lonlat(8, 2);
  set.strokes = {stroke(StrokeClass::Urban, {a, b})};
  const auto rs = rasterize_scribbles(set, cube);
  ASSERT_EQ(rs.samples.size(), 8u);
  EXPECT_EQ(rs.samples.front().pixel, 2u * 10 + 1);
}

TEST(Scribbles, PolygonCoversInterior) {
  const auto cube = random_cube(10, 10, 5, 0.0);
  const auto rs = rasterize_scribbles(pixel_set({stroke(StrokeClass::Mining, {{2, 2}, {6, 2}, {6, 6}, {2, 6}}, 1, true)}), cube);
  EXPECT_EQ(rs.samples.size(), 25u);
}

TEST(Scribbles, GeoJsonRoundTripKeepsClassAndWidth) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 50; ++t) {
    ScribbleSet set;
    set.scene_id = "S" + std::to_string(t);
    const int n = 1 + static_cast<int>(rng() % 5);
    for (int i = 0; i < n; ++i) {
      std::vector<std::array<double, 2>> pts;
      for (int k = 0; k < 2 + static_cast<int>(rng() % 4); ++k) {
        pts.push_back({static_cast<double>(rng() % 640) / 10.0, static_cast<double>(rng() % 640) / 10.0});
      }
      set.strokes.push_back(stroke(static_cast<StrokeClass>(rng() % 3), pts, 1 + static_cast<int>(rng() % 7), rng() % 4 == 0));
    }
    const auto back = parse_scribbles(to_geojson(set));
    EXPECT_EQ(back.scene_id, set.scene_id);
    ASSERT_EQ(back.strokes.size(), set.strokes.size());
    for (std::size_t i = 0; i < set.strokes.size(); ++i) {
      EXPECT_EQ(back.strokes[i].cls, set.strokes[i].cls);
      EXPECT_EQ(back.strokes[i].width_px, set.strokes[i].width_px);
      EXPECT_EQ(back.strokes[i].polygon, set.strokes[i].polygon);
      EXPECT_EQ(back.strokes[i].points, set.strokes[i].points);
    }
  }
}

TEST(Scribbles, SchemaErrorsAreBadRequest) {
  for (const char* bad : {"{}", "[]", R"({"type":"FeatureCollection","features":[{"type":"Feature","properties":{"class":"forest"},"geometry":{"type":"LineString","coordinates":[[0,0],[1,1]]}}]})",
                          R"({"type":"FeatureCollection","features":[{"type":"Feature","properties":{"class":"urban","width_px":0},"geometry":{"type":"LineString","coordinates":[[0,0],[1,1]]}}]})",
                          R"({"type":"FeatureCollection","features":[{"type":"Feature","properties":{"class":"urban"},"geometry":{"type":"Point","coordinates":[0,0]}}]})",
                          "not json"}) {
    EXPECT_EQ(code_of([&] { parse_scribbles(bad); }), ErrorCode::BadRequest) << bad;
  }
}

TEST(Train, TwoSamplesPerClassGiveHandComputedCentroids) {
  std::vector<std::array<double, kFeatureCount>> f;
  for (int i = 0; i < 6; ++i) {
    std::array<double, kFeatureCount> v{};
    for (std::size_t k = 0; k < kFeatureCount; ++k) v[k] = static_cast<double>((i + 1) * (k + 2) % 7) + 0.5 * i;
    f.push_back(v);
  }
  const auto fs = stack_of(f);
  const std::vector<Sample> samples = {{0, StrokeClass::Urban},    {1, StrokeClass::Urban},    {2, StrokeClass::Mining},
                                       {3, StrokeClass::Mining},   {4, StrokeClass::Negative}, {5, StrokeClass::Negative}};
  const auto m = train(fs, samples);
  // Oracle: population mean / std over all six samples, then class means.
  for (std::size_t k = 0; k < kFeatureCount; ++k) {
    double mean = 0.0;
    for (const auto& v : f) mean += v[k];
    mean /= 6.0;
    double ss = 0.0;
    for (const auto& v : f) ss += (v[k] - mean) * (v[k] - mean);
    double sd = std::sqrt(ss / 6.0);
    if (sd <= 1e-12 * std::max(1.0, std::fabs(mean))) sd = 1.0;
    EXPECT_NEAR(m.mean[k], mean, 1e-12);
    EXPECT_NEAR(m.stddev[k], sd, 1e-12);
    auto z = [&](int i) { return (f[i][k] - mean) / sd; };
    EXPECT_NEAR(m.centroids.at(StrokeClass::Urban)[k], (z(0) + z(1)) / 2, 1e-12);
    EXPECT_NEAR(m.centroids.at(StrokeClass::Mining)[k], (z(2) + z(3)) / 2, 1e-12);
    EXPECT_NEAR(m.centroids.at(StrokeClass::Negative)[k], (z(4) + z(5)) / 2, 1e-12);
  }
  EXPECT_EQ(m.sample_counts.at(StrokeClass::Urban), 2u);
}

TEST(Train, StandardizedSamplesHaveZeroMeanUnitStd) {
  const auto cube = random_cube(12, 12, 21, 0.0);
  const auto fs = extract_features(cube);
  std::vector<Sample> samples;
  for (std::size_t i = 0; i < 144; i += 3) samples.push_back({i, static_cast<StrokeClass>((i / 3) % 3)});
  const auto m = train(fs, samples);
  for (std::size_t k = 0; k < kFeatureCount; ++k) {
    double s = 0.0, ss = 0.0;
    for (const auto& smp : samples) s += m.standardize(fs.at(smp.pixel))[k];
    const double mean = s / static_cast<double>(samples.size());
    for (const auto& smp : samples) ss += std::pow(m.standardize(fs.at(smp.pixel))[k] - mean, 2);
    EXPECT_NEAR(mean, 0.0, 1e-9);
    EXPECT_NEAR(std::sqrt(ss / static_cast<double>(samples.size())), 1.0, 1e-9);
  }
}

TEST(Train, SingleSampleAndDegenerateVariance) {
  std::array<double, kFeatureCount> v{};
  v.fill(0.25);
  const auto fs = stack_of({v, v, v});
  const auto m = train(fs, {{0, StrokeClass::Urban}, {1, StrokeClass::Mining}, {2, StrokeClass::Negative}});
  for (std::size_t k = 0; k < kFeatureCount; ++k) {
    EXPECT_EQ(m.stddev[k], 1.0);
    EXPECT_EQ(m.centroids.at(StrokeClass::Urban)[k], 0.0);
  }
}

TEST(Train, MissingClassesAndVetoOption) {
  std::array<double, kFeatureCount> a{}, b{};
  b.fill(1.0);
  const auto fs = stack_of({a, b});
  EXPECT_EQ(code_of([&] { train(fs, {{0, StrokeClass::Urban}, {1, StrokeClass::Mining}}); }), ErrorCode::InsufficientSamples);
  EXPECT_EQ(code_of([&] { train(fs, {{0, StrokeClass::Urban}}, {false}); }), ErrorCode::InsufficientSamples);
  const auto m = train(fs, {{0, StrokeClass::Urban}, {1, StrokeClass::Mining}}, {false});
  EXPECT_FALSE(m.has_negative());
}

TEST(Model, JsonRoundTripAndMismatch) {
  const auto cube = random_cube(8, 8, 8, 0.0);
  const auto fs = extract_features(cube);
  const auto m = train(fs, {{0, StrokeClass::Urban}, {9, StrokeClass::Mining}, {20, StrokeClass::Negative}});
  const auto back = model_from_json(model_to_json(m));
  EXPECT_EQ(back.centroids, m.centroids);
  EXPECT_EQ(back.mean, m.mean);
  EXPECT_EQ(back.stddev, m.stddev);
  auto j = nlohmann::json::parse(model_to_json(m));
  j["version"] = 99;
  EXPECT_EQ(code_of([&] { model_from_json(j.dump()); }), ErrorCode::ModelMismatch);
  j = nlohmann::json::parse(model_to_json(m));
  j["feature_names"][10] = "ndwi";
  EXPECT_EQ(code_of([&] { model_from_json(j.dump()); }), ErrorCode::ModelMismatch);
  auto bad = m;
  bad.feature_names.pop_back();
  EXPECT_EQ(code_of([&] { classify(fs, bad, no_ndvi(8, 8), {}); }), ErrorCode::ModelMismatch);
}

TEST(Classify, CentroidsVetoAndGate) {
  CentroidModel m;
  for (auto n : feature_names()) m.feature_names.emplace_back(n);
  m.mean.fill(0.0);
  m.stddev.fill(1.0);
  Vector u{}, mi{}, ng{};
  u[0] = 1;
  mi[1] = 1;
  ng[0] = -1;
  ng[1] = -1;
  m.centroids = {{StrokeClass::Urban, u}, {StrokeClass::Mining, mi}, {StrokeClass::Negative, ng}};
  EXPECT_EQ(decide(m, u, 0.0), Urban);
  EXPECT_EQ(decide(m, mi, 0.0), Mining);
  Vector near_neg{};
  near_neg[0] = -0.9;
  near_neg[1] = -0.9;
  EXPECT_EQ(decide(m, near_neg, 0.0), Background);
  // Equidistant between urban and negative: background.
  Vector tie{};
  tie[0] = 0.0;
  tie[1] = -0.5;
  EXPECT_EQ(decide(m, tie, 0.0), Background);
  // A margin turns a narrow positive win into background.
  Vector narrow{};
  narrow[0] = 0.2;
  narrow[1] = -0.3;
  ASSERT_EQ(decide(m, narrow, 0.0), Urban);
  EXPECT_EQ(decide(m, narrow, 5.0), Background);

  // NDVI gate on a mining-spectrum pixel.
  const auto fs = stack_of({std::array<double, kFeatureCount>{0, 1}, std::array<double, kFeatureCount>{0, 1}});
  auto ndvi = no_ndvi(1, 2);
  ndvi.valid[0] = 1;
  ndvi.values[0] = 0.8;
  ndvi.valid[1] = 1;
  ndvi.values[1] = 0.1;
  UdmParams p;
  p.ndvi_gate = 0.4;
  const auto lr = classify(fs, m, ndvi, p);
  EXPECT_EQ(lr.labels[0], Background);
  EXPECT_EQ(lr.labels[1], Mining);
}

TEST(ClassifyProperty, ThreeWellSeparatedClustersAreExact) {
  // Three clusters whose centres are more than 10 sigma apart in every band.
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.002);
    const std::size_t n = 48;
    auto region = [&](std::size_t r, std::size_t c) { return c < 16 ? 0 : (c < 32 ? 1 : 2); };  // urban | mining | negative
    const double centres[3] = {0.15, 0.30, 0.45};
    auto cube = make_cube(n, n, [&](std::size_t b, std::size_t r, std::size_t c) {
      const int k = region(r, c);
      return centres[k] + 0.01 * static_cast<double>(b) * (k == 2 ? -1 : 1) + noise(rng);
    });
    const auto fs = extract_features(cube);
    std::vector<Sample> samples;
    for (std::size_t r = 0; r < n; r += 2) {
      for (std::size_t c = 0; c < n; c += 5) {
        const int k = region(r, c);
        samples.push_back({r * n + c, k == 0 ? StrokeClass::Urban : (k == 1 ? StrokeClass::Mining : StrokeClass::Negative)});
      }
    }
    const auto model = train(fs, samples);
    const auto lr = classify(fs, model, no_ndvi(n, n), {});
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        const int k = region(r, c);
        const Label want = k == 0 ? Urban : (k == 1 ? Mining : Background);
        ASSERT_EQ(lr.labels(r, c), want) << seed << " " << r << "," << c;
      }
    }
  }
}

TEST(ClassifyProperty, AffineRescalingOfAFeatureKeepsLabels) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto cube = random_cube(16, 16, 31, 0.05);
  const auto base = extract_features(cube);
  std::vector<Sample> samples;
  for (std::size_t i = 0; i < base.size(); i += 4) {
    if (base.valid[i]) samples.push_back({i, static_cast<StrokeClass>((i / 4) % 3)});
  }
  const auto ref = classify(base, train(base, samples), no_ndvi(16, 16), {});
  for (int t = 0; t < 100; ++t) {
    auto fs = base;
    const std::size_t k = rng() % kFeatureCount;
    double a = u(rng) * 50.0;
    if (std::fabs(a) < 1e-3) a = 1.0;
    const double b = u(rng) * 100.0;
    for (std::size_t i = 0; i < fs.size(); ++i) fs.at(i)[k] = a * fs.at(i)[k] + b;
    const auto lr = classify(fs, train(fs, samples), no_ndvi(16, 16), {});
    EXPECT_EQ(lr.labels, ref.labels) << "feature " << k << " a=" << a << " b=" << b;
  }
}

TEST(Postprocess, OpeningRemovesIsolatedPixel) {
  LabelRaster lr;
  lr.labels = Grid<std::uint8_t>(7, 7, Background);
  lr.labels(3, 3) = Urban;
  UdmParams p;
  p.min_area_px = 1;
  const auto out = postprocess(lr, p);
  EXPECT_EQ(out.labels(3, 3), Background);
  EXPECT_TRUE(out.components.empty());
}

TEST(Postprocess, AreaFilterRemovesSmallBlob) {
  LabelRaster lr;
  lr.labels = Grid<std::uint8_t>(6, 6, Background);
  lr.labels(1, 1) = lr.labels(1, 2) = lr.labels(2, 1) = Mining;
  UdmParams p;
  p.morphology_radius = 0;
  p.min_area_px = 5;
  EXPECT_EQ(postprocess(lr, p).labels(1, 1), Background);
  p.min_area_px = 3;
  EXPECT_EQ(postprocess(lr, p).labels(1, 1), Mining);
}

TEST(Postprocess, MaxAreaKeepsOnlyTheSmallBlob) {
  LabelRaster lr;
  lr.labels = Grid<std::uint8_t>(120, 120, Background);
  for (std::size_t r = 2; r < 7; ++r)
    for (std::size_t c = 2; c < 12; ++c) lr.labels(r, c) = Mining;  // 50 px
  for (std::size_t r = 20; r < 70; ++r)
    for (std::size_t c = 10; c < 110; ++c) lr.labels(r, c) = Mining;  // 5000 px
  EXPECT_EQ(oracle_components(lr.labels, Mining), (std::vector<std::size_t>{50, 5000}));
  UdmParams p;
  p.max_area_px = 1000;
  const auto out = postprocess(lr, p);
  EXPECT_EQ(oracle_components(out.labels, Mining), (std::vector<std::size_t>{50}));
  ASSERT_EQ(out.components.size(), 1u);
  EXPECT_EQ(out.components[0].pixel_count, 50u);
  EXPECT_EQ(out.components[0].bbox, (BoundingBox{2, 2, 6, 11}));
}

TEST(PostprocessProperty, ShrinksOnlyAndRespectsAreaBounds) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 200; ++t) {
    LabelRaster lr;
    lr.labels = Grid<std::uint8_t>(24, 24, Background);
    for (int blob = 0; blob < 6; ++blob) {
      const auto r0 = rng() % 20, c0 = rng() % 20, h = 1 + rng() % 6, w = 1 + rng() % 6;
      const auto lab = static_cast<std::uint8_t>(1 + rng() % 2);
      for (auto r = r0; r < std::min<std::size_t>(24, r0 + h); ++r)
        for (auto c = c0; c < std::min<std::size_t>(24, c0 + w); ++c) lr.labels(r, c) = lab;
    }
    for (int k = 0; k < 30; ++k) lr.labels[rng() % 576] = static_cast<std::uint8_t>(rng() % 3);
    UdmParams p;
    p.morphology_radius = rng() % 2;
    p.min_area_px = 1 + rng() % 8;
    p.max_area_px = p.min_area_px + rng() % 40;
    const auto out = postprocess(lr, p);
    for (std::size_t i = 0; i < out.labels.size(); ++i) {
      if (out.labels[i] != Background) EXPECT_EQ(out.labels[i], lr.labels[i]);
    }
    std::size_t labeled = 0;
    for (const auto& c : out.components) {
      EXPECT_GE(c.pixel_count, p.min_area_px);
      EXPECT_LE(c.pixel_count, p.max_area_px);
      labeled += c.pixel_count;
    }
    EXPECT_EQ(labeled, static_cast<std::size_t>(std::count_if(out.labels.begin(), out.labels.end(), [](auto v) { return v != 0; })));
  }
}

TEST(LayoutFixture, MiningAndBothTownsLabeledRoadAndSwathOmitted) {
  const auto scene = pipeline::demo::layout_scene();
  const auto fs = extract_features(scene.cube);
  const auto rs = rasterize_scribbles(scene.scribbles, scene.cube);
  const auto model = train(fs, rs.samples);
  const UdmParams params;
  const auto raw = classify(fs, model, spectral::ndvi(scene.cube), params);
  const auto out = postprocess(raw, params);

  auto labeled_share = [&](const Mask& region, Label want) {
    std::size_t n = 0, hit = 0;
    for (std::size_t i = 0; i < region.size(); ++i) {
      if (!region[i]) continue;
      ++n;
      if (out.labels[i] == want) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(n);
  };
  EXPECT_GT(labeled_share(scene.mining, Mining), 0.5);
  EXPECT_GT(labeled_share(scene.urban_large, Urban), 0.5);
  EXPECT_GT(labeled_share(scene.urban_small, Urban), 0.5);
  for (std::size_t i = 0; i < out.labels.size(); ++i) {
    if (scene.road[i] || scene.swath[i]) EXPECT_EQ(out.labels[i], Background) << i;
    // no labels outside the features
    if (out.labels[i] == Mining) EXPECT_TRUE(scene.mining[i]) << i;
    if (out.labels[i] == Urban) EXPECT_TRUE(scene.urban_large[i] || scene.urban_small[i]) << i;
  }
  std::size_t urban_components = 0, mining_components = 0;
  for (const auto& c : out.components) {
    EXPECT_GE(c.pixel_count, params.min_area_px);
    EXPECT_LE(c.pixel_count, params.max_area_px);
    (c.label == Urban ? urban_components : mining_components)++;
  }
  EXPECT_EQ(urban_components, 2u);
  EXPECT_EQ(mining_components, 1u);
}
