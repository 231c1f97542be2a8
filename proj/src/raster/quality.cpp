#include "minescape/raster/quality.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "minescape/error.hpp"

namespace minescape::raster {

double grayscale(const Rgb& px) { return 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2]; }

namespace {

double variance(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return acc / static_cast<double>(v.size());
}

}  // namespace

QualityReport quality_metrics(const RenderImage& render, const Mask& mask, double gap_threshold) {
  require_same_shape(render.pixels, mask, "quality_metrics");
  if (!(gap_threshold > 0.0 && gap_threshold < 1.0)) throw Error(ErrorCode::ConfigError, "gap_threshold must be in (0,1)");
  const std::size_t rows = mask.rows(), cols = mask.cols();

  Grid<double> gray(rows, cols);
  for (std::size_t i = 0; i < gray.size(); ++i) gray[i] = grayscale(render.pixels[i]);

  std::vector<double> values, laplacian;
  std::array<std::size_t, 256> hist{};
  std::size_t masked = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (mask(r, c)) {
        ++masked;
        continue;
      }
      const double g = gray(r, c);
      values.push_back(g);
      hist[static_cast<std::size_t>(std::clamp<long>(std::lround(g), 0, 255))]++;
      auto neighbour = [&](long rr, long cc) {
        if (rr < 0 || cc < 0 || rr >= static_cast<long>(rows) || cc >= static_cast<long>(cols)) return g;
        return mask(rr, cc) ? g : gray(rr, cc);
      };
      const long ri = static_cast<long>(r), ci = static_cast<long>(c);
      laplacian.push_back(neighbour(ri - 1, ci) + neighbour(ri + 1, ci) + neighbour(ri, ci - 1) +
                          neighbour(ri, ci + 1) - 4.0 * g);
    }
  }
  if (values.empty()) throw Error(ErrorCode::EmptyScene, "no valid pixels in render");

  QualityReport rep;
  rep.scene_id = render.provenance.scene_id;
  rep.capture_date = render.provenance.capture_date;
  rep.contrast = std::sqrt(variance(values));
  rep.sharpness = variance(laplacian);
  const double n = static_cast<double>(values.size());
  double h = 0.0;
  for (std::size_t count : hist) {
    if (count == 0) continue;
    const double p = static_cast<double>(count) / n;
    h -= p * std::log2(p);
  }
  rep.entropy_bits = h;
  rep.nodata_fraction = static_cast<double>(masked) / static_cast<double>(mask.size());
  rep.swath_gap = rep.nodata_fraction > gap_threshold;
  return rep;
}

namespace {

using Metric = double QualityReport::*;
constexpr std::array<Metric, 3> kMetrics = {&QualityReport::contrast, &QualityReport::sharpness,
                                            &QualityReport::entropy_bits};

bool is_outlier(const std::vector<QualityReport>& pool, std::size_t idx) {
  if (pool.size() < 3) return false;
  for (Metric m : kMetrics) {
    double sum = 0.0;
    for (std::size_t j = 0; j < pool.size(); ++j) {
      if (j != idx) sum += pool[j].*m;
    }
    const double k = static_cast<double>(pool.size() - 1);
    const double mean = sum / k;
    double ss = 0.0;
    for (std::size_t j = 0; j < pool.size(); ++j) {
      if (j != idx) ss += (pool[j].*m - mean) * (pool[j].*m - mean);
    }
    const double sd = std::sqrt(ss / (k - 1.0));
    if (sd > 0.0 && pool[idx].*m < mean - 2.0 * sd) return true;
  }
  return false;
}

std::vector<double> normalized_ranks(const std::vector<QualityReport>& pool, Metric m) {
  const std::size_t n = pool.size();
  std::vector<double> out(n, 1.0);
  if (n == 1) return out;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pool[a].*m < pool[b].*m; });
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && pool[order[j + 1]].*m == pool[order[i]].*m) ++j;
    const double avg_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) out[order[k]] = avg_rank / static_cast<double>(n - 1);
    i = j + 1;
  }
  return out;
}

}  // namespace

std::vector<QualityReport> rank_candidates(const std::vector<QualityReport>& reports) {
  if (reports.empty()) throw Error(ErrorCode::NoViableScene, "no candidate scenes");
  std::vector<QualityReport> pool;
  for (const auto& r : reports) {
    if (!r.swath_gap) pool.push_back(r);
  }
  std::vector<QualityReport> kept;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (!is_outlier(pool, i)) kept.push_back(pool[i]);
  }
  if (kept.empty()) throw Error(ErrorCode::NoViableScene, "all candidate scenes were excluded");

  std::vector<double> composite(kept.size(), 0.0);
  for (Metric m : kMetrics) {
    const auto ranks = normalized_ranks(kept, m);
    for (std::size_t i = 0; i < kept.size(); ++i) composite[i] += ranks[i];
  }
  for (std::size_t i = 0; i < kept.size(); ++i) kept[i].composite_score = composite[i] / 3.0;

  std::stable_sort(kept.begin(), kept.end(), [](const QualityReport& a, const QualityReport& b) {
    if (a.composite_score != b.composite_score) return a.composite_score > b.composite_score;
    if (a.capture_date != b.capture_date) {
      if (!a.capture_date) return false;
      if (!b.capture_date) return true;
      return *a.capture_date < *b.capture_date;
    }
    return a.scene_id < b.scene_id;
  });
  return kept;
}

}  // namespace minescape::raster
