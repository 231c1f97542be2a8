#pragma once

#include <optional>
#include <string>
#include <vector>

#include "minescape/date.hpp"
#include "minescape/grid.hpp"
#include "minescape/raster/render.hpp"

namespace minescape::raster {

inline constexpr double kDefaultGapThreshold = 0.05;

struct QualityReport {
  std::string scene_id;
  std::optional<Date> capture_date;
  double contrast = 0.0;       // std of grayscale over valid pixels
  double sharpness = 0.0;      // variance of the 3x3 Laplacian over valid pixels
  double entropy_bits = 0.0;   // Shannon entropy of the 256-bin gray histogram
  double nodata_fraction = 0.0;
  bool swath_gap = false;      // nodata_fraction > gap threshold
  double composite_score = 0.0;  // filled by rank_candidates
};

/// Luminance 0.299 R + 0.587 G + 0.114 B.
double grayscale(const Rgb& px);

/// Computes image statistics over the unmasked pixels of `render`. The
/// Laplacian uses the 4-neighbour kernel; neighbours that are masked or out
/// of bounds take the center value. Throws EmptyScene when nothing is valid.
QualityReport quality_metrics(const RenderImage& render, const Mask& mask,
                              double gap_threshold = kDefaultGapThreshold);

/// Orders viable scenes best first. Gapped scenes are dropped. A scene is an
/// outlier, and dropped, when any raw metric lies more than two sample
/// standard deviations below the mean of the other candidates (needs at
/// least two others with nonzero spread). Survivors get each metric
/// rank-normalized to [0, 1] (average ranks for ties; a lone survivor
/// scores 1) and composite = mean of the three. Ties go to the earlier
/// capture date, then to scene_id.
std::vector<QualityReport> rank_candidates(const std::vector<QualityReport>& reports);

}  // namespace minescape::raster
