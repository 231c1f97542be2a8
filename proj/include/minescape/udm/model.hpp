#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "minescape/spectral/indices.hpp"
#include "minescape/udm/features.hpp"
#include "minescape/udm/scribbles.hpp"

namespace minescape::udm {

inline constexpr std::string_view kModelFormat = "udm-centroid-model";
inline constexpr int kModelVersion = 1;

using Vector = std::array<double, kFeatureCount>;

struct CentroidModel {
  std::vector<std::string> feature_names;
  Vector mean{};
  Vector stddev{};  // zero-variance features carry 1
  std::map<StrokeClass, Vector> centroids;  // standardized space
  std::map<StrokeClass, std::size_t> sample_counts;
  std::vector<std::string> trained_on;
  int version = kModelVersion;

  bool has_negative() const { return centroids.count(StrokeClass::Negative) != 0; }
  Vector standardize(std::span<const double> raw) const;
};

struct TrainOptions {
  /// With the veto enabled a negative class is mandatory.
  bool veto_enabled = true;
};

/// Standardization statistics (population mean and std) come from all sample
/// pixels together; a feature whose std is at most 1e-12 * max(1, |mean|)
/// gets std 1. Centroids are per-class means of standardized vectors.
/// Samples on invalid feature pixels are skipped. Throws
/// InsufficientSamples(class) when urban, mining, or (with the veto) negative
/// ends up empty.
CentroidModel train(const FeatureStack& features, const std::vector<Sample>& samples,
                    const TrainOptions& options = {});

std::string model_to_json(const CentroidModel& model);
/// Throws ModelMismatch for an unknown format, version or feature layout.
CentroidModel model_from_json(std::string_view text);

enum Label : std::uint8_t { Background = 0, Urban = 1, Mining = 2 };

struct UdmParams {
  double ndvi_gate = 0.4;
  std::size_t min_area_px = 4;
  std::size_t max_area_px = 1'000'000;
  double distance_margin = 0.0;
  std::size_t morphology_radius = 1;

  void validate() const;  // ConfigError unless min_area_px <= max_area_px and margin >= 0
};

struct BoundingBox {
  std::size_t min_row = 0, min_col = 0, max_row = 0, max_col = 0;  // inclusive
  bool operator==(const BoundingBox&) const = default;
};

struct Component {
  Label label = Background;
  std::size_t pixel_count = 0;
  BoundingBox bbox;
};

struct LabelRaster {
  Grid<std::uint8_t> labels;
  std::vector<Component> components;
};

/// Decision for one standardized feature vector, ignoring the NDVI gate.
/// Nearest positive centroid wins; an urban/mining tie is background. When
/// the model has a negative centroid the pixel is vetoed to background if
/// d(best positive) >= d(negative) - margin.
Label decide(const CentroidModel& model, const Vector& z, double distance_margin);

/// Labels every valid feature pixel with `decide`, then forces background
/// where NDVI is valid and exceeds params.ndvi_gate. Throws ModelMismatch if
/// the model was trained on a different feature layout and ShapeError if
/// the NDVI raster does not match.
LabelRaster classify(const FeatureStack& features, const CentroidModel& model,
                     const spectral::IndexRaster& ndvi, const UdmParams& params);

/// Binary opening of `mask` with a (2r+1) x (2r+1) square; out-of-bounds
/// cells are ignored by the erosion.
Mask opening(const Mask& mask, std::size_t radius);

/// 8-connected components of the pixels equal to `value`. Fills `ids` with
/// component numbers starting at 1 (0 elsewhere) and returns pixel counts
/// and bounding boxes in scan order of first pixel.
std::vector<Component> connected_components(const Grid<std::uint8_t>& labels, std::uint8_t value,
                                            Grid<std::uint32_t>& ids);

/// Per-class opening, 8-connected components, and removal of components
/// outside [min_area_px, max_area_px]. Only ever clears pixels.
LabelRaster postprocess(const LabelRaster& labels, const UdmParams& params);

/// Paletted PNG: 0 black background, 1 blue urban, 2 orange mining.
std::vector<std::uint8_t> label_png(const LabelRaster& labels);
std::string components_json(const LabelRaster& labels);

}  // namespace minescape::udm
