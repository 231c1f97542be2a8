#include "minescape/udm/model.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "minescape/error.hpp"

namespace minescape::udm {

using nlohmann::json;

Vector CentroidModel::standardize(std::span<const double> raw) const {
  Vector z{};
  for (std::size_t f = 0; f < kFeatureCount; ++f) z[f] = (raw[f] - mean[f]) / stddev[f];
  return z;
}

CentroidModel train(const FeatureStack& features, const std::vector<Sample>& samples, const TrainOptions& options) {
  std::vector<const Sample*> used;
  for (const auto& s : samples) {
    if (s.pixel < features.size() && features.valid[s.pixel]) used.push_back(&s);
  }
  std::map<StrokeClass, std::size_t> counts;
  for (const Sample* s : used) ++counts[s->cls];
  std::vector<StrokeClass> required = {StrokeClass::Urban, StrokeClass::Mining};
  if (options.veto_enabled) required.push_back(StrokeClass::Negative);
  for (StrokeClass c : required) {
    if (counts[c] == 0) {
      throw Error(ErrorCode::InsufficientSamples, "no training samples for class " + std::string(to_string(c)),
                  std::string(to_string(c)));
    }
  }

  CentroidModel model;
  for (auto n : feature_names()) model.feature_names.emplace_back(n);
  const double n = static_cast<double>(used.size());
  for (const Sample* s : used) {
    const auto v = features.at(s->pixel);
    for (std::size_t f = 0; f < kFeatureCount; ++f) model.mean[f] += v[f];
  }
  for (auto& m : model.mean) m /= n;
  Vector ss{};
  for (const Sample* s : used) {
    const auto v = features.at(s->pixel);
    for (std::size_t f = 0; f < kFeatureCount; ++f) ss[f] += (v[f] - model.mean[f]) * (v[f] - model.mean[f]);
  }
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    const double sd = std::sqrt(ss[f] / n);
    model.stddev[f] = sd <= 1e-12 * std::max(1.0, std::fabs(model.mean[f])) ? 1.0 : sd;
  }

  std::map<StrokeClass, Vector> sums;
  for (const Sample* s : used) {
    const Vector z = model.standardize(features.at(s->pixel));
    auto& acc = sums[s->cls];
    for (std::size_t f = 0; f < kFeatureCount; ++f) acc[f] += z[f];
  }
  for (auto& [cls, acc] : sums) {
    if (cls == StrokeClass::Negative && !options.veto_enabled) continue;
    for (auto& x : acc) x /= static_cast<double>(counts[cls]);
    model.centroids[cls] = acc;
    model.sample_counts[cls] = counts[cls];
  }
  return model;
}

namespace {

std::vector<double> to_vec(const Vector& v) { return {v.begin(), v.end()}; }

Vector from_vec(const json& j, const char* what) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != kFeatureCount) throw Error(ErrorCode::ModelMismatch, std::string(what) + " has wrong length");
  Vector out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

}  // namespace

std::string model_to_json(const CentroidModel& model) {
  json centroids = json::object(), counts = json::object();
  for (const auto& [cls, c] : model.centroids) {
    centroids[std::string(to_string(cls))] = to_vec(c);
    auto it = model.sample_counts.find(cls);
    counts[std::string(to_string(cls))] = it == model.sample_counts.end() ? 0 : it->second;
  }
  json j = {{"format", kModelFormat},
            {"version", model.version},
            {"feature_names", model.feature_names},
            {"mean", to_vec(model.mean)},
            {"std", to_vec(model.stddev)},
            {"centroids", centroids},
            {"sample_counts", counts},
            {"trained_on", model.trained_on}};
  return j.dump(2);
}

CentroidModel model_from_json(std::string_view text) {
  CentroidModel m;
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != kModelFormat) throw Error(ErrorCode::ModelMismatch, "not a UDM model");
    m.version = j.at("version").get<int>();
    if (m.version != kModelVersion) {
      throw Error(ErrorCode::ModelMismatch, "unsupported model version " + std::to_string(m.version));
    }
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    std::vector<std::string> expected;
    for (auto n : feature_names()) expected.emplace_back(n);
    if (m.feature_names != expected) throw Error(ErrorCode::ModelMismatch, "model feature layout differs");
    m.mean = from_vec(j.at("mean"), "mean");
    m.stddev = from_vec(j.at("std"), "std");
    for (const auto& [name, v] : j.at("centroids").items()) {
      m.centroids[stroke_class_from_string(name)] = from_vec(v, "centroid");
    }
    if (j.contains("sample_counts")) {
      for (const auto& [name, v] : j["sample_counts"].items()) {
        m.sample_counts[stroke_class_from_string(name)] = v.get<std::size_t>();
      }
    }
    if (j.contains("trained_on")) m.trained_on = j["trained_on"].get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ModelMismatch, std::string("malformed model: ") + e.what());
  }
  if (!m.centroids.count(StrokeClass::Urban) || !m.centroids.count(StrokeClass::Mining)) {
    throw Error(ErrorCode::ModelMismatch, "model lacks an urban or mining centroid");
  }
  return m;
}

void UdmParams::validate() const {
  if (min_area_px > max_area_px) throw Error(ErrorCode::ConfigError, "min_area_px exceeds max_area_px");
  if (!(distance_margin >= 0.0)) throw Error(ErrorCode::ConfigError, "distance_margin must be nonnegative");
  if (!std::isfinite(ndvi_gate)) throw Error(ErrorCode::ConfigError, "ndvi_gate must be finite");
}

namespace {

double distance(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (std::size_t f = 0; f < kFeatureCount; ++f) s += (a[f] - b[f]) * (a[f] - b[f]);
  return std::sqrt(s);
}

}  // namespace

Label decide(const CentroidModel& model, const Vector& z, double distance_margin) {
  const double du = distance(z, model.centroids.at(StrokeClass::Urban));
  const double dm = distance(z, model.centroids.at(StrokeClass::Mining));
  if (du == dm) return Background;
  const Label best = du < dm ? Urban : Mining;
  const double dbest = std::min(du, dm);
  auto neg = model.centroids.find(StrokeClass::Negative);
  if (neg != model.centroids.end() && dbest >= distance(z, neg->second) - distance_margin) return Background;
  return best;
}

LabelRaster classify(const FeatureStack& features, const CentroidModel& model, const spectral::IndexRaster& ndvi,
                     const UdmParams& params) {
  params.validate();
  if (model.feature_names.size() != kFeatureCount) {
    throw Error(ErrorCode::ModelMismatch, "model has " + std::to_string(model.feature_names.size()) +
                                              " features, expected " + std::to_string(kFeatureCount));
  }
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    if (model.feature_names[f] != feature_names()[f]) throw Error(ErrorCode::ModelMismatch, "model feature order differs");
  }
  if (features.data.size() != features.size() * kFeatureCount) throw Error(ErrorCode::ModelMismatch, "feature stack is malformed");
  require_same_shape(features.valid, ndvi.values, "classify");
  require_same_shape(features.valid, ndvi.valid, "classify");

  LabelRaster out;
  out.labels = Grid<std::uint8_t>(features.rows, features.cols, Background);
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (!features.valid[i]) continue;
    if (ndvi.valid[i] && ndvi.values[i] > params.ndvi_gate) continue;
    out.labels[i] = decide(model, model.standardize(features.at(i)), params.distance_margin);
  }
  return out;
}

namespace {

// One-dimensional pass of a separable square filter. For erosion a cell
// stays set when every in-bounds cell of its window is set; for dilation it
// becomes set when any is.
Mask pass(const Mask& in, std::size_t radius, bool along_rows, bool erode) {
  const std::size_t rows = in.rows(), cols = in.cols();
  Mask out(rows, cols, 0);
  const std::size_t lines = along_rows ? rows : cols, len = along_rows ? cols : rows;
  std::vector<std::size_t> prefix(len + 1);
  for (std::size_t l = 0; l < lines; ++l) {
    auto at = [&](std::size_t k) -> std::uint8_t { return along_rows ? in(l, k) : in(k, l); };
    prefix[0] = 0;
    for (std::size_t k = 0; k < len; ++k) prefix[k + 1] = prefix[k] + (at(k) ? 1 : 0);
    for (std::size_t k = 0; k < len; ++k) {
      const std::size_t a = k >= radius ? k - radius : 0, b = std::min(len, k + radius + 1);
      const std::size_t set = prefix[b] - prefix[a];
      const bool v = erode ? set == b - a : set > 0;
      if (along_rows) out(l, k) = v;
      else out(k, l) = v;
    }
  }
  return out;
}

}  // namespace

Mask opening(const Mask& mask, std::size_t radius) {
  if (radius == 0) return mask;
  const Mask eroded = pass(pass(mask, radius, true, true), radius, false, true);
  Mask dilated = pass(pass(eroded, radius, true, false), radius, false, false);
  for (std::size_t i = 0; i < dilated.size(); ++i) dilated[i] = dilated[i] && mask[i];
  return dilated;
}

std::vector<Component> connected_components(const Grid<std::uint8_t>& labels, std::uint8_t value,
                                            Grid<std::uint32_t>& ids) {
  const std::size_t rows = labels.rows(), cols = labels.cols();
  ids = Grid<std::uint32_t>(rows, cols, 0);
  std::vector<Component> comps;
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < labels.size(); ++start) {
    if (labels[start] != value || ids[start] != 0) continue;
    const auto id = static_cast<std::uint32_t>(comps.size() + 1);
    Component comp;
    comp.label = static_cast<Label>(value);
    comp.bbox = {start / cols, start % cols, start / cols, start % cols};
    ids[start] = id;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      const std::size_t r = p / cols, c = p % cols;
      ++comp.pixel_count;
      comp.bbox.min_row = std::min(comp.bbox.min_row, r);
      comp.bbox.max_row = std::max(comp.bbox.max_row, r);
      comp.bbox.min_col = std::min(comp.bbox.min_col, c);
      comp.bbox.max_col = std::max(comp.bbox.max_col, c);
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          const long rr = static_cast<long>(r) + dr, cc = static_cast<long>(c) + dc;
          if (rr < 0 || cc < 0 || rr >= static_cast<long>(rows) || cc >= static_cast<long>(cols)) continue;
          const std::size_t q = static_cast<std::size_t>(rr) * cols + static_cast<std::size_t>(cc);
          if (labels[q] == value && ids[q] == 0) {
            ids[q] = id;
            stack.push_back(q);
          }
        }
      }
    }
    comps.push_back(comp);
  }
  return comps;
}

LabelRaster postprocess(const LabelRaster& input, const UdmParams& params) {
  params.validate();
  const auto& in = input.labels;
  LabelRaster out;
  out.labels = Grid<std::uint8_t>(in.rows(), in.cols(), Background);
  for (std::uint8_t cls : {static_cast<std::uint8_t>(Urban), static_cast<std::uint8_t>(Mining)}) {
    Mask m(in.rows(), in.cols(), 0);
    for (std::size_t i = 0; i < in.size(); ++i) m[i] = in[i] == cls;
    m = opening(m, params.morphology_radius);
    for (std::size_t i = 0; i < in.size(); ++i) {
      if (m[i]) out.labels[i] = cls;
    }
  }
  std::vector<Component> kept;
  for (std::uint8_t cls : {static_cast<std::uint8_t>(Urban), static_cast<std::uint8_t>(Mining)}) {
    Grid<std::uint32_t> ids;
    const auto comps = connected_components(out.labels, cls, ids);
    std::vector<std::uint8_t> keep(comps.size() + 1, 0);
    for (std::size_t k = 0; k < comps.size(); ++k) {
      keep[k + 1] = comps[k].pixel_count >= params.min_area_px && comps[k].pixel_count <= params.max_area_px;
      if (keep[k + 1]) kept.push_back(comps[k]);
    }
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] != 0 && !keep[ids[i]]) out.labels[i] = Background;
    }
  }
  out.components = std::move(kept);
  return out;
}

std::vector<std::uint8_t> label_png(const LabelRaster& labels) {
  static constexpr std::array<raster::Rgb, 3> palette = {
      raster::Rgb{0, 0, 0}, raster::Rgb{31, 119, 180}, raster::Rgb{255, 127, 14}};
  return raster::encode_png_indexed(labels.labels, palette);
}

std::string components_json(const LabelRaster& labels) {
  json comps = json::array();
  std::size_t urban = 0, mining = 0;
  for (const auto& c : labels.components) {
    (c.label == Urban ? urban : mining) += 1;
    comps.push_back({{"label", c.label == Urban ? "urban" : "mining"},
                     {"pixel_count", c.pixel_count},
                     {"bbox", {c.bbox.min_row, c.bbox.min_col, c.bbox.max_row, c.bbox.max_col}}});
  }
  return json{{"rows", labels.labels.rows()},
              {"cols", labels.labels.cols()},
              {"counts", {{"urban", urban}, {"mining", mining}}},
              {"components", comps}}
      .dump(2);
}

}  // namespace minescape::udm
