#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "minescape/agentic/cascade.hpp"
#include "minescape/raster/scene.hpp"
#include "minescape/sites/site.hpp"
#include "minescape/udm/scribbles.hpp"

namespace minescape::pipeline::demo {

/// Surface reflectance spectra (B02..B12 in canonical band order).
using Spectrum = std::array<double, 10>;
extern const Spectrum kVegetation;
extern const Spectrum kMining;
extern const Spectrum kUrban;
extern const Spectrum kRoad;

/// Synthetic scene for the UDM workflow: a large
/// mining pit, a town, a small settlement, a one-pixel road and an optional
/// zero-filled swath gap on the left edge, over vegetation.
struct LayoutScene {
  raster::SceneCube cube;
  Mask mining, urban_large, urban_small, road, swath;
  udm::ScribbleSet scribbles;  // pixel-space strokes over pit, both towns and vegetation
};

struct LayoutOptions {
  std::size_t size = 64;
  std::uint64_t seed = 7;
  double noise = 0.004;   // reflectance std of per-pixel noise
  double contrast = 1.0;  // scales every spectrum (quality ranking material)
  std::size_t swath_cols = 6;
  int shift = 0;          // moves the features diagonally
  std::string scene_id = "S2_LAYOUT";
  Date date{std::chrono::year{2024}, std::chrono::month{1}, std::chrono::day{15}};
  double center_lon = 0.0, center_lat = 0.0;
};

LayoutScene layout_scene(const LayoutOptions& options = {});

struct DemoSite {
  sites::SiteRecord site;
  sites::Dossier dossier;
};

/// ElliotsNo1OpenCut, Endeavour22, CentralNorthOpenPit (Australia) and
/// Garzweiler (Germany).
std::vector<DemoSite> demo_sites();

/// Hand-written captions for the three Australian sites.
struct FixtureCaption {
  std::string site_id;
  std::string text;
};
std::vector<FixtureCaption> australia_captions();

inline constexpr const char* kBookSourceFile = "Scambary_MyCountryMyMine_2013_239p.pdf";
inline constexpr const char* kBookStem = "Scambary_MyCountryMyMine_2013_239p";
inline constexpr int kBookPages = 239;

/// Pre-extracted text of a 239-page book, ten "#" chapters, one
/// "[[page:N]]" marker per page.
std::string book_text();

inline constexpr const char* kAustraliaQuery =
    "How do mining operations in Australia impact the environment? Elaborate on specific examples.";

/// Caption store filled from australia_captions() and the book indexed as
/// a hierarchy.
agentic::KnowledgeBase australia_knowledge_base(rag::Embedder& embedder, const agentic::HierarchyOptions& options = {});

/// Writes a complete offline workspace: config.ini, the demo sites with
/// dossiers, a recorded catalog with four candidate scenes per site (clean,
/// swath gap, low contrast, over the cloud limit), scribble files
/// under fixtures/scribbles/, and the book under documents/.
void write_demo_workspace(const fs::path& root);

}  // namespace minescape::pipeline::demo
