#include "minescape/pipeline/demo.hpp"

#include <cmath>
#include <random>

#include "minescape/pipeline/workspace.hpp"
#include "minescape/rag/text.hpp"
#include "minescape/sites/catalog.hpp"

namespace minescape::pipeline::demo {

using nlohmann::json;

//                                 B02    B03    B04    B05    B06    B07    B08    B8A    B11    B12
const Spectrum kVegetation = {0.040, 0.070, 0.050, 0.120, 0.300, 0.360, 0.400, 0.410, 0.200, 0.100};
const Spectrum kMining = {0.120, 0.150, 0.200, 0.230, 0.250, 0.270, 0.280, 0.290, 0.380, 0.330};
const Spectrum kUrban = {0.100, 0.110, 0.130, 0.150, 0.170, 0.180, 0.190, 0.190, 0.240, 0.210};
const Spectrum kRoad = {0.070, 0.080, 0.090, 0.100, 0.120, 0.130, 0.140, 0.140, 0.160, 0.140};

namespace {

struct Rect {
  long r0, r1, c0, c1;  // half-open
};

void fill(Mask& m, const Rect& r) {
  for (long y = std::max(0L, r.r0); y < std::min<long>(r.r1, static_cast<long>(m.rows())); ++y) {
    for (long x = std::max(0L, r.c0); x < std::min<long>(r.c1, static_cast<long>(m.cols())); ++x) m(y, x) = 1;
  }
}

raster::GeoTransform geo_for(double lon, double lat, std::size_t size) {
  const double half_lat = 5000.0 / raster::kMetersPerDegree;
  const double half_lon = 5000.0 / (raster::kMetersPerDegree * std::cos(lat * M_PI / 180.0));
  raster::GeoTransform g;
  g.origin_lon = lon - half_lon;
  g.origin_lat = lat + half_lat;
  g.pixel_dlon = 2.0 * half_lon / static_cast<double>(size);
  g.pixel_dlat = 2.0 * half_lat / static_cast<double>(size);
  g.pixel_size_m = 10000.0 / static_cast<double>(size);
  return g;
}

udm::Stroke line(udm::StrokeClass cls, double x0, double y0, double x1, double y1, int width) {
  udm::Stroke s;
  s.cls = cls;
  s.points = {{x0, y0}, {x1, y1}};
  s.width_px = width;
  return s;
}

}  // namespace

LayoutScene layout_scene(const LayoutOptions& o) {
  const std::size_t n = o.size;
  const double k = static_cast<double>(n) / 64.0;
  auto at = [&](double v) { return static_cast<long>(std::lround(v * k)) + o.shift; };
  Mask mining(n, n), urban_large(n, n), urban_small(n, n), road(n, n), swath(n, n);
  fill(mining, {at(8), at(28), at(30), at(56)});
  fill(urban_large, {at(40), at(50), at(10), at(20)});
  fill(urban_small, {at(44), at(44) + 5, at(44), at(44) + 5});
  fill(road, {at(34), at(34) + 1, 0, static_cast<long>(n)});
  fill(swath, {0, static_cast<long>(n), 0, static_cast<long>(o.swath_cols)});

  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> noise(0.0, o.noise);
  std::map<std::string, Grid<double>, std::less<>> bands;
  for (auto name : raster::kRequiredBands) bands.emplace(std::string(name), Grid<double>(n, n));
  Mask nodata(n, n);
  for (std::size_t i = 0; i < n * n; ++i) {
    if (swath[i]) {
      nodata[i] = 1;
      continue;
    }
    const Spectrum* s = &kVegetation;
    if (mining[i]) s = &kMining;
    if (urban_large[i] || urban_small[i]) s = &kUrban;
    if (road[i]) s = &kRoad;
    std::size_t b = 0;
    for (auto name : raster::kRequiredBands) {
      const double v = std::clamp((*s)[b++] * o.contrast + noise(rng), 0.0005, 1.0);
      bands.find(name)->second[i] = std::round(v * raster::kReflectanceScale) / raster::kReflectanceScale;
    }
  }
  // road pixels inside features belong to the features
  for (std::size_t i = 0; i < n * n; ++i) {
    if (mining[i] || urban_large[i] || urban_small[i] || swath[i]) road[i] = 0;
  }
  for (Mask* m : {&mining, &urban_large, &urban_small}) {
    for (std::size_t i = 0; i < n * n; ++i) {
      if (swath[i]) (*m)[i] = 0;
    }
  }

  LayoutScene out{raster::SceneCube(o.scene_id, std::move(bands), geo_for(o.center_lon, o.center_lat, n), nodata, o.date,
                                    "EPSG:4326"),
                  mining, urban_large, urban_small, road, swath, {}};
  const double d = static_cast<double>(o.shift);
  auto X = [&](double v) { return v * k + d; };
  out.scribbles.scene_id = o.scene_id;
  out.scribbles.space = udm::CoordinateSpace::Pixel;
  out.scribbles.strokes = {
      line(udm::StrokeClass::Mining, X(33), X(18), X(52), X(18), 3),
      line(udm::StrokeClass::Mining, X(42), X(11), X(42), X(25), 3),
      line(udm::StrokeClass::Urban, X(12), X(45), X(17), X(45), 3),
      line(udm::StrokeClass::Urban, X(45) + (k - 1) * 0, X(46), X(47), X(46), 3),
      line(udm::StrokeClass::Negative, X(10), X(58), X(60), X(58), 3),
      line(udm::StrokeClass::Negative, X(60), X(4), X(60), X(30), 3),
  };
  return out;
}

std::vector<DemoSite> demo_sites() {
  using sites::SiteRecord;
  using sites::SiteStatus;
  std::vector<DemoSite> out;
  out.push_back({SiteRecord{"ElliotsNo1OpenCut", "Elliots No.1 Open Cut", "Australia", -23.62, 148.18, {"coal"}, SiteStatus::New},
                 {"ElliotsNo1OpenCut",
                  "Open-cut coal extraction began in the 1980s and expanded in stages along the seam.",
                  "Bowen Basin coal measures dip gently beneath a thin cover of weathered sediments.",
                  "Downstream landholders have raised concerns about dust and creek water quality.",
                  {"fixture"},
                  false}});
  out.push_back({SiteRecord{"Endeavour22", "Endeavour 22", "Australia", -31.47, 145.82, {"copper", "zinc"}, SiteStatus::New},
                 {"Endeavour22", "The deposit was developed as an underground and open-pit operation near Cobar.",
                  "Base-metal sulphides occur in steeply dipping lenses within folded siltstone.", "", {"fixture"}, false}});
  out.push_back({SiteRecord{"CentralNorthOpenPit", "Central North Open Pit", "Australia", -30.75, 121.49, {"gold"}, SiteStatus::New},
                 {"CentralNorthOpenPit", "Gold has been mined on the field since the 1890s; the open pit merged older shafts.",
                  "Mineralisation is hosted by greenstone lodes cut by later quartz veins.",
                  "Residents of the adjoining town have objected to blasting noise and pit expansion.",
                  {"fixture"},
                  false}});
  out.push_back({SiteRecord{"Garzweiler", "Garzweiler", "Germany", 51.06, 6.49, {"lignite"}, SiteStatus::New},
                 {"Garzweiler", "The lignite mine has expanded westward since the 1980s, relocating several villages.",
                  "Tertiary lignite seams lie beneath thick loess and gravel overburden.",
                  "Village relocations and climate protests have made the mine a focus of public dispute.",
                  {"fixture"},
                  false}});
  return out;
}

std::vector<FixtureCaption> australia_captions() {
  return {
      {"ElliotsNo1OpenCut",
       "An open-cut coal mine dominates the scene: long strip pits, spoil ridges and haul roads cut through grazing "
       "land. Mining operations have stripped vegetation across the lease and low NDVI marks the disturbed ground. "
       "Sediment ponds and diverted creeks show the impact of the workings on the surrounding environment, with bare "
       "spoil exposed to erosion."},
      {"Endeavour22",
       "The Endeavour 22 pit appears as a steep circular excavation beside a tailings storage facility. Pale tailings "
       "and waste rock dumps border dry woodland. The mining footprint is compact, but the tailings surface and drainage "
       "lines suggest a lasting environmental impact on the creek system."},
      {"CentralNorthOpenPit",
       "A deep open pit with terraced benches lies next to the town. Waste dumps ring the pit and the UDM layer "
       "separates the mining area from the residential grid. Vegetation is sparse across the whole scene; heritage "
       "shafts and older workings survive at the edge of the town."},
  };
}

namespace {

struct Chapter {
  int first_page;
  std::string title;
};

const std::vector<Chapter>& chapters() {
  static const std::vector<Chapter> c = {
      {1, "Introduction"},
      {15, "Country and kin"},
      {39, "The arrival of the companies"},
      {63, "Negotiating agreements"},
      {89, "Native title and the law"},
      {113, "Employment and training"},
      {137, "Royalties and community funds"},
      {161, "Country under pressure"},
      {191, "Governance and representation"},
      {215, "Futures"},
  };
  return c;
}

const std::vector<std::string>& filler_sentences() {
  static const std::vector<std::string> s = {
      "Elders described the obligations that come with caring for particular places.",
      "Family groups met at the outstation to discuss who should speak for the area.",
      "Negotiators from the land council carried instructions between the meetings.",
      "The agreement set out procedures for consultation before new work began.",
      "Young people talked about training courses and the distance to the nearest town.",
      "Royalty payments were placed in a trust with a board of traditional owners.",
      "Interviews recorded different views about how benefits should be shared.",
      "The regional council struggled to fund housing and health services.",
      "Ceremonial business continued through the wet season despite the road closures.",
      "Court hearings on the claim lasted several years and involved many witnesses.",
      "Company liaison officers changed frequently, which unsettled relationships.",
      "Government programs promised jobs but delivered few lasting positions.",
      "Senior women insisted that their knowledge of the country be recorded.",
      "The corporation held its annual meeting under the trees beside the store.",
      "Several families moved back to the homeland once the bore was repaired.",
      "Anthropologists mapped kinship ties to support the connection report.",
      "Debates about representation turned on who had the right to decide.",
      "The cultural centre kept recordings of songs and stories from the region.",
      "A joint committee reviewed the implementation plan each dry season.",
      "Lawyers advised the group on the terms of the proposed settlement.",
  };
  return s;
}

std::string special_page(int page) {
  switch (page) {
    case 1:
      return "This book follows Aboriginal groups in remote Australia through their long engagement with mining "
             "companies, governments and their own land councils. It asks what agreements have delivered and what they "
             "have cost.";
    case 3:
      return "Mining operations across Australia have changed the country of many Aboriginal groups. Open-cut "
             "pits and waste dumps reach creeks and hunting grounds well beyond the lease, and families worry about "
             "the environment their grandchildren will inherit.";
    case 161:
      return "This chapter turns to the physical country that mining reshapes. Families measure change through the "
             "places they can no longer visit.";
    case 178:
      return "The environmental impact of mining operations on this country is severe. Open-cut mining in Australia "
             "strips vegetation and topsoil, and waste rock exposed to rain produces acid mine drainage. Acid mine "
             "drainage from the mining operations carries metals into creeks, and the impact on the environment "
             "includes long-term soil erosion and chemical contamination of waterways.\n\n"
             "These environmental impacts of mining in Australia are not isolated. Mining operations repeat a pattern "
             "where large-scale land disturbance, water pollution and habitat loss are direct consequences of mining: "
             "the environment of the river country carries the impact of mining operations long after the pits close.";
    default:
      return {};
  }
}

}  // namespace

std::string book_text() {
  std::string out;
  std::size_t ch = 0;
  std::uint64_t state = 0x5ca3ba7ULL;
  const auto& bank = filler_sentences();
  for (int page = 1; page <= kBookPages; ++page) {
    out += "[[page:" + std::to_string(page) + "]]\n";
    if (ch < chapters().size() && chapters()[ch].first_page == page) {
      out += "# Chapter " + std::to_string(ch + 1) + ". " + chapters()[ch].title + "\n\n";
      ++ch;
    }
    const std::string special = special_page(page);
    if (!special.empty()) out += special + " ";
    const std::size_t count = special.empty() ? 6 : 2;
    for (std::size_t i = 0; i < count; ++i) {
      state = state * 6364136223846793005ULL + 1442695040888963407ULL;
      out += bank[(state >> 33) % bank.size()] + (i + 1 < count ? " " : "");
    }
    out += "\n\n";
  }
  return out;
}

agentic::KnowledgeBase australia_knowledge_base(rag::Embedder& embedder, const agentic::HierarchyOptions& options) {
  agentic::KnowledgeBase kb(embedder.name(), embedder.dimension());
  std::map<std::string, sites::SiteRecord> by_id;
  for (const auto& d : demo_sites()) by_id.emplace(d.site.site_id, d.site);
  for (const auto& c : australia_captions()) {
    const auto& s = by_id.at(c.site_id);
    const json meta = {{"kind", "caption"},   {"site_id", s.site_id}, {"caption_id", s.site_id + "-fixture"},
                       {"mine_name", s.name}, {"country", s.country}, {"lat", s.lat},
                       {"lon", s.lon}};
    for (const auto& chunk : rag::chunk_text(c.text, s.site_id + "-fixture", options.chunk_size, options.overlap, meta)) {
      kb.captions.upsert(rag::embed_chunk(embedder, rag::prepend_metadata(chunk)));
    }
  }
  kb.add_document(agentic::build_hierarchy(book_text(), kBookStem, kBookSourceFile, options,
                                           {{"title", "My Country, Mine Country"}}),
                  embedder);
  return kb;
}

void write_demo_workspace(const fs::path& root) {
  init_workspace(root);
  sites::Registry registry(root / "registry");
  std::vector<sites::SceneCandidate> catalog;
  fs::create_directories(root / "catalog" / "scenes");
  fs::create_directories(root / "fixtures" / "scribbles");
  std::uint64_t seed = 11;
  for (const auto& d : demo_sites()) {
    if (!registry.exists(d.site.site_id)) registry.add(d.site);
    registry.put_dossier(d.dossier);
    const bool south = d.site.lat < -23.5;
    const auto date = [&](int y, unsigned m, unsigned day) {
      return Date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{day}};
    };
    struct Variant {
      const char* suffix;
      double cloud;
      Date date;
      std::size_t swath;
      double contrast;
      double noise;
    };
    const std::vector<Variant> variants = {
        {"A", 4.0, south ? date(2024, 1, 15) : date(2024, 6, 12), 0, 1.0, 0.004},
        {"B", 8.5, south ? date(2023, 12, 10) : date(2024, 7, 20), 7, 1.0, 0.004},
        {"C", 11.0, south ? date(2024, 2, 20) : date(2023, 8, 3), 0, 0.55, 0.002},
        {"D", 46.0, south ? date(2024, 11, 5) : date(2024, 5, 28), 0, 1.0, 0.004},
    };
    const auto box = sites::bbox_for(d.site);
    for (const auto& v : variants) {
      LayoutOptions o;
      o.seed = seed++;
      o.scene_id = "S2_" + d.site.site_id + "_" + v.suffix;
      o.date = v.date;
      o.swath_cols = v.swath;
      o.contrast = v.contrast;
      o.noise = v.noise;
      o.center_lon = d.site.lon;
      o.center_lat = d.site.lat;
      const auto scene = layout_scene(o);
      raster::save_scene(root / "catalog" / "scenes" / (o.scene_id + ".tif"), scene.cube);
      catalog.push_back({o.scene_id, v.date, v.cloud, "scenes/" + o.scene_id + ".tif", box});
      if (std::string(v.suffix) == "A") {
        write_file_atomic(root / "fixtures" / "scribbles" / (d.site.site_id + ".geojson"), udm::to_geojson(scene.scribbles));
      }
    }
  }
  write_file_atomic(root / "catalog" / "catalog.json", sites::candidates_to_json(catalog));
  fs::create_directories(root / "documents");
  write_file_atomic(root / "documents" / (std::string(kBookStem) + ".txt"), book_text());
  write_file_atomic(root / "documents" / (std::string(kBookStem) + ".meta.json"),
                    json{{"source_file", kBookSourceFile}, {"title", "My Country, Mine Country"}}.dump(2));
}

}  // namespace minescape::pipeline::demo
