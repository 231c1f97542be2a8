#include <gtest/gtest.h>

#include <cmath>
#include <json.hpp>
#include <thread>

#include "../support.hpp"
#include "minescape/sites/catalog.hpp"
#include "minescape/sites/site.hpp"

using namespace minescape;
using namespace minescape::sites;
using namespace testing_support;

namespace {

SiteRecord site_at(double lat, double lon = 10.0, std::string id = "S1") {
  SiteRecord s;
  s.site_id = std::move(id);
  s.name = "Test";
  s.country = "Nowhere";
  s.lat = lat;
  s.lon = lon;
  return s;
}

std::string words(std::size_t n) {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) out += (i ? " w" : "w") + std::to_string(i);
  return out;
}

class ListCatalog : public CatalogProvider {
 public:
  std::vector<SceneCandidate> scenes;
  int failures_before_success = 0;
  bool retryable = true;
  int calls = 0;

  std::vector<SceneCandidate> search(const GeoBox&, const DateWindow&) override {
    ++calls;
    if (calls <= failures_before_success) {
      throw Error(ErrorCode::ProviderUnavailable, "timeout", {}, std::nullopt, retryable);
    }
    return scenes;
  }
  fs::path fetch(const SceneCandidate&) override { return {}; }
};

SceneCandidate cand(std::string id, Date d, double cloud) { return {std::move(id), d, cloud, id + ".tif", std::nullopt}; }

}  // namespace

TEST(BBox, EquatorHalfWidths) {
  const auto b = bbox_for(site_at(0.0, 0.0));
  // 0.0449156 to four significant figures
  EXPECT_NEAR(b.max_lat, 0.04491, 1e-5);
  EXPECT_NEAR(b.max_lon, 0.04491, 1e-5);
  EXPECT_NEAR(b.max_lon, b.max_lat, 1e-15);
  EXPECT_NEAR(b.max_lat, 5000.0 / 111320.0, 1e-15);
  EXPECT_DOUBLE_EQ(b.min_lat, -b.max_lat);
}

TEST(BBox, SixtyDegreesDoublesLongitude) {
  const auto s = site_at(60.0, 20.0);
  const auto b = bbox_for(s);
  EXPECT_NEAR((b.max_lon - b.min_lon) / (b.max_lat - b.min_lat), 2.0, 1e-9);
  EXPECT_TRUE(b.contains(s.lon, s.lat));
}

TEST(BBox, PolarLatitudeRejected) {
  EXPECT_EQ(code_of([] { bbox_for(site_at(86.0)); }), ErrorCode::UnsupportedLatitude);
  EXPECT_EQ(code_of([] { bbox_for(site_at(-85.0)); }), ErrorCode::UnsupportedLatitude);
  EXPECT_NO_THROW(bbox_for(site_at(84.9)));
}

TEST(BBoxProperty, AreaIsHundredSquareKilometres) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> lat(-84.9, 84.9), lon(-179.9, 179.9);
  for (int i = 0; i < 2000; ++i) {
    const auto s = site_at(lat(rng), lon(rng));
    const auto b = bbox_for(s);
    EXPECT_NEAR(box_area_km2(b), 100.0, 5.0) << s.lat;
    EXPECT_TRUE(b.contains(s.lon, s.lat));
  }
}

TEST(Window, NorthernSummer) {
  const auto w = date_window(site_at(51.0), ymd(2024, 12, 31));
  EXPECT_EQ(w.months, (std::set<unsigned>{5, 6, 7, 8, 9}));
  EXPECT_EQ(w.latest, ymd(2024, 12, 31));
  EXPECT_EQ(w.earliest, ymd(2023, 6, 30));
  EXPECT_EQ(w.max_cloud_pct, 20.0);
}

TEST(Window, SouthernSummer) {
  const auto w = date_window(site_at(-33.0), ymd(2024, 12, 31));
  EXPECT_EQ(w.months, (std::set<unsigned>{11, 12, 1, 2, 3}));
}

TEST(Window, TropicsTakeAllMonths) {
  EXPECT_EQ(date_window(site_at(10.0), ymd(2024, 12, 31)).months.size(), 12u);
  EXPECT_EQ(date_window(site_at(-23.5), ymd(2024, 12, 31)).months.size(), 12u);
}

TEST(Window, HorizonExcludesLaterScenes) {
  const auto w = date_window(site_at(-33.0), ymd(2024, 12, 31));
  EXPECT_TRUE(w.admits(ymd(2024, 12, 31)));
  EXPECT_FALSE(w.admits(ymd(2025, 1, 1)));
  EXPECT_FALSE(w.admits(ymd(2025, 2, 10)));
  EXPECT_FALSE(w.admits(ymd(2024, 7, 1)));
}

TEST(WindowProperty, HemispheresAreSixMonthsApart) {
  for (double lat = 23.6; lat < 90.0; lat += 0.7) {
    const auto north = date_window(site_at(lat), ymd(2024, 12, 31)).months;
    const auto south = date_window(site_at(-lat), ymd(2024, 12, 31)).months;
    std::set<unsigned> shifted;
    for (unsigned m : south) shifted.insert((m + 5) % 12 + 1);
    EXPECT_EQ(shifted, north) << lat;
  }
}

TEST(Catalog, CloudFilterLeavesThree) {
  ListCatalog cat;
  cat.scenes = {cand("a", ymd(2024, 1, 1), 5), cand("b", ymd(2024, 2, 1), 25), cand("c", ymd(2024, 3, 1), 19.9),
                cand("d", ymd(2023, 12, 1), 80), cand("e", ymd(2024, 11, 20), 1)};
  const auto s = site_at(-33.0);
  const auto got = query_catalog(cat, bbox_for(s), date_window(s, ymd(2024, 12, 31)));
  ASSERT_EQ(got.size(), 3u);
  EXPECT_EQ(got[0].scene_id, "e");
  EXPECT_EQ(got[1].scene_id, "a");
  EXPECT_EQ(got[2].scene_id, "c");
}

TEST(Catalog, AfterHorizonIsEmptyNotAnError) {
  ListCatalog cat;
  cat.scenes = {cand("a", ymd(2025, 1, 3), 1), cand("b", ymd(2025, 2, 1), 2)};
  const auto s = site_at(-33.0);
  EXPECT_TRUE(query_catalog(cat, bbox_for(s), date_window(s, ymd(2024, 12, 31))).empty());
}

TEST(Catalog, FootprintOutsideBoxIsDropped) {
  ListCatalog cat;
  auto far = cand("far", ymd(2024, 1, 3), 1);
  far.footprint = GeoBox{100, 10, 101, 11};
  auto near = cand("near", ymd(2024, 1, 3), 2);
  const auto s = site_at(-33.0, 148.0);
  near.footprint = bbox_for(s);
  cat.scenes = {far, near};
  const auto got = query_catalog(cat, bbox_for(s), date_window(s, ymd(2024, 12, 31)));
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0].scene_id, "near");
}

TEST(Catalog, RetriesWithDoublingBackoff) {
  ListCatalog cat;
  cat.failures_before_success = 2;
  cat.scenes = {cand("a", ymd(2024, 1, 3), 1)};
  std::vector<long> sleeps;
  RetryPolicy p;
  p.sleep = [&](std::chrono::milliseconds d) { sleeps.push_back(d.count()); };
  const auto s = site_at(-33.0);
  EXPECT_EQ(query_catalog(cat, bbox_for(s), date_window(s, ymd(2024, 12, 31)), p).size(), 1u);
  EXPECT_EQ(cat.calls, 3);
  EXPECT_EQ(sleeps, (std::vector<long>{200, 400}));
}

TEST(Catalog, TimeoutBecomesCatalogUnavailable) {
  ListCatalog cat;
  cat.failures_before_success = 100;
  RetryPolicy p;
  p.sleep = [](std::chrono::milliseconds) {};
  const auto s = site_at(-33.0);
  try {
    query_catalog(cat, bbox_for(s), date_window(s, ymd(2024, 12, 31)), p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::CatalogUnavailable);
    EXPECT_TRUE(e.retryable());
  }
  EXPECT_EQ(cat.calls, 3);
}

TEST(Catalog, PermanentFailureIsNotRetried) {
  ListCatalog cat;
  cat.failures_before_success = 100;
  cat.retryable = false;
  RetryPolicy p;
  p.sleep = [](std::chrono::milliseconds) {};
  const auto s = site_at(-33.0);
  EXPECT_EQ(code_of([&] { query_catalog(cat, bbox_for(s), date_window(s, ymd(2024, 12, 31)), p); }),
            ErrorCode::ProviderUnavailable);
  EXPECT_EQ(cat.calls, 1);
}

TEST(CatalogProperty, ResultsSortedAndFiltered) {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 200; ++t) {
    ListCatalog cat;
    const int n = static_cast<int>(rng() % 30);
    for (int i = 0; i < n; ++i) {
      const auto d = add_months(ymd(2022, 1, 1 + static_cast<unsigned>(rng() % 28)), static_cast<int>(rng() % 48));
      cat.scenes.push_back(cand("s" + std::to_string(i), d, static_cast<double>(rng() % 1000) / 10.0));
    }
    const auto s = site_at(t % 2 ? 45.0 : -30.0);
    const auto w = date_window(s, ymd(2024, 12, 31), static_cast<double>(rng() % 60));
    const auto got = query_catalog(cat, bbox_for(s), w);
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_TRUE(w.admits(got[i].capture_date));
      EXPECT_LE(got[i].cloud_pct, w.max_cloud_pct);
      if (i) EXPECT_LE(got[i - 1].cloud_pct, got[i].cloud_pct);
    }
    const auto expected = std::count_if(cat.scenes.begin(), cat.scenes.end(), [&](const SceneCandidate& c) {
      return w.admits(c.capture_date) && c.cloud_pct <= w.max_cloud_pct;
    });
    EXPECT_EQ(static_cast<long>(got.size()), expected);
  }
}

TEST(Catalog, FixtureFileRoundTrip) {
  TempDir dir;
  std::vector<SceneCandidate> cs = {cand("x", ymd(2024, 1, 2), 3.5), cand("y", ymd(2023, 12, 2), 0.0)};
  cs[0].footprint = GeoBox{1, 2, 3, 4};
  write_file_atomic(dir.path() / "catalog.json", candidates_to_json(cs));
  EXPECT_EQ(candidates_from_json(read_text_file(dir.path() / "catalog.json")), cs);
  FixtureCatalog fc(dir.path() / "catalog.json");
  EXPECT_EQ(fc.search({}, {}), cs);
  EXPECT_EQ(code_of([&] { fc.fetch(cs[0]); }), ErrorCode::DecodeError);
  FixtureCatalog missing(dir.path() / "nope.json");
  EXPECT_EQ(code_of([&] { missing.search({}, {}); }), ErrorCode::CatalogUnavailable);
}

TEST(Dossier, FullDossierIsNotSparse) {
  Dossier d{"S1", words(240), words(240), words(240), {"a"}, false};
  EXPECT_FALSE(validate_dossier(d).sparse_flag);
}

TEST(Dossier, MissingControversiesIsSparse) {
  Dossier d{"S1", words(200), words(100), "", {}, false};
  EXPECT_TRUE(validate_dossier(d).sparse_flag);
}

TEST(Dossier, OversizeSegmentNamesItsCount) {
  Dossier d{"S1", words(400), words(10), words(10), {}, false};
  try {
    validate_dossier(d);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SegmentTooLong);
    EXPECT_EQ(e.subject(), "history");
    EXPECT_EQ(e.count(), 400);
  }
  d.history = words(300);
  EXPECT_NO_THROW(validate_dossier(d));
}

TEST(Dossier, AllEmptyRejected) {
  Dossier d{"S1", "", "  \n", "", {}, false};
  EXPECT_EQ(code_of([&] { validate_dossier(d); }), ErrorCode::EmptyDossier);
}

TEST(Dossier, JsonRoundTrip) {
  Dossier d{"S1", "h", "g", "c", {"one", "two"}, false};
  EXPECT_EQ(dossier_from_json(dossier_to_json(d)), d);
  const auto j = nlohmann::json::parse(dossier_to_json(d));
  for (const char* k : {"history", "geology", "controversies", "sources"}) EXPECT_TRUE(j.contains(k)) << k;
}

TEST(Site, ValidationAndRoundTrip) {
  auto s = site_at(-23.6, 148.1);
  s.commodity = {"coal"};
  EXPECT_EQ(site_from_json(site_to_json(s)), s);
  EXPECT_EQ(code_of([] { validate_site(site_at(91.0)); }), ErrorCode::BadRequest);
  EXPECT_EQ(code_of([] { validate_site(site_at(0.0, 181.0)); }), ErrorCode::BadRequest);
  EXPECT_EQ(code_of([] { validate_site(site_at(0.0, 0.0, "../etc")); }), ErrorCode::BadRequest);
  EXPECT_EQ(code_of([] { validate_site(site_at(0.0, 0.0, "")); }), ErrorCode::BadRequest);
}

TEST(StatusMachine, ForwardOnly) {
  using S = SiteStatus;
  const std::vector<S> order = {S::New, S::Scened, S::Annotated, S::Captioned, S::Accepted};
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (std::size_t j = 0; j < order.size(); ++j) {
      const bool allowed = transition_allowed(order[i], order[j]);
      if (j < i) EXPECT_FALSE(allowed) << i << "->" << j;
      if (j == i || j == i + 1) EXPECT_TRUE(allowed) << i << "->" << j;
    }
    EXPECT_EQ(site_status_from_string(to_string(order[i])), order[i]);
  }
  EXPECT_TRUE(transition_allowed(S::Scened, S::Captioned));
  EXPECT_FALSE(transition_allowed(S::New, S::Accepted));
}

TEST(Registry, AddGetTransitions) {
  TempDir dir;
  Registry reg(dir.path());
  reg.add(site_at(-23.6, 148.1, "A"));
  EXPECT_EQ(code_of([&] { reg.add(site_at(0, 0, "A")); }), ErrorCode::BadRequest);
  EXPECT_EQ(code_of([&] { reg.get("B"); }), ErrorCode::NotFound);
  EXPECT_TRUE(fs::exists(dir.path() / "sites" / "A.json"));
  reg.set_status("A", SiteStatus::Scened);
  reg.set_status("A", SiteStatus::Captioned);
  EXPECT_EQ(code_of([&] { reg.set_status("A", SiteStatus::Annotated); }), ErrorCode::IllegalTransition);
  EXPECT_EQ(reg.promote("A", SiteStatus::Scened).status, SiteStatus::Captioned);
  auto renamed = site_at(-23.6, 148.1, "A");
  renamed.name = "Renamed";
  reg.upsert(renamed);
  EXPECT_EQ(reg.get("A").name, "Renamed");
  EXPECT_EQ(reg.get("A").status, SiteStatus::Captioned);
  EXPECT_FALSE(reg.dossier("A").has_value());
  EXPECT_TRUE(reg.put_dossier({"A", "h", "", "", {}, false}).sparse_flag);
  EXPECT_TRUE(reg.dossier("A")->sparse_flag);
  EXPECT_EQ(reg.list().size(), 1u);
}

TEST(Registry, ConcurrentPromotionsNeverRegress) {
  TempDir dir;
  Registry reg(dir.path());
  reg.add(site_at(0, 0, "A"));
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      const SiteStatus targets[] = {SiteStatus::Scened, SiteStatus::Annotated, SiteStatus::Captioned};
      for (int i = 0; i < 20; ++i) {
        reg.promote("A", targets[(t + i) % 3]);
        (void)reg.get("A");
      }
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(reg.get("A").status, SiteStatus::Captioned);
}
