#include "minescape/pipeline/workspace.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>
#include <set>

#include "minescape/caption/caption.hpp"
#include "minescape/judge/judge.hpp"
#include "minescape/raster/png.hpp"
#include "minescape/raster/quality.hpp"
#include "minescape/raster/render.hpp"
#include "minescape/raster/scene.hpp"
#include "minescape/spectral/indices.hpp"
#include "minescape/udm/features.hpp"
#include "minescape/udm/model.hpp"
#include "minescape/udm/scribbles.hpp"
#include "minescape/util.hpp"

namespace minescape::pipeline {

using nlohmann::json;

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Catalog: return "catalog";
    case Stage::Quality: return "quality";
    case Stage::Indices: return "indices";
    case Stage::Udm: return "udm";
    case Stage::Caption: return "caption";
    case Stage::Judge: return "judge";
  }
  return "?";
}

Stage stage_from_string(std::string_view s) {
  for (Stage st : kStages) {
    if (to_string(st) == s) return st;
  }
  throw Error(ErrorCode::BadRequest, "unknown stage '" + std::string(s) + "'", std::string(s));
}

// ---------------------------------------------------------------- services

Services default_services(const Config& config, Services s) {
  if (!s.catalog) s.catalog = std::make_shared<sites::FixtureCatalog>(config.resolve(config.catalog_file));
  auto http = [](const char* what, std::initializer_list<const char*> prefixes) -> std::shared_ptr<llm::ChatProvider> {
    for (const char* p : prefixes) {
      if (auto c = llm::http_config_from_env(p)) return std::make_shared<llm::HttpChatProvider>(*c);
    }
    throw Error(ErrorCode::ConfigError, std::string(what) + " provider is http but PROVIDER_URL is not set", what);
  };
  if (!s.caption_provider) {
    s.caption_provider = config.caption_provider == "http" ? http("caption", {""})
                                                           : std::make_shared<llm::MockProvider>(config.caption_seed);
  }
  if (!s.judge_provider) {
    s.judge_provider = config.judge_provider == "http" ? http("judge", {"JUDGE_", ""})
                                                       : std::make_shared<llm::MockJudgeProvider>(config.judge_seed);
  }
  if (!s.answer_provider) {
    s.answer_provider = config.answer_provider == "http" ? http("answer", {"ANSWER_", ""})
                                                         : std::make_shared<llm::EchoAnswerProvider>();
  }
  if (!s.embedder) {
    if (config.embedder == "http") {
      auto c = rag::http_embedder_config_from_env();
      if (!c) throw Error(ErrorCode::ConfigError, "rag.embedder is http but EMBEDDER_URL is not set", "rag.embedder");
      s.embedder = std::make_shared<rag::HttpEmbedder>(*c);
    } else {
      s.embedder = std::make_shared<rag::HashEmbedder>(config.embedding_dimension);
    }
  }
  return s;
}

// ---------------------------------------------------------------- records

const StageRecord* PipelineRun::stage(Stage s) const {
  for (const auto& r : stages) {
    if (r.stage == s) return &r;
  }
  return nullptr;
}

namespace {

json stage_to_json(const StageRecord& r) {
  json j = {{"stage", to_string(r.stage)}, {"status", r.status},           {"key", r.key},
            {"started_at", r.started_at},  {"finished_at", r.finished_at}, {"outputs", r.outputs}};
  if (r.error_code) j["error"] = {{"code", *r.error_code}, {"message", r.error_message}};
  return j;
}

StageRecord stage_from_json(const json& j) {
  StageRecord r;
  r.stage = stage_from_string(j.at("stage").get<std::string>());
  r.status = j.value("status", "");
  r.key = j.value("key", "");
  r.started_at = j.value("started_at", "");
  r.finished_at = j.value("finished_at", "");
  r.outputs = j.value("outputs", json::object());
  if (j.contains("error")) {
    r.error_code = j["error"].value("code", "");
    r.error_message = j["error"].value("message", "");
  }
  return r;
}

}  // namespace

json run_to_json(const PipelineRun& r) {
  json stages = json::array();
  for (const auto& s : r.stages) stages.push_back(stage_to_json(s));
  return {{"run_id", r.run_id},         {"site_id", r.site_id},       {"config_hash", r.config_hash},
          {"state", r.state},           {"stages", stages},           {"chosen_scene", r.chosen_scene},
          {"caption_id", r.caption_id}, {"verdict", r.verdict},       {"created_at", r.created_at},
          {"updated_at", r.updated_at}};
}

PipelineRun run_from_json(const json& j) {
  PipelineRun r;
  r.run_id = j.at("run_id").get<std::string>();
  r.site_id = j.at("site_id").get<std::string>();
  r.config_hash = j.value("config_hash", "");
  r.state = j.value("state", "");
  for (const auto& s : j.value("stages", json::array())) r.stages.push_back(stage_from_json(s));
  r.chosen_scene = j.value("chosen_scene", "");
  r.caption_id = j.value("caption_id", "");
  r.verdict = j.value("verdict", "");
  r.created_at = j.value("created_at", "");
  r.updated_at = j.value("updated_at", "");
  return r;
}

json review_to_json(const ReviewDecision& r) {
  return {{"caption_id", r.caption_id}, {"reviewer", r.reviewer},     {"decision", r.decision},
          {"note", r.note},             {"decided_at", r.decided_at}};
}

ReviewDecision review_from_json(const json& j) {
  return {j.at("caption_id").get<std::string>(), j.value("reviewer", ""), j.at("decision").get<std::string>(),
          j.value("note", ""), j.value("decided_at", "")};
}

json sync_to_json(const SyncSummary& s) {
  auto counts = [](const SyncCounts& c) {
    return json{{"added", c.added}, {"updated", c.updated}, {"skipped", c.skipped}, {"removed", c.removed}};
  };
  return {{"added", s.added},
          {"updated", s.updated},
          {"skipped", s.skipped},
          {"captions", counts(s.captions)},
          {"documents", counts(s.documents)},
          {"summaries", counts(s.summaries)},
          {"written", s.written},
          {"generation", s.generation}};
}

// ---------------------------------------------------------------- helpers

namespace {

void write_json(const fs::path& p, const json& j) {
  fs::create_directories(p.parent_path());
  write_file_atomic(p, j.dump(2));
}

json read_json(const fs::path& p) {
  try {
    return json::parse(read_text_file(p));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::DecodeError, std::string("unreadable JSON artifact: ") + e.what(), p.string());
  }
}

std::string digest(std::string_view s) { return hex64(fnv1a64(s)); }

std::string file_digest(const fs::path& p) {
  if (!fs::exists(p)) return "absent";
  const auto bytes = read_binary_file(p);
  return hex64(fnv1a64(std::span<const std::uint8_t>(bytes)));
}

std::string chain(const std::string& prev, const std::string& material) { return digest(prev + "|" + material); }

std::string site_identity(sites::SiteRecord s) {
  s.status = sites::SiteStatus::New;  // status changes must not invalidate caches
  return sites::site_to_json(s);
}

raster::RenderImage render_from_png(const fs::path& p, const std::string& source, const std::string& scene_id) {
  const auto bytes = read_binary_file(p);
  raster::RenderImage img;
  img.pixels = raster::decode_png_rgb(bytes);
  img.provenance.source = source;
  img.provenance.scene_id = scene_id;
  return img;
}

void write_png(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  fs::create_directories(p.parent_path());
  write_file_atomic(p, std::span<const std::uint8_t>(bytes));
}

}  // namespace

struct Workspace::State {
  std::mutex map_mutex;
  std::map<std::string, std::unique_ptr<std::mutex>> site_mutexes;
  std::mutex journal_mutex;
  std::mutex rag_mutex;
  std::unique_ptr<llm::RequestLog> log;
};

Workspace::Workspace(Config config, Services services)
    : config_(std::move(config)),
      services_(default_services(config_, std::move(services))),
      registry_(config_.root / "registry"),
      state_(std::make_shared<State>()) {
  fs::create_directories(config_.root / "runs");
  std::vector<std::string> secrets;
  for (const char* v : {"PROVIDER_KEY", "JUDGE_PROVIDER_KEY", "ANSWER_PROVIDER_KEY", "EMBEDDER_KEY"}) {
    if (const char* s = std::getenv(v); s && *s) secrets.emplace_back(s);
  }
  state_->log = std::make_unique<llm::RequestLog>(config_.root / "runs" / "provider_log.jsonl", secrets);
}

Workspace Workspace::open(const fs::path& root, Services services) {
  if (!fs::is_directory(root)) throw Error(ErrorCode::ConfigError, "workspace directory does not exist", root.string());
  return Workspace(load_config(root), std::move(services));
}

void init_workspace(const fs::path& root) {
  for (const char* d : {"registry/sites", "registry/dossiers", "catalog", "documents", "sites", "runs", "rag"}) {
    fs::create_directories(root / d);
  }
  if (!fs::exists(root / "config.ini")) write_file_atomic(root / "config.ini", default_config_text());
}

fs::path Workspace::site_dir(std::string_view site_id) const { return config_.root / "sites" / std::string(site_id); }

std::mutex& Workspace::site_lock(const std::string& site_id) {
  std::lock_guard lock(state_->map_mutex);
  auto& m = state_->site_mutexes[site_id];
  if (!m) m = std::make_unique<std::mutex>();
  return *m;
}

void Workspace::journal(const std::string& run_id, const std::string& site_id, const std::string& stage,
                        const std::string& event, const std::string& detail) {
  json j = {{"at", utc_timestamp()}, {"run_id", run_id}, {"site_id", site_id}, {"stage", stage}, {"event", event}};
  if (!detail.empty()) j["detail"] = detail;
  std::lock_guard lock(state_->journal_mutex);
  append_line(config_.root / "runs" / "journal.jsonl", j.dump());
}

llm::CallPolicy Workspace::call_policy() const {
  llm::CallPolicy p;
  p.max_retries = config_.max_retries;
  p.base_delay = std::chrono::milliseconds(config_.base_delay_ms);
  p.sleep = services_.sleep;
  p.log = state_->log.get();
  return p;
}

std::string Workspace::run_id_for(const std::string& site_id) const {
  const auto site = registry_.get(site_id);
  const auto dossier = registry_.dossier(site_id);
  const std::string material =
      site_identity(site) + "|" + (dossier ? sites::dossier_to_json(*dossier) : std::string("-")) + "|" + config_.config_hash();
  return site_id + "-" + digest(material).substr(0, 12);
}

std::optional<PipelineRun> Workspace::load_run(const std::string& run_id) const {
  const fs::path p = config_.root / "runs" / (run_id + ".json");
  if (!fs::exists(p)) return std::nullopt;
  return run_from_json(read_json(p));
}

std::optional<PipelineRun> Workspace::latest_run(const std::string& site_id) const {
  std::optional<PipelineRun> best;
  const fs::path dir = config_.root / "runs";
  if (!fs::exists(dir)) return best;
  for (const auto& f : fs::directory_iterator(dir)) {
    if (f.path().extension() != ".json") continue;
    const std::string name = f.path().stem().string();
    if (name.rfind(site_id + "-", 0) != 0) continue;
    auto r = run_from_json(read_json(f.path()));
    if (r.site_id != site_id) continue;
    if (!best || r.updated_at > best->updated_at || (r.updated_at == best->updated_at && r.run_id > best->run_id)) best = r;
  }
  return best;
}

// ---------------------------------------------------------------- pipeline

namespace {

struct StageContext {
  std::string key;
  json outputs = json::object();
  std::vector<std::string> files;  // relative to the site dir; all must exist for a cache hit
};

bool cache_hit(const fs::path& site_dir, Stage stage, const std::string& key, json& outputs) {
  const fs::path p = site_dir / "stages" / (std::string(to_string(stage)) + ".json");
  if (!fs::exists(p)) return false;
  json rec;
  try {
    rec = json::parse(read_text_file(p));
  } catch (const json::exception&) {
    return false;
  }
  if (rec.value("key", "") != key) return false;
  for (const auto& f : rec.value("files", json::array())) {
    if (!fs::exists(site_dir / f.get<std::string>())) return false;
  }
  outputs = rec.value("outputs", json::object());
  return true;
}

void commit_stage(const fs::path& site_dir, Stage stage, const StageContext& ctx) {
  write_json(site_dir / "stages" / (std::string(to_string(stage)) + ".json"),
             {{"key", ctx.key}, {"outputs", ctx.outputs}, {"files", ctx.files}, {"completed_at", utc_timestamp()}});
}

fs::path chosen_scene_path(const fs::path& site_dir) {
  const fs::path q = site_dir / "quality.json";
  if (!fs::exists(q)) throw Error(ErrorCode::IllegalTransition, "no scene has been chosen for this site yet");
  const std::string chosen = read_json(q).at("chosen").get<std::string>();
  return site_dir / "scenes" / (chosen + ".tif");
}

}  // namespace

PipelineRun Workspace::run_site(const std::string& site_id, Stage until) {
  std::lock_guard site_guard(site_lock(site_id));
  const sites::SiteRecord site = registry_.get(site_id);
  const fs::path dir = site_dir(site_id);
  fs::create_directories(dir);

  PipelineRun run;
  run.run_id = run_id_for(site_id);
  run.site_id = site_id;
  run.config_hash = config_.config_hash();
  run.state = "running";
  run.created_at = utc_timestamp();
  if (auto old = load_run(run.run_id)) run.created_at = old->created_at;
  auto save_run = [&] {
    run.updated_at = utc_timestamp();
    write_json(config_.root / "runs" / (run.run_id + ".json"), run_to_json(run));
  };
  save_run();
  journal(run.run_id, site_id, "-", "start");

  const auto policy = call_policy();
  std::string prev_key = digest(site_identity(site));
  std::string scene_id;
  bool udm_available = false;

  auto execute = [&](Stage stage, const std::string& key, auto&& body) {
    StageRecord rec;
    rec.stage = stage;
    rec.key = key;
    rec.started_at = utc_timestamp();
    const std::string name(to_string(stage));
    json cached;
    if (cache_hit(dir, stage, key, cached)) {
      rec.status = "cached";
      rec.outputs = cached;
    } else {
      journal(run.run_id, site_id, name, "begin");
      StageContext ctx;
      ctx.key = key;
      try {
        body(ctx);
      } catch (const Error& e) {
        rec.status = "failed";
        rec.error_code = std::string(minescape::to_string(e.code()));
        rec.error_message = e.what();
        rec.finished_at = utc_timestamp();
        run.stages.push_back(rec);
        run.state = "failed";
        save_run();
        journal(run.run_id, site_id, name, "failed", rec.error_code.value() + ": " + e.what());
        throw;
      }
      if (ctx.outputs.value("skipped", false)) {
        rec.status = "skipped";
      } else {
        rec.status = "done";
      }
      commit_stage(dir, stage, ctx);
      rec.outputs = ctx.outputs;
    }
    rec.finished_at = utc_timestamp();
    run.stages.push_back(rec);
    save_run();
    journal(run.run_id, site_id, name, rec.status);
    prev_key = key;
    return rec.outputs;
  };

  auto reached = [&](Stage s) { return static_cast<int>(s) <= static_cast<int>(until); };

  // catalog: query, filter, download the best candidates by cloud cover
  {
    const fs::path catalog_file = config_.resolve(config_.catalog_file);
    const std::string key = chain(prev_key, "catalog|" + format_date(config_.horizon) + "|" +
                                                std::to_string(config_.max_cloud_pct) + "|" +
                                                std::to_string(config_.lookback_months) + "|" +
                                                std::to_string(config_.max_candidates) + "|" + file_digest(catalog_file));
    execute(Stage::Catalog, key, [&](StageContext& ctx) {
      const auto box = sites::bbox_for(site);
      const auto window = sites::date_window(site, config_.horizon, config_.max_cloud_pct, config_.lookback_months);
      sites::RetryPolicy retry;
      retry.sleep = services_.sleep;
      const auto candidates = sites::query_catalog(*services_.catalog, box, window, retry);
      if (candidates.empty()) {
        throw Error(ErrorCode::NoViableScene, "no catalog scene passes the box, date window and cloud limit", site_id);
      }
      json downloaded = json::array();
      for (std::size_t i = 0; i < candidates.size() && i < config_.max_candidates; ++i) {
        const fs::path src = services_.catalog->fetch(candidates[i]);
        const std::string rel = "scenes/" + candidates[i].scene_id + ".tif";
        const auto bytes = read_binary_file(src);
        fs::create_directories(dir / "scenes");
        write_file_atomic(dir / rel, std::span<const std::uint8_t>(bytes));
        if (fs::exists(raster::sidecar_path(src))) {
          write_file_atomic(raster::sidecar_path(dir / rel), read_text_file(raster::sidecar_path(src)));
        }
        ctx.files.push_back(rel);
        downloaded.push_back(candidates[i].scene_id);
      }
      write_json(dir / "candidates.json", json::parse(sites::candidates_to_json(candidates)));
      ctx.files.push_back("candidates.json");
      ctx.outputs = {{"candidates", candidates.size()}, {"downloaded", downloaded}};
    });
  }
  if (!reached(Stage::Quality)) goto done;

  // quality: metrics on the enhanced render, outlier-aware ranking
  {
    const std::string key = chain(prev_key, "quality|" + std::to_string(config_.gap_threshold) + "|" +
                                                std::to_string(config_.enhance.low_pct) + "|" +
                                                std::to_string(config_.enhance.high_pct) + "|" +
                                                std::to_string(config_.enhance.sat_gain));
    const json out = execute(Stage::Quality, key, [&](StageContext& ctx) {
      const json cands = read_json(dir / "stages" / "catalog.json").at("outputs").at("downloaded");
      std::vector<raster::QualityReport> reports;
      json unusable = json::array();
      std::map<std::string, raster::RenderImage> renders;
      for (const auto& id : cands) {
        const std::string sid = id.get<std::string>();
        try {
          const auto cube = raster::load_scene(dir / "scenes" / (sid + ".tif"));
          auto render = raster::render_rgb(cube, config_.enhance);
          reports.push_back(raster::quality_metrics(render, cube.nodata(), config_.gap_threshold));
          renders.emplace(sid, std::move(render));
        } catch (const Error& e) {
          if (e.code() != ErrorCode::EmptyScene && e.code() != ErrorCode::DecodeError) throw;
          unusable.push_back({{"scene_id", sid}, {"code", minescape::to_string(e.code())}, {"message", e.what()}});
        }
      }
      const auto ranked = raster::rank_candidates(reports);
      if (ranked.empty()) throw Error(ErrorCode::NoViableScene, "every downloaded scene failed the quality checks", site_id);
      json rj = json::array(), ranking = json::array();
      for (const auto& r : reports) {
        rj.push_back({{"scene_id", r.scene_id}, {"contrast", r.contrast}, {"sharpness", r.sharpness},
                      {"entropy_bits", r.entropy_bits}, {"nodata_fraction", r.nodata_fraction},
                      {"swath_gap", r.swath_gap}});
      }
      for (const auto& r : ranked) ranking.push_back({{"scene_id", r.scene_id}, {"composite_score", r.composite_score}});
      const std::string chosen = ranked.front().scene_id;
      write_png(dir / "renders" / "rgb.png", renders.at(chosen).to_png());
      write_json(dir / "quality.json", {{"reports", rj}, {"ranking", ranking}, {"unusable", unusable}, {"chosen", chosen}});
      ctx.files = {"quality.json", "renders/rgb.png", "scenes/" + chosen + ".tif"};
      ctx.outputs = {{"chosen", chosen}, {"ranked", ranking.size()}};
    });
    scene_id = out.at("chosen").get<std::string>();
    run.chosen_scene = scene_id;
    registry_.promote(site_id, sites::SiteStatus::Scened);
  }
  if (!reached(Stage::Indices)) goto done;

  // indices
  {
    const std::string key = chain(prev_key, "indices|" + scene_id);
    execute(Stage::Indices, key, [&](StageContext& ctx) {
      const auto cube = raster::load_scene(chosen_scene_path(dir));
      for (auto kind : {spectral::IndexKind::NDVI, spectral::IndexKind::NDBI, spectral::IndexKind::FMI}) {
        const auto idx = spectral::compute_index(cube, kind);
        const std::string name = to_lower(spectral::to_string(kind));
        fs::create_directories(dir / "indices");
        spectral::save_index_tiff(dir / "indices" / (name + ".tif"), idx, cube.geo());
        write_png(dir / "renders" / (name + ".png"), spectral::render_index(idx).to_png());
        ctx.files.push_back("indices/" + name + ".tif");
        ctx.files.push_back("renders/" + name + ".png");
      }
      ctx.outputs = {{"scene_id", scene_id}, {"indices", {"ndvi", "ndbi", "fmi"}}};
    });
  }
  if (!reached(Stage::Udm)) goto done;

  // udm: only when enabled and a model has been trained for the site
  {
    const fs::path model_file = dir / "udm" / "model.json";
    const bool active = config_.udm_enabled && fs::exists(model_file);
    const auto& p = config_.udm;
    const std::string key =
        chain(prev_key, active ? "udm|" + file_digest(model_file) + "|" + std::to_string(p.ndvi_gate) + "|" +
                                     std::to_string(p.min_area_px) + "|" + std::to_string(p.max_area_px) + "|" +
                                     std::to_string(p.distance_margin) + "|" + std::to_string(p.morphology_radius) +
                                     "|" + std::to_string(config_.texture_window)
                               : std::string("udm|off"));
    const json out = execute(Stage::Udm, key, [&](StageContext& ctx) {
      if (!active) {
        ctx.outputs = {{"skipped", true}, {"reason", config_.udm_enabled ? "no trained model" : "disabled"}};
        return;
      }
      const auto cube = raster::load_scene(chosen_scene_path(dir));
      const auto model = udm::model_from_json(read_text_file(model_file));
      const auto features = udm::extract_features(cube, config_.texture_window);
      const auto labels = udm::postprocess(udm::classify(features, model, spectral::ndvi(cube), p), p);
      const auto png = udm::label_png(labels);
      write_png(dir / "udm" / "labels.png", png);
      write_png(dir / "renders" / "udm.png", png);
      fs::create_directories(dir / "udm");
      write_file_atomic(dir / "udm" / "components.json", udm::components_json(labels));
      ctx.files = {"udm/labels.png", "renders/udm.png", "udm/components.json"};
      ctx.outputs = {{"components", labels.components.size()}};
    });
    udm_available = !out.value("skipped", false);
  }
  if (!reached(Stage::Caption)) goto done;

  // caption
  {
    const auto dossier = registry_.dossier(site_id).value_or(sites::Dossier{site_id, "", "", "", {}, false});
    caption::CaptionConfig cc = config_.caption;
    if (config_.payload == "rgb") {
      cc.arm = caption::PayloadArm::RgbOnly;
    } else if (config_.payload == "rgb_ndvi_udm") {
      cc.arm = caption::PayloadArm::RgbNdviUdm;
    } else {
      cc.arm = udm_available ? caption::PayloadArm::RgbNdviUdm : caption::PayloadArm::RgbOnly;
    }
    std::optional<caption::PromptBundle> bundle;
    std::string bundle_error;
    try {
      bundle = caption::build_prompt(site, dossier, caption::default_exemplars(), cc);
    } catch (const Error&) {
      // surfaced by the stage body so that it is recorded on the run
    }
    std::string material = "caption|" + (bundle ? caption::bundle_to_json(*bundle) : std::string("invalid")) + "|" +
                           services_.caption_provider->name() + "|" + std::to_string(cc.word_cap) + "|" +
                           std::to_string(static_cast<int>(cc.arm)) + "|" +
                           std::to_string(cc.hyperparams.temperature) + "|" +
                           std::to_string(cc.hyperparams.frequency_penalty) + "|" +
                           std::to_string(cc.hyperparams.max_tokens);
    for (const auto& b : cc.hyperparams.banned_phrases) material += "|" + b;
    for (const char* layer : {"rgb", "ndvi", "udm"}) material += "|" + file_digest(dir / "renders" / (std::string(layer) + ".png"));
    const json out = execute(Stage::Caption, chain(prev_key, material), [&](StageContext& ctx) {
      if (!bundle) bundle = caption::build_prompt(site, dossier, caption::default_exemplars(), cc);  // rethrows
      const auto rgb = render_from_png(dir / "renders" / "rgb.png", "rgb", scene_id);
      std::optional<raster::RenderImage> ndvi, udm_img;
      if (cc.arm == caption::PayloadArm::RgbNdviUdm) {
        if (fs::exists(dir / "renders" / "ndvi.png")) ndvi = render_from_png(dir / "renders" / "ndvi.png", "index:NDVI", scene_id);
        if (udm_available && fs::exists(dir / "renders" / "udm.png")) udm_img = render_from_png(dir / "renders" / "udm.png", "udm", scene_id);
      }
      const auto payload = caption::make_payload(cc.arm, rgb, ndvi ? &*ndvi : nullptr, udm_img ? &*udm_img : nullptr);
      caption::GenerateOptions opts;
      opts.site_id = site_id;
      opts.word_cap = cc.word_cap;
      opts.policy = policy;
      const auto cand = caption::generate_caption(*services_.caption_provider, *bundle, payload, cc.hyperparams, opts);
      fs::create_directories(dir / "captions");
      write_file_atomic(dir / "captions" / (cand.caption_id + ".json"), caption::candidate_to_json(cand));
      registry_.promote(site_id, sites::SiteStatus::Captioned);
      ctx.files = {"captions/" + cand.caption_id + ".json"};
      ctx.outputs = {{"caption_id", cand.caption_id}, {"payload", cand.payload_roles}, {"retries", cand.retries}};
    });
    run.caption_id = out.at("caption_id").get<std::string>();
    registry_.promote(site_id, sites::SiteStatus::Captioned);
  }
  if (!reached(Stage::Judge)) goto done;

  // judge
  {
    const auto& rubric = judge::default_rubric();
    std::string material = "judge|" + run.caption_id + "|" + services_.judge_provider->name() + "|" +
                           std::to_string(config_.gate.mean_min) + "|" + std::to_string(config_.gate.dim_min) + "|" +
                           rubric.name + "|" + std::to_string(rubric.version) + "|" + digest(judge::judge_system_prompt());
    const json out = execute(Stage::Judge, chain(prev_key, material), [&](StageContext& ctx) {
      const auto cand = caption::candidate_from_json(read_text_file(dir / "captions" / (run.caption_id + ".json")));
      judge::EvaluateOptions opts;
      opts.policy = config_.gate;
      opts.call_policy = policy;
      opts.parallel = config_.judge_parallel;
      const auto card = judge::evaluate(*services_.judge_provider, cand, rubric, opts);
      fs::create_directories(dir / "judge");
      write_file_atomic(dir / "judge" / (run.caption_id + ".json"), judge::scorecard_to_json(card));
      ctx.files = {"judge/" + run.caption_id + ".json"};
      ctx.outputs = {{"caption_id", run.caption_id},
                     {"verdict", judge::to_string(card.verdict)},
                     {"mean", card.mean()},
                     {"complete", card.complete()}};
    });
    run.verdict = out.at("verdict").get<std::string>();
  }

done:
  run.state = reached(Stage::Judge) ? "complete" : "partial";
  save_run();
  journal(run.run_id, site_id, "-", run.state);
  return run;
}

// ---------------------------------------------------------------- udm

json Workspace::save_scribbles(const std::string& site_id, std::string_view geojson) {
  std::lock_guard guard(site_lock(site_id));
  const auto site = registry_.get(site_id);
  if (!sites::transition_allowed(site.status, sites::SiteStatus::Annotated)) {
    throw Error(ErrorCode::IllegalTransition,
                "site is " + std::string(sites::to_string(site.status)) + " and cannot return to annotated", site_id);
  }
  const fs::path dir = site_dir(site_id);
  const fs::path scene_path = chosen_scene_path(dir);
  const auto set = udm::parse_scribbles(geojson);
  const auto cube = raster::load_scene(scene_path);
  if (!set.scene_id.empty() && set.scene_id != cube.scene_id()) {
    throw Error(ErrorCode::BadRequest, "scribbles were drawn on scene " + set.scene_id + ", the chosen scene is " + cube.scene_id(),
                set.scene_id);
  }
  const auto raster = udm::rasterize_scribbles(set, cube);
  write_file_atomic(dir / "scribbles.geojson", udm::to_geojson(set));
  const auto updated = registry_.set_status(site_id, sites::SiteStatus::Annotated);
  std::map<std::string, std::size_t> per_class = {{"urban", 0}, {"mining", 0}, {"negative", 0}};
  for (const auto& s : raster.samples) per_class[std::string(udm::to_string(s.cls))]++;
  return {{"site_id", site_id},
          {"status", sites::to_string(updated.status)},
          {"scene_id", cube.scene_id()},
          {"strokes", set.strokes.size()},
          {"samples", raster.samples.size()},
          {"per_class", per_class},
          {"conflicts", raster.conflicts},
          {"masked", raster.masked}};
}

json Workspace::train_udm(const std::string& site_id) {
  std::lock_guard guard(site_lock(site_id));
  registry_.get(site_id);
  const fs::path dir = site_dir(site_id);
  if (!fs::exists(dir / "scribbles.geojson")) throw Error(ErrorCode::IllegalTransition, "no scribbles saved for this site", site_id);
  const auto cube = raster::load_scene(chosen_scene_path(dir));
  const auto set = udm::parse_scribbles(read_text_file(dir / "scribbles.geojson"));
  const auto samples = udm::rasterize_scribbles(set, cube);
  const auto features = udm::extract_features(cube, config_.texture_window);
  udm::TrainOptions opts;
  opts.veto_enabled = config_.udm_veto;
  auto model = udm::train(features, samples.samples, opts);
  model.trained_on = {cube.scene_id()};
  fs::create_directories(dir / "udm");
  write_file_atomic(dir / "udm" / "model.json", udm::model_to_json(model));
  json counts = json::object();
  for (const auto& [cls, n] : model.sample_counts) counts[std::string(udm::to_string(cls))] = n;
  return {{"site_id", site_id}, {"scene_id", cube.scene_id()}, {"sample_counts", counts}, {"veto", model.has_negative()},
          {"conflicts", samples.conflicts}, {"masked", samples.masked}};
}

json Workspace::reuse_udm(const std::string& site_id, const std::string& from_site) {
  registry_.get(site_id);
  registry_.get(from_site);
  if (site_id == from_site) throw Error(ErrorCode::BadRequest, "a site cannot reuse its own model", site_id);
  const fs::path src = site_dir(from_site) / "udm" / "model.json";
  if (!fs::exists(src)) throw Error(ErrorCode::IllegalTransition, "no UDM model trained for this site", from_site);
  const std::string text = read_text_file(src);
  const auto model = udm::model_from_json(text);
  std::lock_guard guard(site_lock(site_id));
  const fs::path dir = site_dir(site_id);
  fs::create_directories(dir / "udm");
  write_file_atomic(dir / "udm" / "model.json", text);
  return {{"site_id", site_id}, {"from_site", from_site}, {"trained_on", model.trained_on}, {"veto", model.has_negative()}};
}

json Workspace::classify_udm(const std::string& site_id) {
  std::lock_guard guard(site_lock(site_id));
  registry_.get(site_id);
  const fs::path dir = site_dir(site_id);
  if (!fs::exists(dir / "udm" / "model.json")) throw Error(ErrorCode::IllegalTransition, "no UDM model trained for this site", site_id);
  const auto cube = raster::load_scene(chosen_scene_path(dir));
  const auto model = udm::model_from_json(read_text_file(dir / "udm" / "model.json"));
  const auto features = udm::extract_features(cube, config_.texture_window);
  const auto labels = udm::postprocess(udm::classify(features, model, spectral::ndvi(cube), config_.udm), config_.udm);
  const auto png = udm::label_png(labels);
  write_png(dir / "udm" / "labels.png", png);
  write_png(dir / "renders" / "udm.png", png);
  const std::string comps = udm::components_json(labels);
  write_file_atomic(dir / "udm" / "components.json", comps);
  json j = json::parse(comps);
  j["site_id"] = site_id;
  j["render"] = "/sites/" + site_id + "/render/udm";
  return j;
}

std::vector<std::uint8_t> Workspace::render(const std::string& site_id, std::string_view layer) const {
  static const std::set<std::string, std::less<>> layers = {"rgb", "ndvi", "ndbi", "fmi", "udm"};
  if (!layers.count(layer)) throw Error(ErrorCode::BadRequest, "unknown layer '" + std::string(layer) + "'", std::string(layer));
  registry_.get(site_id);
  const fs::path p = site_dir(site_id) / "renders" / (std::string(layer) + ".png");
  if (!fs::exists(p)) throw Error(ErrorCode::NotFound, "layer " + std::string(layer) + " has not been rendered", site_id);
  return read_binary_file(p);
}

// ---------------------------------------------------------------- captions and review

namespace {

std::string site_of_caption(const std::string& caption_id) {
  const auto dash = caption_id.rfind('-');
  if (dash == std::string::npos || dash == 0) return {};
  return caption_id.substr(0, dash);
}

bool safe_id(const std::string& id) {
  if (id.empty()) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
  }) && id.find("..") == std::string::npos;
}

}  // namespace

json Workspace::caption_view(const std::string& caption_id) const {
  const std::string site_id = site_of_caption(caption_id);
  if (!safe_id(caption_id) || site_id.empty()) throw Error(ErrorCode::NotFound, "unknown caption", caption_id);
  const fs::path dir = site_dir(site_id);
  const fs::path cp = dir / "captions" / (caption_id + ".json");
  if (!fs::exists(cp)) throw Error(ErrorCode::NotFound, "unknown caption", caption_id);
  json v = {{"caption_id", caption_id}, {"site_id", site_id}, {"caption", read_json(cp)}};
  const fs::path jp = dir / "judge" / (caption_id + ".json");
  const fs::path rp = dir / "reviews" / (caption_id + ".json");
  v["scorecard"] = fs::exists(jp) ? read_json(jp) : json(nullptr);
  v["review"] = fs::exists(rp) ? read_json(rp) : json(nullptr);
  const bool accepted = !v["scorecard"].is_null() && v["scorecard"].value("verdict", "") == "accept";
  v["judge_accepted"] = accepted;
  v["reviewable"] = accepted && v["review"].is_null();
  return v;
}

json Workspace::captions(const std::string& site_id) const {
  registry_.get(site_id);
  json out = json::array();
  const fs::path dir = site_dir(site_id) / "captions";
  if (!fs::exists(dir)) return out;
  std::vector<std::string> ids;
  for (const auto& f : fs::directory_iterator(dir)) {
    if (f.path().extension() == ".json") ids.push_back(f.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());
  for (const auto& id : ids) out.push_back(caption_view(id));
  return out;
}

std::vector<std::string> Workspace::review_queue() const {
  std::vector<std::string> out;
  for (const auto& s : registry_.list()) {
    for (const auto& v : captions(s.site_id)) {
      if (v["reviewable"].get<bool>()) out.push_back(v["caption_id"].get<std::string>());
    }
  }
  return out;
}

ReviewDecision Workspace::review(const std::string& caption_id, const std::string& decision, const std::string& note,
                                 const std::string& reviewer) {
  if (decision != "accept" && decision != "reject") {
    throw Error(ErrorCode::BadRequest, "decision must be accept or reject", decision);
  }
  const std::string site_id = site_of_caption(caption_id);
  if (!safe_id(caption_id) || site_id.empty() || !registry_.exists(site_id)) {
    throw Error(ErrorCode::NotFound, "unknown caption", caption_id);
  }
  std::lock_guard guard(site_lock(site_id));
  const json view = caption_view(caption_id);
  if (!view["judge_accepted"].get<bool>()) {
    throw Error(ErrorCode::IllegalTransition, "only judge-accepted captions can be reviewed", caption_id);
  }
  if (!view["review"].is_null()) throw Error(ErrorCode::IllegalTransition, "caption already has a review decision", caption_id);
  if (decision == "accept") {
    const auto site = registry_.get(site_id);
    if (site.status != sites::SiteStatus::Accepted) registry_.set_status(site_id, sites::SiteStatus::Accepted);
  }
  ReviewDecision d{caption_id, reviewer.empty() ? "operator" : reviewer, decision, note, utc_timestamp()};
  write_json(site_dir(site_id) / "reviews" / (caption_id + ".json"), review_to_json(d));
  return d;
}

// ---------------------------------------------------------------- rag

agentic::KnowledgeBase Workspace::load_knowledge_base() const {
  const fs::path current = config_.root / "rag" / "CURRENT";
  if (fs::exists(current)) {
    const std::string gen = trim(read_text_file(current));
    return agentic::KnowledgeBase::load(config_.root / "rag" / gen);
  }
  return agentic::KnowledgeBase(services_.embedder->name(), services_.embedder->dimension());
}

namespace {

template <typename Fn>
void sync_chunks(rag::VectorStore& store, const std::vector<rag::Chunk>& chunks, SyncCounts& counts, Fn&& embed) {
  for (const auto& c : chunks) {
    const auto existing = store.get(c.chunk_id);
    if (existing && existing->chunk == c) {
      ++counts.skipped;
      continue;
    }
    store.upsert(embed(c));
    ++(existing ? counts.updated : counts.added);
  }
}

void drop_stale(rag::VectorStore& store, const std::string& doc_id, const std::vector<rag::Chunk>& keep, SyncCounts& counts) {
  std::set<std::string> ids;
  for (const auto& c : keep) ids.insert(c.chunk_id);
  for (const auto& e : store.entries()) {
    if (e.chunk.doc_id == doc_id && !ids.count(e.chunk.chunk_id)) {
      store.remove(e.chunk.chunk_id);
      ++counts.removed;
    }
  }
}

}  // namespace

SyncSummary Workspace::rag_sync() {
  std::lock_guard guard(state_->rag_mutex);
  auto kb = load_knowledge_base();
  rag::Embedder& embedder = *services_.embedder;
  if (kb.embedder() != embedder.name() || kb.dimension() != embedder.dimension()) {
    throw Error(ErrorCode::EmbedderMismatch,
                "knowledge base was built with " + kb.embedder() + ", configured embedder is " + embedder.name());
  }
  auto embed = [&](const rag::Chunk& c) {
    try {
      return rag::embed_chunk(embedder, c);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::SyncFailed) throw;
      throw Error(ErrorCode::SyncFailed, std::string("embedding failed: ") + e.what(), c.chunk_id);
    }
  };

  SyncSummary s;
  for (const auto& site : registry_.list()) {
    const fs::path rdir = site_dir(site.site_id) / "reviews";
    if (!fs::exists(rdir)) continue;
    std::vector<fs::path> files;
    for (const auto& f : fs::directory_iterator(rdir)) {
      if (f.path().extension() == ".json") files.push_back(f.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      const auto rev = review_from_json(read_json(f));
      if (rev.decision != "accept") continue;
      const auto cand = caption::candidate_from_json(
          read_text_file(site_dir(site.site_id) / "captions" / (rev.caption_id + ".json")));
      const json meta = {{"kind", "caption"},       {"site_id", site.site_id}, {"caption_id", rev.caption_id},
                         {"mine_name", site.name},  {"country", site.country}, {"lat", site.lat},
                         {"lon", site.lon}};
      std::vector<rag::Chunk> chunks;
      for (const auto& c : rag::chunk_text(cand.text, rev.caption_id, config_.chunk_size, config_.overlap, meta)) {
        chunks.push_back(rag::prepend_metadata(c));
      }
      sync_chunks(kb.captions, chunks, s.captions, embed);
    }
  }

  const fs::path docs = config_.resolve(config_.documents_dir);
  if (fs::exists(docs)) {
    std::vector<fs::path> files;
    for (const auto& f : fs::directory_iterator(docs)) {
      const auto ext = f.path().extension();
      if (ext == ".txt" || ext == ".md") files.push_back(f.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      const std::string stem = f.stem().string();
      json meta = json::object();
      std::string source_file = f.filename().string();
      const fs::path meta_file = docs / (stem + ".meta.json");
      if (fs::exists(meta_file)) {
        const json m = read_json(meta_file);
        source_file = m.value("source_file", source_file);
        if (m.contains("title")) meta["title"] = m["title"];
        if (m.contains("metadata") && m["metadata"].is_object()) meta.update(m["metadata"]);
      }
      agentic::HierarchyOptions opts;
      opts.summary_budget = config_.summary_budget;
      opts.chunk_size = config_.chunk_size;
      opts.overlap = config_.overlap;
      if (config_.summaries == "abstractive") opts.summarizer = services_.answer_provider.get();
      const fs::path toc_file = docs / (stem + ".toc.json");
      if (fs::exists(toc_file)) opts.toc = agentic::parse_toc(read_json(toc_file));
      const auto h = agentic::build_hierarchy(read_text_file(f), stem, source_file, opts, meta);
      sync_chunks(kb.summaries, h.summaries, s.summaries, embed);
      drop_stale(kb.summaries, stem, h.summaries, s.summaries);
      sync_chunks(kb.chunks, h.chunks, s.documents, embed);
      drop_stale(kb.chunks, stem, h.chunks, s.documents);
      std::erase_if(kb.maps, [&](const agentic::DocumentMap& m) { return m.doc_id == stem; });
      kb.maps.push_back(h.map);
    }
  }

  s.added = s.captions.added + s.documents.added;
  s.updated = s.captions.updated + s.documents.updated;
  s.skipped = s.captions.skipped + s.documents.skipped;
  const bool changed = s.added + s.updated + s.summaries.added + s.summaries.updated + s.summaries.removed +
                           s.documents.removed > 0;
  const fs::path rag_dir = config_.root / "rag";
  const fs::path current = rag_dir / "CURRENT";
  std::string old_gen = fs::exists(current) ? trim(read_text_file(current)) : std::string();
  s.generation = old_gen;
  if (!changed) return s;

  int n = 0;
  if (!old_gen.empty()) n = std::stoi(old_gen.substr(3));
  char name[32];
  std::snprintf(name, sizeof name, "kb-%06d", n + 1);
  const fs::path gen_dir = rag_dir / name;
  fs::remove_all(gen_dir);  // leftover of an interrupted sync
  kb.save(gen_dir);
  write_file_atomic(current, std::string(name) + "\n");
  for (const auto& f : fs::directory_iterator(rag_dir)) {
    const std::string fname = f.path().filename().string();
    if (f.is_directory() && fname.rfind("kb-", 0) == 0 && fname != name) {
      std::error_code ec;
      fs::remove_all(f.path(), ec);
    }
  }
  s.written = true;
  s.generation = name;
  return s;
}

json Workspace::rag_query(const std::string& query, const std::string& mode) {
  if (trim(query).empty()) throw Error(ErrorCode::BadRequest, "query is empty");
  if (mode != "flat" && mode != "agentic") throw Error(ErrorCode::BadRequest, "mode must be flat or agentic", mode);
  const auto kb = load_knowledge_base();
  rag::Embedder& embedder = *services_.embedder;
  agentic::AgenticParams params = config_.agentic;
  params.answer.call_policy = call_policy();
  json out;
  if (mode == "agentic") {
    out = agentic::agentic_to_json(agentic::agentic_answer(*services_.answer_provider, query, kb, embedder, params));
  } else {
    const auto hits = agentic::flat_retrieve(query, kb, embedder, params.cascade.k_chunks + params.cascade.k_captions);
    out = {{"answer", nullptr}, {"refused", true}};
    if (hits.empty()) {
      out["refusal"] = {{"code", "InsufficientEvidence"}, {"message", "no evidence retrieved for the query"}};
    } else {
      try {
        out["answer"] = rag::answer_to_json(rag::answer(*services_.answer_provider, query, hits, params.answer));
        out["refused"] = false;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::UngroundedCitation) throw;
        out["refusal"] = {{"code", minescape::to_string(e.code())}, {"message", e.what()}};
      }
    }
  }
  out["mode"] = mode;
  out["query"] = query;
  return out;
}

}  // namespace minescape::pipeline
