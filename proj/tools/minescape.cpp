// minescape: command-line front end for a pipeline workspace.
// Exit codes: 0 success, 2 usage or config error, 3 stage or operation failure.

#include <CLI11.hpp>
#include <iostream>

#include "minescape/io.hpp"
#include "minescape/pipeline/api.hpp"
#include "minescape/pipeline/demo.hpp"
#include "minescape/pipeline/workspace.hpp"

namespace {

using namespace minescape;
using nlohmann::json;

constexpr int kExitConfig = 2;
constexpr int kExitFailure = 3;

void print(const json& j) { std::cout << j.dump(2) << "\n"; }

pipeline::Workspace open_ws(const std::string& root) { return pipeline::Workspace::open(root); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mining-site imagery pipeline: scenes, indices, UDM, captions, judge, review and RAG"};
  app.require_subcommand(1);
  std::string root = ".";
  app.add_option("-w,--workspace", root, "Workspace directory")->envname("MINESCAPE_WORKSPACE");

  std::function<void()> action;

  // init / demo
  auto* init = app.add_subcommand("init", "Create an empty workspace with a default config.ini");
  init->callback([&] { action = [&] { pipeline::init_workspace(root); }; });
  auto* demo = app.add_subcommand("demo", "Offline demo data");
  demo->require_subcommand(1);
  std::string demo_dir;
  auto* demo_init = demo->add_subcommand("init", "Write a fixture workspace (sites, catalog, scribbles, book)");
  demo_init->add_option("dir", demo_dir, "Target directory")->required();
  demo_init->callback([&] { action = [&] { pipeline::demo::write_demo_workspace(demo_dir); }; });

  // sites
  auto* sites_cmd = app.add_subcommand("sites", "Site registry");
  sites_cmd->require_subcommand(1);
  sites_cmd->add_subcommand("list", "List registered sites")->callback([&] {
    action = [&] {
      auto ws = open_ws(root);
      json out = json::array();
      for (const auto& s : ws.registry().list()) out.push_back(json::parse(sites::site_to_json(s)));
      print(out);
    };
  });
  sites::SiteRecord new_site;
  std::string dossier_file;
  auto* add = sites_cmd->add_subcommand("add", "Register a site");
  add->add_option("id", new_site.site_id, "Site id (filename-safe)")->required();
  add->add_option("--name", new_site.name)->required();
  add->add_option("--country", new_site.country)->required();
  add->add_option("--lat", new_site.lat)->required();
  add->add_option("--lon", new_site.lon)->required();
  add->add_option("--commodity", new_site.commodity);
  add->add_option("--dossier", dossier_file, "Dossier JSON file");
  add->callback([&] {
    action = [&] {
      auto ws = open_ws(root);
      ws.registry().add(new_site);
      if (!dossier_file.empty()) {
        ws.registry().put_dossier(sites::dossier_from_json(read_text_file(dossier_file), new_site.site_id));
      }
      print(json::parse(sites::site_to_json(ws.registry().get(new_site.site_id))));
    };
  });

  // stage verbs: each runs the pipeline up to its stage, reusing cached stages
  std::string site_id;
  auto stage_verb = [&](CLI::App* parent, const char* name, const char* help, pipeline::Stage stage) {
    auto* c = parent->add_subcommand(name, help);
    c->add_option("site", site_id, "Site id")->required();
    c->callback([&, stage] {
      action = [&, stage] {
        auto ws = open_ws(root);
        print(pipeline::run_to_json(ws.run_site(site_id, stage)));
      };
    });
  };
  auto* scenes = app.add_subcommand("scenes", "Scene catalog");
  scenes->require_subcommand(1);
  stage_verb(scenes, "fetch", "Query the catalog and download candidate scenes", pipeline::Stage::Catalog);
  auto* quality = app.add_subcommand("quality", "Scene quality");
  quality->require_subcommand(1);
  stage_verb(quality, "rank", "Score and rank candidates, choose a scene", pipeline::Stage::Quality);
  auto* indices = app.add_subcommand("indices", "Spectral indices");
  indices->require_subcommand(1);
  stage_verb(indices, "make", "Compute NDVI, NDBI and FMI rasters and renders", pipeline::Stage::Indices);
  auto* caption = app.add_subcommand("caption", "Captioning");
  caption->require_subcommand(1);
  stage_verb(caption, "generate", "Generate a caption candidate", pipeline::Stage::Caption);
  auto* judge = app.add_subcommand("judge", "Caption judging");
  judge->require_subcommand(1);
  stage_verb(judge, "run", "Score the caption candidate", pipeline::Stage::Judge);

  std::string until = "judge";
  auto* run = app.add_subcommand("run", "Run the site pipeline");
  run->add_option("site", site_id, "Site id")->required();
  run->add_option("--until", until, "Last stage: catalog|quality|indices|udm|caption|judge");
  run->callback([&] {
    action = [&] {
      auto ws = open_ws(root);
      print(pipeline::run_to_json(ws.run_site(site_id, pipeline::stage_from_string(until))));
    };
  });

  // udm
  auto* udm = app.add_subcommand("udm", "Urban/mining classifier");
  udm->require_subcommand(1);
  std::string scribble_file;
  auto* scr = udm->add_subcommand("scribbles", "Store scribbles (GeoJSON) for a site");
  scr->add_option("site", site_id)->required();
  scr->add_option("file", scribble_file)->required()->check(CLI::ExistingFile);
  scr->callback([&] {
    action = [&] {
      auto ws = open_ws(root);
      print(ws.save_scribbles(site_id, read_text_file(scribble_file)));
    };
  });
  auto* train = udm->add_subcommand("train", "Train the classifier from stored scribbles");
  train->add_option("site", site_id)->required();
  train->callback([&] { action = [&] { auto ws = open_ws(root); print(ws.train_udm(site_id)); }; });
  std::string from_site;
  auto* reuse = udm->add_subcommand("reuse", "Use another site's trained model for this site");
  reuse->add_option("site", site_id)->required();
  reuse->add_option("--from", from_site, "Site whose model is copied")->required();
  reuse->callback([&] { action = [&] { auto ws = open_ws(root); print(ws.reuse_udm(site_id, from_site)); }; });
  auto* apply = udm->add_subcommand("apply", "Classify the chosen scene");
  apply->add_option("site", site_id)->required();
  apply->callback([&] { action = [&] { auto ws = open_ws(root); print(ws.classify_udm(site_id)); }; });

  // review
  auto* review = app.add_subcommand("review", "Human caption review");
  review->require_subcommand(1);
  review->add_subcommand("list", "Captions awaiting a decision")->callback([&] {
    action = [&] {
      auto ws = open_ws(root);
      json out = json::array();
      for (const auto& id : ws.review_queue()) out.push_back(ws.caption_view(id));
      print(out);
    };
  });
  std::string caption_id, decision, note, reviewer = "operator";
  auto* decide = review->add_subcommand("decide", "Accept or reject a caption");
  decide->add_option("caption", caption_id)->required();
  decide->add_option("decision", decision)->required()->check(CLI::IsMember({"accept", "reject"}));
  decide->add_option("--note", note);
  decide->add_option("--reviewer", reviewer);
  decide->callback([&] {
    action = [&] {
      auto ws = open_ws(root);
      print(pipeline::review_to_json(ws.review(caption_id, decision, note, reviewer)));
    };
  });

  // rag
  auto* rag = app.add_subcommand("rag", "Retrieval and grounded answers");
  rag->require_subcommand(1);
  rag->add_subcommand("sync", "Index accepted captions and documents")->callback([&] {
    action = [&] { auto ws = open_ws(root); print(pipeline::sync_to_json(ws.rag_sync())); };
  });
  std::string query, mode = "agentic";
  bool log_only = false;
  auto* q = rag->add_subcommand("query", "Ask a question");
  q->add_option("query", query)->required();
  q->add_option("--mode", mode)->check(CLI::IsMember({"flat", "agentic"}));
  q->add_flag("--log", log_only, "Print only the answer text and source log");
  q->callback([&] {
    action = [&] {
      auto ws = open_ws(root);
      const json r = ws.rag_query(query, mode);
      if (!log_only) return print(r);
      if (r.contains("answer") && !r["answer"].is_null()) {
        std::cout << r["answer"]["text"].get<std::string>() << "\n\n" << r["answer"]["source_log"].get<std::string>() << "\n";
      } else {
        std::cout << "refused: " << r.value("refusal", json::object()).dump() << "\n";
      }
    };
  });

  // serve
  std::string host;
  int port = -1;
  auto* serve = app.add_subcommand("serve", "HTTP service for the review UI");
  serve->add_option("--host", host);
  serve->add_option("--port", port);
  serve->callback([&] {
    action = [&] {
      auto ws = open_ws(root);
      pipeline::Server server(ws, host.empty() ? ws.config().host : host, port < 0 ? ws.config().port : port);
      std::cerr << "listening on " << (host.empty() ? ws.config().host : host) << ":"
                << (port < 0 ? ws.config().port : port) << "\n";
      server.run();
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }
  try {
    if (action) action();
    return 0;
  } catch (const Error& e) {
    json err = {{"code", std::string(to_string(e.code()))}, {"message", e.what()}};
    if (!e.subject().empty()) err["subject"] = e.subject();
    std::cerr << json{{"error", err}}.dump() << "\n";
    return e.code() == ErrorCode::ConfigError ? kExitConfig : kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", {{"code", "Internal"}, {"message", e.what()}}}}.dump() << "\n";
    return kExitFailure;
  }
}
