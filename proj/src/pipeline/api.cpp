#include "minescape/pipeline/api.hpp"

#include <regex>

#include <httplib.h>

#include "minescape/udm/scribbles.hpp"

namespace minescape::pipeline {

using nlohmann::json;

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotFound:
      return 404;
    case ErrorCode::IllegalTransition:
      return 409;
    case ErrorCode::BadRequest:
    case ErrorCode::DecodeError:
    case ErrorCode::OutOfExtent:
    case ErrorCode::GeoreferenceMissing:
    case ErrorCode::InsufficientSamples:
    case ErrorCode::MetadataMissing:
    case ErrorCode::UnsupportedLatitude:
    case ErrorCode::EmptyDossier:
    case ErrorCode::SegmentTooLong:
    case ErrorCode::PayloadInvalid:
      return 400;
    case ErrorCode::CatalogUnavailable:
    case ErrorCode::ProviderUnavailable:
    case ErrorCode::SyncFailed:
      return 503;
    default:
      return 500;
  }
}

std::string error_body(const Error& e) {
  json err = {{"code", to_string(e.code())}, {"message", e.what()}};
  if (!e.subject().empty()) err["subject"] = e.subject();
  if (e.count()) err["count"] = *e.count();
  return json{{"error", err}}.dump();
}

namespace {

ApiResponse ok(const json& j) { return {200, "application/json", j.dump()}; }

json parse_body(const std::string& body) {
  try {
    return json::parse(body.empty() ? "{}" : body);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadRequest, std::string("request body is not JSON: ") + e.what());
  }
}

std::string required_string(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key) || !j[key].is_string()) {
    throw Error(ErrorCode::BadRequest, std::string("field '") + key + "' must be a string", key);
  }
  return j[key].get<std::string>();
}

}  // namespace

ApiResponse Api::handle(const ApiRequest& req) {
  static const std::regex site_re(R"(^/sites/([^/]+)$)");
  static const std::regex site_sub_re(R"(^/sites/([^/]+)/(dossier|run|scribbles|captions|udm/train|udm/classify|udm/reuse)$)");
  static const std::regex render_re(R"(^/sites/([^/]+)/render/([^/]+)$)");
  static const std::regex caption_re(R"(^/captions/([^/]+)$)");
  static const std::regex review_re(R"(^/captions/([^/]+)/review$)");
  static const std::regex run_re(R"(^/runs/([^/]+)$)");
  const std::string& m = req.method;
  const std::string& p = req.path;
  std::smatch g;
  bool path_known = false;
  try {
    if (p == "/health") {
      path_known = true;
      if (m == "GET") return ok({{"status", "ok"}, {"root", ws_.root().string()}});
    } else if (p == "/sites") {
      path_known = true;
      if (m == "GET") {
        json arr = json::array();
        for (const auto& s : ws_.registry().list()) arr.push_back(json::parse(sites::site_to_json(s)));
        return ok(arr);
      }
      if (m == "POST") {
        sites::SiteRecord s;
        try {
          s = sites::site_from_json(req.body);
        } catch (const json::exception& e) {
          throw Error(ErrorCode::BadRequest, std::string("malformed site record: ") + e.what());
        }
        s.status = sites::SiteStatus::New;
        ws_.registry().add(s);
        return ok(json::parse(sites::site_to_json(ws_.registry().get(s.site_id))));
      }
    } else if (std::regex_match(p, g, site_re)) {
      path_known = true;
      if (m == "GET") return ok(json::parse(sites::site_to_json(ws_.registry().get(g[1].str()))));
    } else if (std::regex_match(p, g, render_re)) {
      path_known = true;
      if (m == "GET") {
        const auto png = ws_.render(g[1].str(), g[2].str());
        return {200, "image/png", std::string(png.begin(), png.end())};
      }
    } else if (std::regex_match(p, g, site_sub_re)) {
      path_known = true;
      const std::string id = g[1].str(), sub = g[2].str();
      if (sub == "dossier" && m == "POST") {
        ws_.registry().get(id);
        sites::Dossier d;
        try {
          d = sites::dossier_from_json(req.body, id);
        } catch (const json::exception& e) {
          throw Error(ErrorCode::BadRequest, std::string("malformed dossier: ") + e.what());
        }
        return ok(json::parse(sites::dossier_to_json(ws_.registry().put_dossier(d))));
      }
      if (sub == "dossier" && m == "GET") {
        const auto d = ws_.registry().dossier(id);
        if (!d) throw Error(ErrorCode::NotFound, "site has no dossier", id);
        return ok(json::parse(sites::dossier_to_json(*d)));
      }
      if (sub == "run" && m == "POST") {
        ws_.registry().get(id);
        const json body = parse_body(req.body);
        const Stage until = body.contains("until") ? stage_from_string(required_string(body, "until")) : Stage::Judge;
        try {
          return ok(run_to_json(ws_.run_site(id, until)));
        } catch (const Error& e) {
          json j = json::parse(error_body(e));
          if (auto r = ws_.load_run(ws_.run_id_for(id))) j["run"] = run_to_json(*r);
          return {http_status(e.code()) == 500 ? 422 : http_status(e.code()), "application/json", j.dump()};
        }
      }
      if (sub == "scribbles" && m == "POST") return ok(ws_.save_scribbles(id, req.body));
      if (sub == "scribbles" && m == "GET") {
        ws_.registry().get(id);
        const fs::path f = ws_.site_dir(id) / "scribbles.geojson";
        if (!fs::exists(f)) throw Error(ErrorCode::NotFound, "no scribbles saved for this site", id);
        return ok(json::parse(read_text_file(f)));
      }
      if (sub == "udm/train" && m == "POST") return ok(ws_.train_udm(id));
      if (sub == "udm/classify" && m == "POST") return ok(ws_.classify_udm(id));
      if (sub == "udm/reuse" && m == "POST") return ok(ws_.reuse_udm(id, required_string(parse_body(req.body), "from")));
      if (sub == "captions" && m == "GET") return ok(ws_.captions(id));
    } else if (std::regex_match(p, g, review_re)) {
      path_known = true;
      if (m == "POST") {
        const json body = parse_body(req.body);
        const std::string decision = required_string(body, "decision");
        const std::string note = body.contains("note") ? required_string(body, "note") : std::string();
        const std::string reviewer = body.contains("reviewer") ? required_string(body, "reviewer") : std::string();
        return ok(review_to_json(ws_.review(g[1].str(), decision, note, reviewer)));
      }
    } else if (std::regex_match(p, g, caption_re)) {
      path_known = true;
      if (m == "GET") return ok(ws_.caption_view(g[1].str()));
    } else if (std::regex_match(p, g, run_re)) {
      path_known = true;
      if (m == "GET") {
        const auto r = ws_.load_run(g[1].str());
        if (!r) throw Error(ErrorCode::NotFound, "unknown run", g[1].str());
        return ok(run_to_json(*r));
      }
    } else if (p == "/review/queue") {
      path_known = true;
      if (m == "GET") return ok(ws_.review_queue());
    } else if (p == "/rag/sync") {
      path_known = true;
      if (m == "POST") return ok(sync_to_json(ws_.rag_sync()));
    } else if (p == "/rag/query") {
      path_known = true;
      if (m == "POST") {
        const json body = parse_body(req.body);
        const std::string mode = body.contains("mode") ? required_string(body, "mode") : std::string("agentic");
        return ok(ws_.rag_query(required_string(body, "query"), mode));
      }
    }
  } catch (const Error& e) {
    return {http_status(e.code()), "application/json", error_body(e)};
  } catch (const std::exception& e) {
    return {500, "application/json", json{{"error", {{"code", "Internal"}, {"message", e.what()}}}}.dump()};
  }
  if (path_known) {
    return {405, "application/json",
            json{{"error", {{"code", "MethodNotAllowed"}, {"message", m + " is not supported on " + p}}}}.dump()};
  }
  return {404, "application/json", json{{"error", {{"code", "NotFound"}, {"message", "no route for " + p}}}}.dump()};
}

struct Server::Impl {
  httplib::Server http;
};

Server::Server(Workspace& ws, std::string host, int port)
    : impl_(std::make_unique<Impl>()), api_(ws), host_(std::move(host)), port_(port) {
  auto handler = [this](const httplib::Request& rq, httplib::Response& rs) {
    const auto r = api_.handle({rq.method, rq.path, rq.body});
    rs.status = r.status;
    rs.set_content(r.body, r.content_type);
  };
  impl_->http.Get(".*", handler);
  impl_->http.Post(".*", handler);
  impl_->http.Put(".*", handler);
  impl_->http.Delete(".*", handler);
}

Server::~Server() { stop(); }

void Server::start() {
  if (port_ == 0) {
    port_ = impl_->http.bind_to_any_port(host_);
  } else if (!impl_->http.bind_to_port(host_, port_)) {
    throw Error(ErrorCode::ConfigError, "cannot bind " + host_ + ":" + std::to_string(port_));
  }
  if (port_ <= 0) throw Error(ErrorCode::ConfigError, "cannot bind " + host_);
  thread_ = std::thread([this] { impl_->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
}

void Server::run() {
  if (!impl_->http.listen(host_, port_)) throw Error(ErrorCode::ConfigError, "cannot listen on " + host_ + ":" + std::to_string(port_));
}

void Server::stop() {
  impl_->http.stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace minescape::pipeline
