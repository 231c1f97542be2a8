#pragma once

#include <map>
#include <memory>
#include <string>
#include <thread>

#include "minescape/pipeline/workspace.hpp"

namespace minescape::pipeline {

struct ApiRequest {
  std::string method;
  std::string path;  // without query string
  std::string body;
};

struct ApiResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// 400 for malformed input, 404 for unknown ids, 409 for state-machine
/// conflicts, 503 for unavailable upstreams, 500 otherwise.
int http_status(ErrorCode code);

/// {"error": {"code", "message", "subject"?}}
std::string error_body(const Error& e);

/// Routes (JSON unless noted):
///   GET  /health
///   GET  /sites                          POST /sites
///   GET  /sites/{id}                     POST /sites/{id}/dossier
///   POST /sites/{id}/run {"until"?}      GET  /runs/{run_id}
///   GET  /sites/{id}/render/{layer}      PNG; layer in rgb|ndvi|ndbi|fmi|udm
///   GET  /sites/{id}/scribbles           POST /sites/{id}/scribbles (GeoJSON)
///   POST /sites/{id}/udm/train           POST /sites/{id}/udm/classify
///   POST /sites/{id}/udm/reuse {"from"}
///   GET  /sites/{id}/captions            GET  /captions/{id}
///   POST /captions/{id}/review {"decision", "note", "reviewer"?}
///   GET  /review/queue
///   POST /rag/sync                       POST /rag/query {"query", "mode"}
class Api {
 public:
  explicit Api(Workspace& ws) : ws_(ws) {}
  ApiResponse handle(const ApiRequest& request);

 private:
  Workspace& ws_;
};

/// HTTP front end on a background thread.
class Server {
 public:
  Server(Workspace& ws, std::string host, int port);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds (port 0 picks a free port) and starts serving.
  void start();
  void stop();
  int port() const noexcept { return port_; }
  /// Serves on the calling thread until stop() is called elsewhere.
  void run();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  Api api_;
  std::string host_;
  int port_;
  std::thread thread_;
};

}  // namespace minescape::pipeline
