#include <httplib.h>

#include <cmath>
#include <cstdlib>
#include <json.hpp>
#include <regex>

#include "minescape/error.hpp"
#include "minescape/rag/store.hpp"
#include "minescape/util.hpp"

namespace minescape::rag {

using nlohmann::json;

void normalize(std::vector<double>& v) {
  double n2 = 0.0;
  for (double x : v) n2 += x * x;
  if (!(n2 > 0.0) || !std::isfinite(n2)) {
    std::fill(v.begin(), v.end(), 0.0);
    if (!v.empty()) v[0] = 1.0;
    return;
  }
  const double n = std::sqrt(n2);
  for (double& x : v) x /= n;
}

std::vector<double> HashEmbedder::embed(std::string_view text) {
  std::vector<double> v(dim_, 0.0);
  for (const auto& w : content_words(text)) {
    const std::uint64_t h = fnv1a64(w);
    v[h % dim_] += (h >> 63) ? -1.0 : 1.0;
  }
  normalize(v);
  return v;
}

std::optional<HttpEmbedderConfig> http_embedder_config_from_env() {
  auto get = [](const char* name) -> std::string {
    const char* v = std::getenv(name);
    return v ? std::string(v) : std::string();
  };
  HttpEmbedderConfig c;
  c.url = get("EMBEDDER_URL");
  if (c.url.empty()) return std::nullopt;
  c.key = get("EMBEDDER_KEY");
  c.model = get("EMBEDDER_MODEL");
  const std::string dim = get("EMBEDDER_DIM");
  c.dimension = dim.empty() ? 0 : std::stoul(dim);
  return c;
}

std::vector<double> HttpEmbedder::embed(std::string_view text) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(config_.url, m, re)) throw Error(ErrorCode::ConfigError, "malformed embedder URL");
  httplib::Client client(m[1].str());
  const auto secs = static_cast<time_t>(config_.timeout.count());
  client.set_connection_timeout(secs, 0);
  client.set_read_timeout(secs, 0);
  httplib::Headers headers;
  if (!config_.key.empty()) headers.emplace("Authorization", "Bearer " + config_.key);
  const std::string body = json{{"model", config_.model}, {"input", std::string(text)}}.dump();
  auto res = client.Post(m[2].matched ? m[2].str() : "/", headers, body, "application/json");
  if (!res) throw Error(ErrorCode::SyncFailed, "embedder transport error: " + httplib::to_string(res.error()), name());
  if (res->status != 200) throw Error(ErrorCode::SyncFailed, "embedder returned HTTP " + std::to_string(res->status), name());
  std::vector<double> v;
  try {
    v = json::parse(res->body).at("data").at(0).at("embedding").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SyncFailed, std::string("unexpected embedder response: ") + e.what(), name());
  }
  if (config_.dimension == 0) config_.dimension = v.size();
  if (v.size() != config_.dimension) throw Error(ErrorCode::EmbedderMismatch, "embedder returned a vector of the wrong size", name());
  normalize(v);
  return v;
}

}  // namespace minescape::rag
