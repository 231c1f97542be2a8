#include <httplib.h>

#include <json.hpp>
#include <regex>

#include "minescape/llm/provider.hpp"
#include "minescape/util.hpp"

namespace minescape::llm {

using nlohmann::json;

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw Error(ErrorCode::ConfigError, "malformed provider URL");
  return {m[1].str(), m[2].matched ? m[2].str() : "/"};
}

}  // namespace

HttpChatProvider::HttpChatProvider(HttpProviderConfig config) : config_(std::move(config)) {
  split_url(config_.url);
}

std::string HttpChatProvider::build_body(const ChatRequest& request) const {
  json messages = json::array();
  for (std::size_t i = 0; i < request.messages.size(); ++i) {
    const auto& m = request.messages[i];
    const bool last_user = m.role == "user" && i + 1 == request.messages.size();
    if (last_user && !request.images.empty()) {
      json parts = json::array({{{"type", "text"}, {"text", m.content}}});
      for (const auto& img : request.images) {
        parts.push_back({{"type", "image_url"},
                         {"image_url", {{"url", "data:image/png;base64," + base64_encode(img.png)}}}});
      }
      messages.push_back({{"role", m.role}, {"content", parts}});
    } else {
      messages.push_back({{"role", m.role}, {"content", m.content}});
    }
  }
  return json{{"model", config_.model},
              {"messages", messages},
              {"temperature", request.temperature},
              {"frequency_penalty", request.frequency_penalty},
              {"max_tokens", request.max_tokens}}
      .dump();
}

std::string HttpChatProvider::complete(const ChatRequest& request) {
  const Endpoint ep = split_url(config_.url);
  httplib::Client client(ep.origin);
  const auto secs = static_cast<time_t>(config_.timeout.count());
  client.set_connection_timeout(secs, 0);
  client.set_read_timeout(secs, 0);
  client.set_write_timeout(secs, 0);
  httplib::Headers headers;
  if (!config_.key.empty()) headers.emplace("Authorization", "Bearer " + config_.key);
  auto res = client.Post(ep.path, headers, build_body(request), "application/json");
  if (!res) {
    throw Error(ErrorCode::ProviderUnavailable, "transport error: " + httplib::to_string(res.error()), name(),
                std::nullopt, true);
  }
  if (res->status == 429 || res->status >= 500) {
    throw Error(ErrorCode::ProviderUnavailable, "provider returned HTTP " + std::to_string(res->status), name(),
                res->status, true);
  }
  if (res->status >= 400) {
    throw Error(ErrorCode::ProviderRejected, "provider returned HTTP " + std::to_string(res->status), name(),
                res->status, false);
  }
  try {
    const json j = json::parse(res->body);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    return content.is_string() ? content.get<std::string>() : std::string();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ProviderRejected, std::string("unexpected provider response: ") + e.what(), name());
  }
}

}  // namespace minescape::llm
