#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "minescape/error.hpp"
#include "minescape/io.hpp"

namespace minescape::llm {

struct ChatMessage {
  std::string role;  // "system", "user" or "assistant"
  std::string content;
};

struct ChatImage {
  std::string tag;                // rgb, ndvi, udm, ...
  std::vector<std::uint8_t> png;
};

struct ChatRequest {
  std::string purpose;  // "caption", "judge:<dimension>", "answer", ...
  std::vector<ChatMessage> messages;
  std::vector<ChatImage> images;  // attached to the last user message
  double temperature = 0.2;
  double frequency_penalty = 0.3;
  int max_tokens = 400;
};

/// Stable digest of everything a provider sees.
std::uint64_t request_digest(const ChatRequest& request);

/// A chat-completions style text generator. Implementations throw
/// Error(ProviderRejected) for permanent refusals and Error with
/// retryable() set for transient failures (5xx, 429, transport).
class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  virtual std::string name() const = 0;
  virtual std::string complete(const ChatRequest& request) = 0;
};

/// Append-only JSON-lines log of provider traffic. Every string written is
/// scrubbed of the registered secrets.
class RequestLog {
 public:
  explicit RequestLog(fs::path path, std::vector<std::string> secrets = {});
  void record(const std::string& provider, const ChatRequest& request, int attempt, const std::string& outcome,
              const std::string& text);
  const fs::path& path() const noexcept { return path_; }
  std::string redact(std::string text) const;

 private:
  fs::path path_;
  std::vector<std::string> secrets_;
  std::mutex mutex_;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

struct CallPolicy {
  int max_retries = 3;                         // retries after the first attempt
  std::chrono::milliseconds base_delay{500};   // doubles per retry
  Sleeper sleep;                               // defaults to sleep_for
  RequestLog* log = nullptr;
};

struct CallResult {
  std::string text;
  int retries = 0;
};

/// Calls `provider`, retrying transient failures with exponential backoff.
/// Exhausted retries raise ProviderUnavailable; permanent failures are
/// rethrown as ProviderRejected without retry.
CallResult call_with_retry(ChatProvider& provider, const ChatRequest& request, const CallPolicy& policy = {});

/// Deterministic caption double: the text is a pure function of the seed
/// and the request digest.
class MockProvider final : public ChatProvider {
 public:
  explicit MockProvider(std::uint64_t seed = 0) : seed_(seed) {}
  std::string name() const override { return "mock:" + std::to_string(seed_); }
  std::string complete(const ChatRequest& request) override;
  std::size_t calls() const noexcept { return calls_; }

 private:
  std::uint64_t seed_;
  std::atomic<std::size_t> calls_{0};
};

/// Deterministic judge double. Reads the dimension key from the request and
/// answers with a well-formed object whose score lies in [min_score, 5],
/// derived from the seed, dimension and caption. Fixed scores per dimension
/// override the derivation.
class MockJudgeProvider final : public ChatProvider {
 public:
  explicit MockJudgeProvider(std::uint64_t seed = 0, int min_score = 4) : seed_(seed), min_score_(min_score) {}
  void set_score(const std::string& dimension, int score) { fixed_[dimension] = score; }
  std::string name() const override { return "mock-judge:" + std::to_string(seed_); }
  std::string complete(const ChatRequest& request) override;
  std::size_t calls() const noexcept { return calls_; }

 private:
  std::uint64_t seed_;
  int min_score_;
  std::map<std::string, int> fixed_;
  std::atomic<std::size_t> calls_{0};
};

/// Replays a script. Each step is either response text or an Error to throw.
/// When the script runs out the fallback (if any) answers.
class ScriptedProvider final : public ChatProvider {
 public:
  using Step = std::variant<std::string, Error>;
  explicit ScriptedProvider(std::vector<Step> steps = {}, std::string name = "scripted");
  void push(Step step);
  void set_fallback(std::function<std::string(const ChatRequest&)> fallback) { fallback_ = std::move(fallback); }
  std::string name() const override { return name_; }
  std::string complete(const ChatRequest& request) override;
  std::size_t calls() const;
  std::vector<ChatRequest> requests() const;

 private:
  mutable std::mutex mutex_;
  std::deque<Step> steps_;
  std::function<std::string(const ChatRequest&)> fallback_;
  std::string name_;
  std::size_t calls_ = 0;
  std::vector<ChatRequest> seen_;
};

/// Offline answer double for retrieval: restates the first sentence of each
/// evidence block and ends with a "Sources:" line naming every label found
/// in "[source: <label>]" headers of the prompt.
class EchoAnswerProvider final : public ChatProvider {
 public:
  std::string name() const override { return "echo-answer"; }
  std::string complete(const ChatRequest& request) override;
  std::size_t calls() const noexcept { return calls_; }

 private:
  std::atomic<std::size_t> calls_{0};
};

struct HttpProviderConfig {
  std::string url;    // full chat-completions endpoint
  std::string key;
  std::string model;
  std::chrono::seconds timeout{60};
};

/// Reads PROVIDER_URL, PROVIDER_KEY and PROVIDER_MODEL (with an optional
/// prefix, e.g. "JUDGE_"). Returns nullopt when the URL is unset.
std::optional<HttpProviderConfig> http_config_from_env(const std::string& prefix = "");

/// OpenAI-style chat-completions client. Images are sent as base64 PNG data
/// URLs in the last user message.
class HttpChatProvider final : public ChatProvider {
 public:
  explicit HttpChatProvider(HttpProviderConfig config);
  std::string name() const override { return "http:" + config_.model; }
  std::string complete(const ChatRequest& request) override;
  /// The JSON body sent for `request` (exposed for inspection and tests).
  std::string build_body(const ChatRequest& request) const;

 private:
  HttpProviderConfig config_;
};

}  // namespace minescape::llm
