#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "minescape/io.hpp"
#include "minescape/rag/text.hpp"

namespace minescape::rag {

/// Text to unit-length vector.
class Embedder {
 public:
  virtual ~Embedder() = default;
  /// Identity recorded in store manifests; stores only answer queries from
  /// the embedder that built them.
  virtual std::string name() const = 0;
  virtual std::size_t dimension() const = 0;
  virtual std::vector<double> embed(std::string_view text) = 0;
};

/// Deterministic hashed bag of content words. Each lowercase non-stop-word
/// token adds +-1 to one of `dimension` buckets chosen by FNV-1a; the sum is
/// normalized. Text without content words maps to the first basis vector.
class HashEmbedder final : public Embedder {
 public:
  explicit HashEmbedder(std::size_t dimension = 256) : dim_(dimension) {}
  std::string name() const override { return "hash-bow-v1/" + std::to_string(dim_); }
  std::size_t dimension() const override { return dim_; }
  std::vector<double> embed(std::string_view text) override;

 private:
  std::size_t dim_;
};

struct HttpEmbedderConfig {
  std::string url;  // full embeddings endpoint
  std::string key;
  std::string model;
  std::size_t dimension = 0;
  std::chrono::seconds timeout{60};
};

/// Reads EMBEDDER_URL, EMBEDDER_KEY, EMBEDDER_MODEL and EMBEDDER_DIM.
std::optional<HttpEmbedderConfig> http_embedder_config_from_env();

/// OpenAI-style embeddings client. Failures raise SyncFailed.
class HttpEmbedder final : public Embedder {
 public:
  explicit HttpEmbedder(HttpEmbedderConfig config) : config_(std::move(config)) {}
  std::string name() const override { return "http:" + config_.model; }
  std::size_t dimension() const override { return config_.dimension; }
  std::vector<double> embed(std::string_view text) override;

 private:
  HttpEmbedderConfig config_;
};

/// Scales to unit length; a zero vector becomes the first basis vector.
void normalize(std::vector<double>& v);

struct EmbeddedChunk {
  Chunk chunk;
  std::vector<float> vector;
};

struct Hit {
  Chunk chunk;
  double score = 0.0;
};

/// Cosine similarity evaluated in double precision.
double cosine(std::span<const double> q, std::span<const float> v);

/// Exact-search vector store. One writer or many readers at a time.
///
/// On disk a store is a directory holding manifest.json and one record
/// file named by the manifest. The manifest is replaced atomically and is
/// the commit point. Record file layout, little-endian:
///   magic "MSVS" | u32 version (1) | u32 dimension | u64 count
///   count x ( u32 json_length | chunk JSON (UTF-8) | dimension x f32 )
class VectorStore {
 public:
  VectorStore(std::string name, std::string embedder, std::size_t dimension);

  const std::string& name() const noexcept { return name_; }
  const std::string& embedder() const noexcept { return embedder_; }
  std::size_t dimension() const noexcept { return dim_; }
  std::size_t size() const;
  bool contains(const std::string& chunk_id) const;
  std::optional<EmbeddedChunk> get(const std::string& chunk_id) const;
  std::vector<EmbeddedChunk> entries() const;

  /// Inserts or replaces by chunk_id. Returns true when the entry is new.
  /// Throws EmbedderMismatch for a wrong-length vector.
  bool upsert(EmbeddedChunk entry);
  bool remove(const std::string& chunk_id);

  /// Top k by cosine, ties by chunk_id; optional filter on chunks.
  std::vector<Hit> search_vector(std::span<const double> query, std::size_t k,
                                 const std::function<bool(const Chunk&)>& filter = {}) const;

  void save(const fs::path& dir) const;
  static VectorStore load(const fs::path& dir);
  static bool exists(const fs::path& dir);

 private:
  std::string name_;
  std::string embedder_;
  std::size_t dim_;
  std::vector<EmbeddedChunk> entries_;
  mutable std::unique_ptr<std::shared_mutex> mutex_;
};

/// Embeds and stores a chunk.
EmbeddedChunk embed_chunk(Embedder& embedder, const Chunk& chunk);

/// Embeds `query` and searches. Throws EmbedderMismatch when the embedder
/// differs from the one recorded in the store.
std::vector<Hit> search(const VectorStore& store, Embedder& embedder, std::string_view query, std::size_t k,
                        const std::function<bool(const Chunk&)>& filter = {});

}  // namespace minescape::rag
