#include "minescape/rag/store.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <mutex>

#include "minescape/date.hpp"
#include "minescape/error.hpp"

namespace minescape::rag {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'M', 'S', 'V', 'S'};
constexpr std::uint32_t kRecordVersion = 1;
constexpr std::string_view kManifestFormat = "minescape-vector-store";

template <typename T>
void put_le(std::string& out, T v) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U u = std::bit_cast<U>(v);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  if (pos + sizeof(T) > in.size()) throw Error(ErrorCode::DecodeError, "vector store record file is truncated");
  U u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(in[pos + i]) << (8 * i);
  pos += sizeof(T);
  return std::bit_cast<T>(u);
}

}  // namespace

double cosine(std::span<const double> q, std::span<const float> v) {
  double dot = 0.0, qq = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double x = v[i];
    dot += q[i] * x;
    qq += q[i] * q[i];
    vv += x * x;
  }
  if (qq <= 0.0 || vv <= 0.0) return 0.0;
  return dot / (std::sqrt(qq) * std::sqrt(vv));
}

VectorStore::VectorStore(std::string name, std::string embedder, std::size_t dimension)
    : name_(std::move(name)),
      embedder_(std::move(embedder)),
      dim_(dimension),
      mutex_(std::make_unique<std::shared_mutex>()) {
  if (dim_ == 0) throw Error(ErrorCode::ConfigError, "vector store dimension must be positive");
}

std::size_t VectorStore::size() const {
  std::shared_lock lock(*mutex_);
  return entries_.size();
}

bool VectorStore::contains(const std::string& id) const { return get(id).has_value(); }

std::optional<EmbeddedChunk> VectorStore::get(const std::string& id) const {
  std::shared_lock lock(*mutex_);
  for (const auto& e : entries_) {
    if (e.chunk.chunk_id == id) return e;
  }
  return std::nullopt;
}

std::vector<EmbeddedChunk> VectorStore::entries() const {
  std::shared_lock lock(*mutex_);
  return entries_;
}

bool VectorStore::upsert(EmbeddedChunk entry) {
  if (entry.vector.size() != dim_) {
    throw Error(ErrorCode::EmbedderMismatch, "vector has dimension " + std::to_string(entry.vector.size()) +
                                                 ", store expects " + std::to_string(dim_));
  }
  std::unique_lock lock(*mutex_);
  for (auto& e : entries_) {
    if (e.chunk.chunk_id == entry.chunk.chunk_id) {
      e = std::move(entry);
      return false;
    }
  }
  entries_.push_back(std::move(entry));
  return true;
}

bool VectorStore::remove(const std::string& id) {
  std::unique_lock lock(*mutex_);
  auto it = std::find_if(entries_.begin(), entries_.end(), [&](const EmbeddedChunk& e) { return e.chunk.chunk_id == id; });
  if (it == entries_.end()) return false;
  entries_.erase(it);
  return true;
}

std::vector<Hit> VectorStore::search_vector(std::span<const double> query, std::size_t k,
                                            const std::function<bool(const Chunk&)>& filter) const {
  if (query.size() != dim_) throw Error(ErrorCode::EmbedderMismatch, "query vector has the wrong dimension");
  std::shared_lock lock(*mutex_);
  std::vector<std::pair<double, const EmbeddedChunk*>> scored;
  scored.reserve(entries_.size());
  for (const auto& e : entries_) {
    if (filter && !filter(e.chunk)) continue;
    scored.emplace_back(cosine(query, e.vector), &e);
  }
  auto better = [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second->chunk.chunk_id < b.second->chunk.chunk_id;
  };
  const std::size_t n = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(), better);
  std::vector<Hit> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back({scored[i].second->chunk, scored[i].first});
  return out;
}

bool VectorStore::exists(const fs::path& dir) { return fs::exists(dir / "manifest.json"); }

void VectorStore::save(const fs::path& dir) const {
  fs::create_directories(dir);
  std::uint64_t generation = 0;
  if (exists(dir)) {
    try {
      generation = json::parse(read_text_file(dir / "manifest.json")).value("generation", 0ULL);
    } catch (const json::exception&) {
    }
  }
  ++generation;

  std::string bytes(kMagic, 4);
  std::shared_lock lock(*mutex_);
  put_le<std::uint32_t>(bytes, kRecordVersion);
  put_le<std::uint32_t>(bytes, static_cast<std::uint32_t>(dim_));
  put_le<std::uint64_t>(bytes, entries_.size());
  for (const auto& e : entries_) {
    const std::string j = chunk_to_json(e.chunk).dump();
    put_le<std::uint32_t>(bytes, static_cast<std::uint32_t>(j.size()));
    bytes += j;
    for (float f : e.vector) put_le<float>(bytes, f);
  }
  const std::string records = "records-" + std::to_string(generation) + ".bin";
  const json manifest = {{"format", kManifestFormat},
                         {"version", kRecordVersion},
                         {"name", name_},
                         {"embedder", embedder_},
                         {"dimension", dim_},
                         {"count", entries_.size()},
                         {"records", records},
                         {"generation", generation},
                         {"updated_at", utc_timestamp()}};
  lock.unlock();
  write_file_atomic(dir / records, bytes);
  write_file_atomic(dir / "manifest.json", manifest.dump(2));
  for (const auto& f : fs::directory_iterator(dir)) {
    const std::string fname = f.path().filename().string();
    if (fname.rfind("records-", 0) == 0 && fname != records) {
      std::error_code ec;
      fs::remove(f.path(), ec);
    }
  }
}

VectorStore VectorStore::load(const fs::path& dir) {
  json manifest;
  try {
    manifest = json::parse(read_text_file(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::DecodeError, std::string("unreadable store manifest: ") + e.what(), dir.string());
  }
  if (manifest.value("format", "") != kManifestFormat) throw Error(ErrorCode::DecodeError, "not a vector store", dir.string());
  VectorStore store(manifest.at("name").get<std::string>(), manifest.at("embedder").get<std::string>(),
                    manifest.at("dimension").get<std::size_t>());
  const auto bytes = read_binary_file(dir / manifest.at("records").get<std::string>());
  if (bytes.size() < 20 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::DecodeError, "bad vector store record file", dir.string());
  }
  std::size_t pos = 4;
  if (get_le<std::uint32_t>(bytes, pos) != kRecordVersion) throw Error(ErrorCode::DecodeError, "unsupported record version");
  if (get_le<std::uint32_t>(bytes, pos) != store.dim_) throw Error(ErrorCode::DecodeError, "record dimension differs from manifest");
  const auto count = get_le<std::uint64_t>(bytes, pos);
  if (count != manifest.at("count").get<std::uint64_t>()) throw Error(ErrorCode::DecodeError, "record count differs from manifest");
  store.entries_.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = get_le<std::uint32_t>(bytes, pos);
    if (pos + len > bytes.size()) throw Error(ErrorCode::DecodeError, "vector store record file is truncated");
    EmbeddedChunk e;
    try {
      e.chunk = chunk_from_json(json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                            bytes.begin() + static_cast<std::ptrdiff_t>(pos + len)));
    } catch (const json::exception& ex) {
      throw Error(ErrorCode::DecodeError, std::string("bad chunk record: ") + ex.what());
    }
    pos += len;
    e.vector.resize(store.dim_);
    for (auto& f : e.vector) f = get_le<float>(bytes, pos);
    store.entries_.push_back(std::move(e));
  }
  if (pos != bytes.size()) throw Error(ErrorCode::DecodeError, "trailing bytes in record file");
  return store;
}

EmbeddedChunk embed_chunk(Embedder& embedder, const Chunk& chunk) {
  const auto v = embedder.embed(chunk.text);
  if (v.size() != embedder.dimension()) throw Error(ErrorCode::EmbedderMismatch, "embedder returned the wrong dimension");
  EmbeddedChunk e{chunk, std::vector<float>(v.size())};
  for (std::size_t i = 0; i < v.size(); ++i) e.vector[i] = static_cast<float>(v[i]);
  return e;
}

std::vector<Hit> search(const VectorStore& store, Embedder& embedder, std::string_view query, std::size_t k,
                        const std::function<bool(const Chunk&)>& filter) {
  if (embedder.name() != store.embedder() || embedder.dimension() != store.dimension()) {
    throw Error(ErrorCode::EmbedderMismatch,
                "store '" + store.name() + "' was built with " + store.embedder() + ", query uses " + embedder.name());
  }
  if (store.size() == 0 || k == 0) return {};
  const auto q = embedder.embed(query);
  return store.search_vector(q, k, filter);
}

}  // namespace minescape::rag
