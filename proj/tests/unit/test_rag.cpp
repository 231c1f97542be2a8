#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "../support.hpp"
#include "minescape/rag/answer.hpp"
#include "minescape/rag/store.hpp"
#include "minescape/rag/text.hpp"

using namespace minescape;
using namespace minescape::rag;
using namespace testing_support;
using nlohmann::json;

namespace {

const std::vector<std::string> kWords = {"pit",   "spoil",  "lignite", "coal",     "village", "river", "dust",
                                         "water", "bench",  "haul",    "road",     "Aboriginal", "country",
                                         "mine",  "tailings", "open-cut", "lease", "forest", "farm", "creek"};

// Random document with sentence ends, newlines and blank lines.
std::string random_doc(std::mt19937_64& rng, std::size_t words) {
  std::string out;
  for (std::size_t i = 0; i < words; ++i) {
    out += kWords[rng() % kWords.size()];
    const auto r = rng() % 100;
    if (r < 8) out += ". ";
    else if (r < 10) out += ".\n";
    else if (r < 11) out += "\n\n";
    else if (r < 13) out += ", ";
    else out += " ";
  }
  return out;
}

// Boundary strength after token i, computed from the raw gap text.
int level_after(std::string_view text, const std::vector<Token>& t, std::size_t i) {
  if (i + 1 == t.size()) return 99;
  const auto gap = text.substr(t[i].end, t[i + 1].begin - t[i].end);
  const auto newlines = std::count(gap.begin(), gap.end(), '\n');
  if (newlines >= 2) return 3;
  if (newlines == 1) return 2;
  return (t[i].text == "." || t[i].text == "?" || t[i].text == "!") ? 1 : 0;
}

Chunk caption_chunk(std::string id, std::string text) {
  Chunk c;
  c.chunk_id = id;
  c.doc_id = id;
  c.text = std::move(text);
  c.metadata = {{"kind", "caption"}, {"site_id", id}, {"mine_name", id}, {"country", "Australia"},
                {"lat", -23.62}, {"lon", 148.18}};
  return c;
}

Chunk doc_chunk(std::string id, std::string text, int page) {
  Chunk c;
  c.chunk_id = id;
  c.doc_id = "book";
  c.text = std::move(text);
  c.metadata = {{"kind", "document"}, {"source_file", "book.pdf"}, {"page", page}};
  return c;
}

}  // namespace

TEST(Tokenize, DocumentedExamples) {
  EXPECT_EQ(token_strings("open-pit mine."), (std::vector<std::string>{"open-pit", "mine", "."}));
  EXPECT_TRUE(token_strings("").empty());
  EXPECT_EQ(token_strings("  a  b "), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(token_strings("(see p. 178)"), (std::vector<std::string>{"(", "see", "p", ".", "178", ")"}));
}

TEST(TokenizeProperty, ConcatenationDropsOnlyWhitespace) {
  std::mt19937_64 rng(1);
  const std::string alphabet = "ab -.,\n\t()'\"x";
  for (int t = 0; t < 1000; ++t) {
    std::string s;
    for (std::size_t i = rng() % 60; i > 0; --i) s += alphabet[rng() % alphabet.size()];
    std::string joined, squeezed;
    for (const auto& tok : tokenize(s)) {
      joined += tok.text;
      EXPECT_EQ(s.substr(tok.begin, tok.end - tok.begin), tok.text);
    }
    for (char c : s) {
      if (!std::isspace(static_cast<unsigned char>(c))) squeezed += c;
    }
    EXPECT_EQ(joined, squeezed) << s;
  }
}

TEST(Chunk, StrideArithmeticWithoutSeparators) {
  std::string doc;
  for (int i = 0; i < 360; ++i) doc += "w" + std::to_string(i) + " ";
  const auto cs = chunk_text(doc, "d");
  ASSERT_EQ(cs.size(), 3u);
  EXPECT_EQ(cs[0].token_begin, 0u);
  EXPECT_EQ(cs[0].token_end, 150u);
  EXPECT_EQ(cs[1].token_begin, 120u);
  EXPECT_EQ(cs[1].token_end, 270u);
  EXPECT_EQ(cs[2].token_begin, 240u);
  EXPECT_EQ(cs[2].token_end, 360u);
  EXPECT_EQ(cs[0].chunk_id, "d#0000");
  EXPECT_EQ(cs[2].chunk_id, "d#0002");
}

TEST(Chunk, ShortEmptyAndBadConfig) {
  std::string doc;
  for (int i = 0; i < 100; ++i) doc += "w ";
  const auto cs = chunk_text(doc, "d");
  ASSERT_EQ(cs.size(), 1u);
  EXPECT_EQ(cs[0].token_end, 100u);
  EXPECT_TRUE(chunk_text("", "d").empty());
  EXPECT_TRUE(chunk_text(" \n\n ", "d").empty());
  EXPECT_EQ(code_of([] { chunk_text("a b", "d", 10, 10); }), ErrorCode::ConfigError);
  EXPECT_EQ(code_of([] { chunk_text("a b", "d", 0, 0); }), ErrorCode::ConfigError);
}

TEST(Chunk, PrefersParagraphBreak) {
  std::string doc;
  for (int i = 0; i < 100; ++i) doc += "a ";
  doc += "end.\n\n";
  for (int i = 0; i < 100; ++i) doc += "b ";
  const auto cs = chunk_text(doc, "d");
  ASSERT_GE(cs.size(), 2u);
  EXPECT_EQ(cs[0].token_end, 102u);
  EXPECT_EQ(cs[0].text.substr(cs[0].text.size() - 4), "end.");
}

TEST(ChunkProperty, CoverageOverlapSizeAndBoundaries) {
  std::mt19937_64 rng(200);
  for (int t = 0; t < 200; ++t) {
    const std::string doc = random_doc(rng, rng() % 900);
    const std::size_t size = 20 + rng() % 180;
    const std::size_t overlap = rng() % (size / 2);
    const auto tokens = tokenize(doc);
    const auto cs = chunk_text(doc, "doc", size, overlap);
    if (tokens.empty()) {
      EXPECT_TRUE(cs.empty());
      continue;
    }
    ASSERT_FALSE(cs.empty());
    EXPECT_EQ(cs.front().token_begin, 0u);
    EXPECT_EQ(cs.back().token_end, tokens.size());
    for (std::size_t i = 0; i < cs.size(); ++i) {
      const auto& c = cs[i];
      ASSERT_LT(c.token_begin, c.token_end);
      EXPECT_LE(c.token_end - c.token_begin, size);
      // Re-tokenizing the chunk text gives back exactly its span.
      const auto again = token_strings(c.text);
      ASSERT_EQ(again.size(), c.token_end - c.token_begin);
      for (std::size_t k = 0; k < again.size(); ++k) EXPECT_EQ(again[k], tokens[c.token_begin + k].text);
      if (i + 1 < cs.size()) {
        EXPECT_EQ(cs[i + 1].token_begin, c.token_end - overlap) << "overlap";
        // No stronger boundary lies later in the latter part of the window,
        // and no equally strong one lies after the chosen end.
        const std::size_t lo = c.token_begin + std::max(overlap + 1, size / 2);
        const int chosen = level_after(doc, tokens, c.token_end - 1);
        for (std::size_t e = lo + 1; e <= c.token_begin + size; ++e) {
          const int lvl = level_after(doc, tokens, e - 1);
          EXPECT_LE(lvl, chosen);
          if (e > c.token_end) EXPECT_LT(lvl, chosen);
        }
      }
    }
  }
}

TEST(Metadata, GarzweilerPrefix) {
  Chunk c = caption_chunk("Garzweiler", "Terraced benches.");
  c.metadata["mine_name"] = "Garzweiler";
  c.metadata["country"] = "Germany";
  c.metadata["lat"] = 51.06;
  c.metadata["lon"] = 6.49;
  c.token_begin = 3;
  c.token_end = 5;
  const auto p = prepend_metadata(c);
  EXPECT_EQ(p.text, "[Garzweiler | Germany | 51.06,6.49] Terraced benches.");
  EXPECT_EQ(p.token_begin, 3u);
  EXPECT_EQ(p.token_end, 5u);
  EXPECT_EQ(prepend_metadata(p), p);
}

TEST(Metadata, DocumentFallbackAndMissingKeys) {
  const auto d = prepend_metadata(doc_chunk("x", "Text.", 3));
  EXPECT_EQ(d.text, "[book.pdf] Text.");
  auto c = caption_chunk("A", "t");
  c.metadata.erase("country");
  try {
    prepend_metadata(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MetadataMissing);
    EXPECT_EQ(e.subject(), "country");
  }
  Chunk bare;
  bare.chunk_id = "b";
  EXPECT_EQ(code_of([&] { prepend_metadata(bare); }), ErrorCode::MetadataMissing);
}

TEST(Embedder, DeterministicUnitVectors) {
  HashEmbedder e(256);
  std::mt19937_64 rng(5);
  for (int t = 0; t < 200; ++t) {
    const auto text = random_doc(rng, 1 + rng() % 40);
    const auto a = e.embed(text), b = e.embed(text);
    ASSERT_EQ(a.size(), 256u);
    EXPECT_EQ(a, b);
    double n = 0.0;
    for (double x : a) n += x * x;
    EXPECT_NEAR(std::sqrt(n), 1.0, 1e-9);
  }
  const auto empty = e.embed("the of and");
  EXPECT_EQ(empty[0], 1.0);
}

TEST(Store, SelfQueryScoresOne) {
  HashEmbedder e;
  VectorStore s("t", e.name(), e.dimension());
  const std::vector<std::string> texts = {"open pit coal mine near the river", "village relocation and protests",
                                          "tailings dam failure downstream", "forest clearing for haul roads"};
  for (std::size_t i = 0; i < texts.size(); ++i) s.upsert(embed_chunk(e, doc_chunk("c" + std::to_string(i), texts[i], 1)));
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const auto hits = search(s, e, texts[i], 2);
    ASSERT_FALSE(hits.empty());
    EXPECT_EQ(hits[0].chunk.chunk_id, "c" + std::to_string(i));
    EXPECT_NEAR(hits[0].score, 1.0, 1e-9);
  }
  EXPECT_EQ(search(s, e, "coal", 10).size(), 4u);
  VectorStore empty("e", e.name(), e.dimension());
  EXPECT_TRUE(search(empty, e, "coal", 5).empty());
}

TEST(Store, EmbedderMismatchAndDimension) {
  HashEmbedder e(256), other(128);
  VectorStore s("t", e.name(), 256);
  s.upsert(embed_chunk(e, doc_chunk("a", "coal", 1)));
  EXPECT_EQ(code_of([&] { search(s, other, "coal", 1); }), ErrorCode::EmbedderMismatch);
  EXPECT_EQ(code_of([&] { s.upsert(embed_chunk(other, doc_chunk("b", "coal", 1))); }), ErrorCode::EmbedderMismatch);
  EXPECT_FALSE(s.upsert(embed_chunk(e, doc_chunk("a", "lignite", 1))));
  EXPECT_EQ(s.size(), 1u);
  EXPECT_EQ(s.get("a")->chunk.text, "lignite");
  EXPECT_TRUE(s.remove("a"));
  EXPECT_FALSE(s.contains("a"));
}

TEST(SearchProperty, MatchesBruteForceOracle) {
  std::mt19937_64 rng(100);
  std::uniform_int_distribution<int> small(-3, 3);
  for (int t = 0; t < 100; ++t) {
    const std::size_t dim = 4 + rng() % 29;
    const std::size_t n = rng() % 1001;
    VectorStore s("r", "synthetic", dim);
    std::vector<std::pair<std::string, std::vector<float>>> all;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<float> v(dim);
      // Small integers make exact ties common.
      for (auto& x : v) x = static_cast<float>(small(rng));
      if (std::all_of(v.begin(), v.end(), [](float x) { return x == 0.0f; })) v[0] = 1.0f;
      Chunk c;
      c.chunk_id = "k" + std::to_string(rng() % 100000);
      if (s.contains(c.chunk_id)) continue;
      c.doc_id = "d";
      s.upsert({c, v});
      all.emplace_back(c.chunk_id, v);
    }
    std::vector<double> q(dim);
    for (auto& x : q) x = small(rng);
    q[rng() % dim] += 0.5;
    const std::size_t k = 1 + rng() % 20;
    const bool filtered = rng() % 3 == 0;
    auto keep = [](const Chunk& c) { return c.chunk_id.back() % 2 == 0; };
    const auto got = filtered ? s.search_vector(q, k, keep) : s.search_vector(q, k);

    std::vector<std::pair<double, std::string>> oracle;
    for (const auto& [id, v] : all) {
      if (filtered && id.back() % 2 != 0) continue;
      double dot = 0, qq = 0, vv = 0;
      for (std::size_t i = 0; i < dim; ++i) {
        dot += q[i] * v[i];
        qq += q[i] * q[i];
        vv += static_cast<double>(v[i]) * v[i];
      }
      oracle.emplace_back(dot / (std::sqrt(qq) * std::sqrt(vv)), id);
    }
    std::sort(oracle.begin(), oracle.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    oracle.resize(std::min(oracle.size(), k));
    ASSERT_EQ(got.size(), oracle.size()) << t;
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].chunk.chunk_id, oracle[i].second) << t << " rank " << i;
      EXPECT_EQ(got[i].score, oracle[i].first);
    }
  }
}

TEST(Store, PersistenceRoundTripIsExact) {
  TempDir dir;
  HashEmbedder e;
  VectorStore s("kb", e.name(), e.dimension());
  std::mt19937_64 rng(8);
  for (int i = 0; i < 300; ++i) s.upsert(embed_chunk(e, doc_chunk("c" + std::to_string(i), random_doc(rng, 30), i)));
  s.save(dir.path() / "store");
  const auto back = VectorStore::load(dir.path() / "store");
  EXPECT_EQ(back.name(), "kb");
  EXPECT_EQ(back.embedder(), e.name());
  ASSERT_EQ(back.size(), s.size());
  const auto a = s.entries(), b = back.entries();
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].chunk, b[i].chunk);
    ASSERT_EQ(std::memcmp(a[i].vector.data(), b[i].vector.data(), a[i].vector.size() * sizeof(float)), 0);
  }
  for (const char* q : {"coal pit", "village creek", "dust"}) {
    const auto h1 = search(s, e, q, 10), h2 = search(back, e, q, 10);
    ASSERT_EQ(h1.size(), h2.size());
    for (std::size_t i = 0; i < h1.size(); ++i) {
      EXPECT_EQ(h1[i].chunk.chunk_id, h2[i].chunk.chunk_id);
      EXPECT_EQ(h1[i].score, h2[i].score);
    }
  }
  // Saving the reloaded store writes byte-identical records.
  back.save(dir.path() / "again");
  const auto m1 = json::parse(read_text_file(dir.path() / "store" / "manifest.json"));
  const auto m2 = json::parse(read_text_file(dir.path() / "again" / "manifest.json"));
  EXPECT_EQ(read_binary_file(dir.path() / "store" / m1["records"].get<std::string>()),
            read_binary_file(dir.path() / "again" / m2["records"].get<std::string>()));
}

TEST(Store, RecordFileLayout) {
  TempDir dir;
  VectorStore s("kb", "synthetic", 2);
  Chunk c;
  c.chunk_id = "a";
  c.doc_id = "d";
  s.upsert({c, {0.6f, 0.8f}});
  s.save(dir.path());
  const auto m = json::parse(read_text_file(dir.path() / "manifest.json"));
  EXPECT_EQ(m["dimension"], 2);
  EXPECT_EQ(m["count"], 1);
  EXPECT_EQ(m["embedder"], "synthetic");
  const auto bytes = read_binary_file(dir.path() / m["records"].get<std::string>());
  ASSERT_GE(bytes.size(), 20u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "MSVS");
  auto u32 = [&](std::size_t at) {
    return static_cast<std::uint32_t>(bytes[at]) | static_cast<std::uint32_t>(bytes[at + 1]) << 8 |
           static_cast<std::uint32_t>(bytes[at + 2]) << 16 | static_cast<std::uint32_t>(bytes[at + 3]) << 24;
  };
  EXPECT_EQ(u32(4), 1u);
  EXPECT_EQ(u32(8), 2u);
  EXPECT_EQ(u32(12), 1u);
  EXPECT_EQ(u32(16), 0u);
  const std::uint32_t len = u32(20);
  const std::string chunk_json(bytes.begin() + 24, bytes.begin() + 24 + len);
  EXPECT_EQ(chunk_from_json(json::parse(chunk_json)), c);
  float f[2];
  std::memcpy(f, bytes.data() + 24 + len, 8);
  EXPECT_EQ(f[0], 0.6f);
  EXPECT_EQ(f[1], 0.8f);
  EXPECT_EQ(bytes.size(), 24u + len + 8u);
  // Resaving leaves one record file behind.
  s.save(dir.path());
  std::size_t record_files = 0;
  for (const auto& e : fs::directory_iterator(dir.path())) record_files += e.path().filename().string().rfind("records-", 0) == 0;
  EXPECT_EQ(record_files, 1u);
}

TEST(Answer, EchoCitesHitSites) {
  HashEmbedder e;
  std::vector<Hit> hits = {{prepend_metadata(caption_chunk("SiteA", "Open pit.")), 0.9},
                           {prepend_metadata(caption_chunk("SiteB", "Spoil heaps.")), 0.8},
                           {prepend_metadata(doc_chunk("p1", "Dust over the creek.", 178)), 0.7}};
  llm::EchoAnswerProvider echo;
  const auto a = answer(echo, "What changed?", hits);
  EXPECT_EQ(a.caption_sources, (std::vector<std::string>{"SiteA", "SiteB"}));
  ASSERT_EQ(a.document_sources.size(), 1u);
  EXPECT_EQ(to_string(a.document_sources[0]), "book.pdf > Page 178");
  EXPECT_EQ(a.source_log, "Caption Sources:\nSiteA, SiteB\nDocument Sources:\nbook.pdf > Page 178\n");
  EXPECT_EQ(a.text.find("Sources:"), std::string::npos);
  const auto req = answer_request("What changed?", hits);
  EXPECT_NE(req.messages[0].content.find("only"), std::string::npos);
  EXPECT_NE(req.messages.back().content.find("[source: SiteA]"), std::string::npos);
}

TEST(Answer, UngroundedAndInsufficient) {
  std::vector<Hit> hits = {{caption_chunk("SiteA", "Open pit."), 0.9}};
  llm::ScriptedProvider outside({std::string("It grew.\nSources: SiteA; other.pdf > Page 2")});
  try {
    answer(outside, "q", hits);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UngroundedCitation);
    EXPECT_EQ(e.subject(), "other.pdf > Page 2");
  }
  llm::ScriptedProvider none({std::string("It grew.")});
  EXPECT_EQ(code_of([&] { answer(none, "q", hits); }), ErrorCode::UngroundedCitation);
  llm::ScriptedProvider unused;
  EXPECT_EQ(code_of([&] { answer(unused, "q", {}); }), ErrorCode::InsufficientEvidence);
  EXPECT_EQ(unused.calls(), 0u);
}

TEST(Answer, SourceLogWithoutCaptions) {
  EXPECT_EQ(format_source_log({}, {{"b.pdf", 3, ""}}), "Caption Sources:\nDocument Sources:\nb.pdf > Page 3\n");
  EXPECT_EQ(parse_citations("x\nSources: a, b; c > Page 1"), (std::vector<std::string>{"a, b", "c > Page 1"}));
  EXPECT_FALSE(parse_citations("no line").has_value());
}
