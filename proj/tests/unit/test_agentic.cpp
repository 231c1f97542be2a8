#include <gtest/gtest.h>

#include <map>

#include "../support.hpp"
#include "minescape/agentic/cascade.hpp"
#include "minescape/agentic/hierarchy.hpp"
#include "minescape/pipeline/demo.hpp"

using namespace minescape;
using namespace minescape::agentic;
using namespace testing_support;
namespace demo = minescape::pipeline::demo;
using nlohmann::json;

namespace {

std::string filler(const std::string& stem, int n) {
  std::string out;
  for (int i = 0; i < n; ++i) out += stem + std::to_string(i) + (i % 9 == 8 ? ". " : " ");
  return out;
}

std::string three_sections() {
  return "[[page:1]]# Alpha\nlignite dust lignite dust. " + filler("alpha", 40) + "\n[[page:2]]# Beta\nvillage weather rainfall. " +
         filler("beta", 30) + " lignite dust village protest relocation. " + filler("betb", 10) +
         "\n[[page:3]]# Gamma\n" + filler("gamma", 40) + "\n";
}

HierarchyOptions small_options() {
  HierarchyOptions o;
  o.summary_budget = 10;
  o.chunk_size = 20;
  o.overlap = 5;
  return o;
}

KnowledgeBase kb_of(rag::Embedder& e, const std::vector<DocumentHierarchy>& docs,
                    const std::vector<std::pair<std::string, std::string>>& captions = {}) {
  KnowledgeBase kb(e.name(), e.dimension());
  for (const auto& d : docs) kb.add_document(d, e);
  for (const auto& [site, text] : captions) {
    rag::Chunk c;
    c.chunk_id = site + "-cap#0000";
    c.doc_id = site + "-cap";
    c.text = text;
    c.metadata = {{"kind", "caption"}, {"site_id", site}, {"mine_name", site}, {"country", "Australia"},
                  {"lat", -30.0}, {"lon", 140.0}};
    kb.captions.upsert(rag::embed_chunk(e, rag::prepend_metadata(c)));
  }
  return kb;
}

// Independent page bookkeeping: strip "[[page:N]]" by hand and record the
// page of every remaining byte.
struct PageOracle {
  std::string text;
  std::vector<int> page_of_byte;
};

PageOracle page_oracle(const std::string& raw) {
  PageOracle o;
  int page = 1;
  for (std::size_t i = 0; i < raw.size();) {
    if (raw.compare(i, 7, "[[page:") == 0) {
      const std::size_t close = raw.find("]]", i);
      page = std::stoi(raw.substr(i + 7, close - i - 7));
      i = close + 2;
      continue;
    }
    o.text += raw[i];
    o.page_of_byte.push_back(page);
    ++i;
  }
  return o;
}

void expect_sound_hierarchy(const DocumentHierarchy& h) {
  std::set<std::string> ids;
  for (std::size_t i = 0; i < h.map.sections.size(); ++i) {
    const auto& s = h.map.sections[i];
    ids.insert(s.section_id);
    EXPECT_LE(s.page_first, s.page_last);
    if (i) {
      const auto& p = h.map.sections[i - 1];
      EXPECT_EQ(s.token_begin, p.token_end);
      EXPECT_GE(s.page_first, p.page_last);
    }
  }
  for (const auto& c : h.chunks) {
    const std::string parent = c.metadata.at("parent_section_id");
    ASSERT_TRUE(ids.count(parent)) << c.chunk_id;
    const Section* s = h.map.find(parent);
    const int page = c.metadata.at("page");
    EXPECT_GE(page, s->page_first) << c.chunk_id;
    EXPECT_LE(page, s->page_last) << c.chunk_id;
    EXPECT_GE(c.token_begin, s->token_begin);
    EXPECT_LE(c.token_end, s->token_end);
  }
}

}  // namespace

TEST(Hierarchy, ThreeSections) {
  const auto h = build_hierarchy(three_sections(), "doc", "doc.pdf", small_options());
  ASSERT_EQ(h.map.sections.size(), 3u);
  EXPECT_FALSE(h.map.flat);
  EXPECT_EQ(h.summaries.size(), 3u);
  EXPECT_EQ(h.map.sections[0].header, "Alpha");
  EXPECT_EQ(h.map.sections[2].header, "Gamma");
  EXPECT_EQ(h.map.sections[1].page_first, 2);
  EXPECT_EQ(h.map.page_count, 3);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(h.summaries[i].chunk_id, h.map.sections[i].section_id + ":summary");
    EXPECT_EQ(h.summaries[i].token_end - h.summaries[i].token_begin, 10u);
    EXPECT_EQ(h.summaries[i].text.rfind("[doc.pdf] ", 0), 0u);
  }
  expect_sound_hierarchy(h);
  const auto back = map_from_json(map_to_json(h.map));
  EXPECT_EQ(map_to_json(back), map_to_json(h.map));
}

TEST(Hierarchy, NoHeadingsFallsBackToOneSection) {
  const std::string raw = "[[page:1]]" + filler("w", 50) + "[[page:2]]" + filler("x", 50) + "[[page:3]]" + filler("y", 5);
  const auto h = build_hierarchy(raw, "flat", "flat.pdf", small_options());
  EXPECT_TRUE(h.map.flat);
  ASSERT_EQ(h.map.sections.size(), 1u);
  EXPECT_EQ(h.map.sections[0].page_first, 1);
  EXPECT_EQ(h.map.sections[0].page_last, 3);
  EXPECT_EQ(h.summaries.size(), 1u);
  expect_sound_hierarchy(h);
}

TEST(Hierarchy, ContentsSidecarAndErrors) {
  const std::string raw = "[[page:1]]" + filler("a", 30) + "[[page:2]]" + filler("b", 30) + "[[page:3]]" + filler("c", 30);
  auto o = small_options();
  o.toc = parse_toc(json::parse(R"([{"header":"One","page":1},{"header":"Two","page":3}])"));
  const auto h = build_hierarchy(raw, "toc", "toc.pdf", o);
  ASSERT_EQ(h.map.sections.size(), 2u);
  EXPECT_EQ(h.map.sections[1].header, "Two");
  EXPECT_EQ(h.map.sections[1].page_first, 3);
  EXPECT_EQ(h.map.sections[0].page_last, 2);
  expect_sound_hierarchy(h);
  o.toc = std::vector<TocEntry>{{"Missing", 9}};
  EXPECT_EQ(code_of([&] { build_hierarchy(raw, "toc", "toc.pdf", o); }), ErrorCode::ConfigError);
  EXPECT_EQ(code_of([] { build_hierarchy("  [[page:1]] ", "e", "e.pdf"); }), ErrorCode::BadRequest);
}

TEST(Hierarchy, BookPagesMatchMarkerPositions) {
  const std::string raw = demo::book_text();
  const auto h = build_hierarchy(raw, demo::kBookStem, demo::kBookSourceFile);
  EXPECT_EQ(h.map.page_count, demo::kBookPages);
  EXPECT_EQ(h.map.sections.size(), 10u);
  expect_sound_hierarchy(h);

  const auto oracle = page_oracle(raw);
  const auto tokens = rag::tokenize(oracle.text);
  ASSERT_FALSE(h.chunks.empty());
  std::set<int> pages_seen;
  for (const auto& c : h.chunks) {
    ASSERT_LE(c.token_end, tokens.size());
    std::map<int, std::size_t> count;
    for (std::size_t i = c.token_begin; i < c.token_end; ++i) count[oracle.page_of_byte[tokens[i].begin]]++;
    int best = oracle.page_of_byte[tokens[c.token_begin].begin];
    for (const auto& [p, k] : count) {
      if (k > count[best]) best = p;
    }
    EXPECT_EQ(c.metadata.at("page").get<int>(), best) << c.chunk_id;
    pages_seen.insert(best);
    // Chunk text is the source span behind the metadata prefix.
    const std::string span = oracle.text.substr(tokens[c.token_begin].begin,
                                                tokens[c.token_end - 1].end - tokens[c.token_begin].begin);
    EXPECT_EQ(c.text, std::string("[") + demo::kBookSourceFile + "] " + span);
  }
  EXPECT_GT(pages_seen.size(), 100u);
  // The chapter headings start on the documented pages.
  const std::vector<int> starts = {1, 15, 39, 63, 89, 113, 137, 161, 191, 215};
  for (std::size_t i = 0; i < starts.size(); ++i) EXPECT_EQ(h.map.sections[i].page_first, starts[i]);
}

TEST(Cascade, SummaryMatchRestrictsChunksToOneSection) {
  rag::HashEmbedder e;
  const auto kb = kb_of(e, {build_hierarchy(three_sections(), "doc", "doc.pdf", small_options())});
  CascadeParams p;
  p.k_sections = 1;
  const auto ev = cascade_retrieve("gamma0 gamma1 gamma2", kb, e, p);
  ASSERT_EQ(ev.routed_sections.size(), 1u);
  EXPECT_EQ(kb.section(ev.routed_sections[0])->header, "Gamma");
  ASSERT_FALSE(ev.document_hits.empty());
  for (const auto& h : ev.document_hits) EXPECT_EQ(h.chunk.metadata["parent_section_id"], ev.routed_sections[0]);
  EXPECT_TRUE(ev.caption_hits.empty());
}

TEST(Cascade, CaptionOnlyQuery) {
  rag::HashEmbedder e;
  const auto kb = kb_of(e, {build_hierarchy(three_sections(), "doc", "doc.pdf", small_options())},
                        {{"Opal", "tailings dam seepage near the creek"}});
  const auto ev = cascade_retrieve("tailings seepage", kb, e);
  EXPECT_TRUE(ev.document_hits.empty());
  ASSERT_EQ(ev.caption_hits.size(), 1u);
  EXPECT_EQ(ev.consolidated.size(), 1u);
  EXPECT_EQ(ev.consolidated[0].chunk.metadata["site_id"], "Opal");
}

TEST(Cascade, NarrowRoutingMissesEvidenceInSecondSection) {
  rag::HashEmbedder e;
  const auto kb = kb_of(e, {build_hierarchy(three_sections(), "doc", "doc.pdf", small_options())});
  const std::string q = "lignite dust village protest";
  // Full-scan oracle: the best chunk overall is the Beta passage.
  const auto flat = kb.chunks.search_vector(e.embed(q), 1);
  ASSERT_EQ(flat.size(), 1u);
  const std::string truth = flat[0].chunk.chunk_id;
  EXPECT_EQ(kb.section(flat[0].chunk.metadata["parent_section_id"])->header, "Beta");
  EXPECT_NE(flat[0].chunk.text.find("protest"), std::string::npos);

  CascadeParams one;
  one.k_sections = 1;
  const auto narrow = cascade_retrieve(q, kb, e, one);
  ASSERT_EQ(narrow.routed_sections.size(), 1u);
  EXPECT_EQ(kb.section(narrow.routed_sections[0])->header, "Alpha");
  for (const auto& h : narrow.document_hits) EXPECT_NE(h.chunk.chunk_id, truth);

  CascadeParams two;
  two.k_sections = 2;
  const auto wide = cascade_retrieve(q, kb, e, two);
  EXPECT_EQ(kb.section(wide.routed_sections[1])->header, "Beta");
  ASSERT_FALSE(wide.document_hits.empty());
  EXPECT_EQ(wide.document_hits[0].chunk.chunk_id, truth);
}

TEST(CascadeProperty, AllSectionsRoutedEqualsFullScan) {
  rag::HashEmbedder e;
  const auto kb = demo::australia_knowledge_base(e);
  const std::size_t sections = kb.summaries.size();
  std::mt19937_64 rng(31);
  const auto vocab = rag::content_words(demo::book_text().substr(0, 20000));
  for (int t = 0; t < 100; ++t) {
    std::string q;
    for (int w = 0; w < 1 + static_cast<int>(rng() % 6); ++w) q += vocab[rng() % vocab.size()] + " ";
    CascadeParams p;
    p.k_sections = sections + static_cast<std::size_t>(rng() % 3);
    p.k_chunks = 1 + rng() % 8;
    const auto ev = cascade_retrieve(q, kb, e, p);
    auto oracle = kb.chunks.search_vector(e.embed(q), p.k_chunks);
    std::erase_if(oracle, [](const rag::Hit& h) { return !(h.score > 0.0); });
    ASSERT_EQ(ev.document_hits.size(), oracle.size()) << q;
    for (std::size_t i = 0; i < oracle.size(); ++i) EXPECT_EQ(ev.document_hits[i].chunk.chunk_id, oracle[i].chunk.chunk_id);
  }
}

TEST(Cascade, ConsolidationIsDeduplicatedAndOrdered) {
  rag::HashEmbedder e;
  const auto kb = demo::australia_knowledge_base(e);
  const auto ev = cascade_retrieve(demo::kAustraliaQuery, kb, e);
  std::set<std::string> ids;
  for (std::size_t i = 0; i < ev.consolidated.size(); ++i) {
    EXPECT_TRUE(ids.insert(ev.consolidated[i].chunk.chunk_id).second);
    if (i) EXPECT_GE(ev.consolidated[i - 1].score, ev.consolidated[i].score);
  }
  EXPECT_EQ(ev.consolidated.size(), ev.caption_hits.size() + ev.document_hits.size());
  KnowledgeBase empty(e.name(), e.dimension());
  EXPECT_EQ(code_of([&] { cascade_retrieve("x", empty, e); }), ErrorCode::InsufficientEvidence);
}

TEST(Sufficiency, VerbatimEvidenceIsSufficient) {
  EvidenceSet ev;
  rag::Chunk c;
  c.chunk_id = "a";
  c.text = "Open pit coal mining near the creek.";
  ev.consolidated = {{c, 1.0}};
  const auto s = sufficiency(c.text, c.text, ev);
  EXPECT_TRUE(s.sufficient);
  EXPECT_DOUBLE_EQ(s.coverage, 1.0);
}

TEST(Sufficiency, EmptyEvidenceKeepsTheQuery) {
  const auto s = sufficiency("coal creek", "coal creek", {});
  EXPECT_FALSE(s.sufficient);
  EXPECT_EQ(s.refined_query, "coal creek");
  EXPECT_TRUE(s.added_terms.empty());
}

TEST(Sufficiency, HalfCoverageBoundaryCounts) {
  EvidenceSet ev;
  rag::Chunk c;
  c.chunk_id = "a";
  c.text = "coal and dust";
  ev.consolidated = {{c, 0.9}};
  const auto s = sufficiency("coal dust creek village", "coal dust creek village", ev);
  EXPECT_DOUBLE_EQ(s.coverage, 0.5);
  EXPECT_TRUE(s.sufficient);
  SufficiencyParams strict;
  strict.threshold = 0.95;
  EXPECT_FALSE(sufficiency("coal dust creek village", "coal dust creek village", ev, strict).sufficient);
}

TEST(Sufficiency, RefinementAddsBestTermsAlphabeticallyOnTies) {
  EvidenceSet ev;
  rag::Chunk a, b;
  a.chunk_id = "a";
  a.text = "pit zinc benches";
  b.chunk_id = "b";
  b.text = "pit waste";
  ev.consolidated = {{a, 0.1}, {b, 0.05}};
  SufficiencyParams p;
  p.refine_terms = 3;
  const auto s = sufficiency("copper", "copper", ev, p);
  EXPECT_FALSE(s.sufficient);
  // pit 0.15, benches 0.1, zinc 0.1, waste 0.05
  EXPECT_EQ(s.added_terms, (std::vector<std::string>{"pit", "benches", "zinc"}));
  EXPECT_EQ(s.refined_query, "copper pit benches zinc");
  EXPECT_EQ(coverage("the of and", ev.consolidated), 0.0);
}

TEST(Agentic, AustraliaSourceLog) {
  rag::HashEmbedder e;
  const auto kb = demo::australia_knowledge_base(e);
  llm::EchoAnswerProvider echo;
  const auto r = agentic_answer(echo, demo::kAustraliaQuery, kb, e);
  ASSERT_TRUE(r.answer) << (r.refusal ? r.refusal->message : "");
  EXPECT_EQ(r.answer->source_log,
            "Caption Sources:\n"
            "ElliotsNo1OpenCut, Endeavour22, CentralNorthOpenPit\n"
            "Document Sources:\n"
            "Scambary_MyCountryMyMine_2013_239p.pdf > Page 178\n"
            "Scambary_MyCountryMyMine_2013_239p.pdf > Page 178\n"
            "Scambary_MyCountryMyMine_2013_239p.pdf > Page 3\n");
  EXPECT_EQ(r.trace.iterations.size(), 1u);
  EXPECT_EQ(echo.calls(), 1u);
  // Every cited page lies inside the cited chunk's section.
  for (const auto& h : r.answer->evidence) {
    if (rag::is_caption_chunk(h.chunk)) continue;
    const Section* s = kb.section(h.chunk.metadata["parent_section_id"]);
    ASSERT_NE(s, nullptr);
    const int page = h.chunk.metadata["page"];
    EXPECT_GE(page, s->page_first);
    EXPECT_LE(page, s->page_last);
  }
}

TEST(Agentic, UnrelatedQueryIsRefusedWithTrace) {
  rag::HashEmbedder e;
  const auto kb = demo::australia_knowledge_base(e);
  llm::EchoAnswerProvider echo;
  const auto r = agentic_answer(echo, "What is the best recipe for sourdough bread?", kb, e);
  EXPECT_FALSE(r.answer);
  ASSERT_TRUE(r.refusal);
  EXPECT_EQ(r.refusal->code, ErrorCode::InsufficientEvidence);
  EXPECT_GE(r.trace.iterations.size(), 1u);
  EXPECT_EQ(echo.calls(), 0u);
  const auto j = agentic_to_json(r);
  EXPECT_TRUE(j.contains("trace"));
}

TEST(Agentic, UngroundedReplyBecomesRefusal) {
  rag::HashEmbedder e;
  const auto kb = demo::australia_knowledge_base(e);
  llm::ScriptedProvider liar({std::string("Mines are large.\nSources: Wikipedia")});
  const auto r = agentic_answer(liar, demo::kAustraliaQuery, kb, e);
  EXPECT_FALSE(r.answer);
  ASSERT_TRUE(r.refusal);
  EXPECT_EQ(r.refusal->code, ErrorCode::UngroundedCitation);
}

TEST(AgenticProperty, TraceNeverExceedsTheBound) {
  rag::HashEmbedder e;
  const auto kb = demo::australia_knowledge_base(e);
  const auto vocab = rag::content_words(demo::book_text().substr(0, 30000) + " sourdough bread quantum violin");
  std::mt19937_64 rng(1000);
  llm::EchoAnswerProvider echo;
  for (int t = 0; t < 1000; ++t) {
    std::string q;
    for (int w = 0; w < static_cast<int>(rng() % 8); ++w) q += vocab[rng() % vocab.size()] + " ";
    AgenticParams p;
    p.max_refinements = static_cast<int>(rng() % 4);
    p.sufficiency.threshold = 0.05 + static_cast<double>(rng() % 90) / 100.0;
    const auto r = agentic_answer(echo, q, kb, e, p);
    ASSERT_LE(r.trace.iterations.size(), static_cast<std::size_t>(p.max_refinements) + 1) << q;
    ASSERT_GE(r.trace.iterations.size(), 1u);
    ASSERT_NE(r.answer.has_value(), r.refusal.has_value());
    if (r.answer) EXPECT_TRUE(r.trace.iterations.back().sufficient);
  }
}

TEST(Agentic, DeterministicAcrossRunsAndReload) {
  rag::HashEmbedder e;
  const auto kb = demo::australia_knowledge_base(e);
  TempDir dir;
  kb.save(dir.path() / "kb");
  const auto loaded = KnowledgeBase::load(dir.path() / "kb");
  llm::EchoAnswerProvider a, b;
  const auto r1 = agentic_answer(a, demo::kAustraliaQuery, kb, e);
  const auto r2 = agentic_answer(b, demo::kAustraliaQuery, loaded, e);
  EXPECT_EQ(agentic_to_json(r1).dump(), agentic_to_json(r2).dump());
  EXPECT_EQ(loaded.maps.size(), kb.maps.size());
  EXPECT_EQ(loaded.chunks.size(), kb.chunks.size());
}

TEST(Agentic, FlatRetrieveMergesStores) {
  rag::HashEmbedder e;
  const auto kb = demo::australia_knowledge_base(e);
  const auto hits = flat_retrieve(demo::kAustraliaQuery, kb, e, 5);
  ASSERT_EQ(hits.size(), 5u);
  for (std::size_t i = 1; i < hits.size(); ++i) EXPECT_GE(hits[i - 1].score, hits[i].score);
}

namespace {

// Never sufficient, so every round but the last asks for a refinement.
AgenticParams strict_params(const std::string& refine) {
  AgenticParams p;
  p.sufficiency.threshold = 2.0;
  p.max_refinements = 2;
  p.refine = refine;
  return p;
}

std::vector<std::string> trace_queries(const AgenticResult& r) {
  std::vector<std::string> out;
  for (const auto& s : r.trace.iterations) out.push_back(s.query);
  return out;
}

}  // namespace

TEST(Refine, EchoProviderReproducesTheHeuristic) {
  rag::HashEmbedder e;
  const auto kb = kb_of(e, {build_hierarchy(three_sections(), "d", "d.pdf", small_options())});
  llm::EchoAnswerProvider echo;
  const auto h = agentic_answer(echo, "lignite protest", kb, e, strict_params("heuristic"));
  EXPECT_EQ(echo.calls(), 0u);
  const auto p = agentic_answer(echo, "lignite protest", kb, e, strict_params("provider"));
  ASSERT_EQ(h.trace.iterations.size(), 3u);
  EXPECT_EQ(trace_queries(h), trace_queries(p));
  EXPECT_EQ(echo.calls(), 2u);
  EXPECT_EQ(h.trace.iterations[0].refined_by, "heuristic");
  EXPECT_EQ(p.trace.iterations[0].refined_by, "provider");
  EXPECT_EQ(p.trace.iterations.back().refined_by, "");
  EXPECT_TRUE(p.refusal);
}

TEST(Refine, ProviderRewriteIsUsedAndCleaned) {
  rag::HashEmbedder e;
  const auto kb = kb_of(e, {build_hierarchy(three_sections(), "d", "d.pdf", small_options())});
  llm::ScriptedProvider sp({std::string("\nQuery: \"village relocation protest\"\nextra commentary"), std::string("lignite")});
  const auto r = agentic_answer(sp, "lignite protest", kb, e, strict_params("provider"));
  EXPECT_EQ(trace_queries(r), (std::vector<std::string>{"lignite protest", "village relocation protest", "lignite"}));
  const auto reqs = sp.requests();
  ASSERT_EQ(reqs.size(), 2u);
  EXPECT_EQ(reqs[0].purpose, "refine");
  EXPECT_NE(reqs[0].messages.back().content.find("Question: lignite protest\nCurrent query: lignite protest\n"),
            std::string::npos);
  EXPECT_NE(reqs[1].messages.back().content.find("Current query: village relocation protest\n"), std::string::npos);
}

TEST(Refine, OutageOrEmptyReplyFallsBackToTheHeuristic) {
  rag::HashEmbedder e;
  const auto kb = kb_of(e, {build_hierarchy(three_sections(), "d", "d.pdf", small_options())});
  llm::EchoAnswerProvider echo;
  const auto h = agentic_answer(echo, "lignite protest", kb, e, strict_params("heuristic"));
  llm::ScriptedProvider sp({Error(ErrorCode::ProviderUnavailable, "down", {}, std::nullopt, true), std::string("  \n")});
  const auto r = agentic_answer(sp, "lignite protest", kb, e, strict_params("provider"));
  EXPECT_EQ(trace_queries(r), trace_queries(h));
  EXPECT_EQ(r.trace.iterations[0].refined_by, "heuristic");
  llm::ScriptedProvider bad({Error(ErrorCode::ProviderRejected, "bad key")});
  EXPECT_THROW(agentic_answer(bad, "lignite protest", kb, e, strict_params("provider")), Error);
}

TEST(Hierarchy, AbstractiveSummariesComeFromTheProvider) {
  llm::ScriptedProvider sp;
  sp.set_fallback([](const llm::ChatRequest&) { return "\n" + filler("sum", 30) + "\n"; });
  auto o = small_options();
  o.summarizer = &sp;
  const auto a = build_hierarchy(three_sections(), "doc", "doc.pdf", o);
  const auto x = build_hierarchy(three_sections(), "doc", "doc.pdf", small_options());
  ASSERT_EQ(sp.calls(), a.map.sections.size());
  EXPECT_EQ(sp.requests()[1].purpose, "summarize");
  const std::string beta = sp.requests()[1].messages.back().content;
  EXPECT_EQ(beta.rfind("Section: Beta\n\n", 0), 0u) << beta.substr(0, 80);
  EXPECT_NE(beta.find("village weather rainfall."), std::string::npos);
  ASSERT_EQ(a.summaries.size(), x.summaries.size());
  for (std::size_t i = 0; i < a.summaries.size(); ++i) {
    EXPECT_EQ(a.summaries[i].metadata["summary_mode"], "abstractive");
    EXPECT_EQ(x.summaries[i].metadata["summary_mode"], "extractive");
    EXPECT_NE(a.summaries[i].text.find("sum0 sum1"), std::string::npos);
    EXPECT_EQ(a.summaries[i].text.find("sum10"), std::string::npos) << "cut to the summary budget";
  }
  ASSERT_EQ(a.chunks.size(), x.chunks.size());
  for (std::size_t i = 0; i < a.chunks.size(); ++i) EXPECT_EQ(a.chunks[i].text, x.chunks[i].text);

  llm::ScriptedProvider blank;
  blank.set_fallback([](const llm::ChatRequest&) { return std::string("  \n"); });
  o.summarizer = &blank;
  const auto b = build_hierarchy(three_sections(), "doc", "doc.pdf", o);
  for (std::size_t i = 0; i < b.summaries.size(); ++i) EXPECT_EQ(b.summaries[i].text, x.summaries[i].text);
}
