#include "minescape/pipeline/config.hpp"

#include <charconv>
#include <functional>
#include <sstream>

#include "minescape/error.hpp"
#include "minescape/util.hpp"

namespace minescape::pipeline {

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& value, const char* want) {
  throw Error(ErrorCode::ConfigError, "config key '" + key + "' expects " + want + ", got '" + value + "'", key);
}

double as_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) bad(key, v, "a number");
    return d;
  } catch (const std::logic_error&) {
    bad(key, v, "a number");
  }
}

std::uint64_t as_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad(key, v, "a non-negative integer");
  return out;
}

bool as_bool(const std::string& key, const std::string& v) {
  const std::string l = to_lower(v);
  if (l == "true" || l == "yes" || l == "on" || l == "1") return true;
  if (l == "false" || l == "no" || l == "off" || l == "0") return false;
  bad(key, v, "a boolean");
}

std::string one_of(const std::string& key, const std::string& v, std::initializer_list<const char*> allowed) {
  for (const char* a : allowed) {
    if (v == a) return v;
  }
  std::string want = "one of";
  for (const char* a : allowed) want += std::string(" ") + a;
  bad(key, v, want.c_str());
}

using Setter = std::function<void(Config&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"catalog.file", [](Config& c, auto&, auto& v) { c.catalog_file = v; }},
      {"catalog.horizon", [](Config& c, auto& k, auto& v) {
         auto d = parse_date(v);
         if (!d) bad(k, v, "a YYYY-MM-DD date");
         c.horizon = *d;
       }},
      {"catalog.max_cloud_pct", [](Config& c, auto& k, auto& v) { c.max_cloud_pct = as_double(k, v); }},
      {"catalog.lookback_months", [](Config& c, auto& k, auto& v) { c.lookback_months = static_cast<int>(as_uint(k, v)); }},
      {"catalog.max_candidates", [](Config& c, auto& k, auto& v) { c.max_candidates = as_uint(k, v); }},
      {"quality.gap_threshold", [](Config& c, auto& k, auto& v) { c.gap_threshold = as_double(k, v); }},
      {"quality.low_pct", [](Config& c, auto& k, auto& v) { c.enhance.low_pct = as_double(k, v); }},
      {"quality.high_pct", [](Config& c, auto& k, auto& v) { c.enhance.high_pct = as_double(k, v); }},
      {"quality.sat_gain", [](Config& c, auto& k, auto& v) { c.enhance.sat_gain = as_double(k, v); }},
      {"udm.enabled", [](Config& c, auto& k, auto& v) { c.udm_enabled = as_bool(k, v); }},
      {"udm.veto", [](Config& c, auto& k, auto& v) { c.udm_veto = as_bool(k, v); }},
      {"udm.texture_window", [](Config& c, auto& k, auto& v) { c.texture_window = as_uint(k, v); }},
      {"udm.ndvi_gate", [](Config& c, auto& k, auto& v) { c.udm.ndvi_gate = as_double(k, v); }},
      {"udm.min_area_px", [](Config& c, auto& k, auto& v) { c.udm.min_area_px = as_uint(k, v); }},
      {"udm.max_area_px", [](Config& c, auto& k, auto& v) { c.udm.max_area_px = as_uint(k, v); }},
      {"udm.distance_margin", [](Config& c, auto& k, auto& v) { c.udm.distance_margin = as_double(k, v); }},
      {"udm.morphology_radius", [](Config& c, auto& k, auto& v) { c.udm.morphology_radius = as_uint(k, v); }},
      {"caption.provider", [](Config& c, auto& k, auto& v) { c.caption_provider = one_of(k, v, {"mock", "http"}); }},
      {"caption.seed", [](Config& c, auto& k, auto& v) { c.caption_seed = as_uint(k, v); }},
      {"caption.payload", [](Config& c, auto& k, auto& v) { c.payload = one_of(k, v, {"rgb", "rgb_ndvi_udm", "auto"}); }},
      {"caption.multi_shot", [](Config& c, auto& k, auto& v) { c.caption.multi_shot = as_bool(k, v); }},
      {"caption.word_cap", [](Config& c, auto& k, auto& v) { c.caption.word_cap = as_uint(k, v); }},
      {"caption.temperature", [](Config& c, auto& k, auto& v) { c.caption.hyperparams.temperature = as_double(k, v); }},
      {"caption.frequency_penalty", [](Config& c, auto& k, auto& v) { c.caption.hyperparams.frequency_penalty = as_double(k, v); }},
      {"caption.max_tokens", [](Config& c, auto& k, auto& v) { c.caption.hyperparams.max_tokens = static_cast<int>(as_uint(k, v)); }},
      {"caption.banned_phrases", [](Config& c, auto&, auto& v) {
         c.caption.hyperparams.banned_phrases.clear();
         std::istringstream in(v);
         for (std::string p; std::getline(in, p, ',');) {
           if (!trim(p).empty()) c.caption.hyperparams.banned_phrases.push_back(trim(p));
         }
       }},
      {"judge.provider", [](Config& c, auto& k, auto& v) { c.judge_provider = one_of(k, v, {"mock", "http"}); }},
      {"judge.seed", [](Config& c, auto& k, auto& v) { c.judge_seed = as_uint(k, v); }},
      {"judge.mean_min", [](Config& c, auto& k, auto& v) { c.gate.mean_min = as_double(k, v); }},
      {"judge.dim_min", [](Config& c, auto& k, auto& v) { c.gate.dim_min = static_cast<int>(as_uint(k, v)); }},
      {"judge.parallel", [](Config& c, auto& k, auto& v) { c.judge_parallel = as_bool(k, v); }},
      {"rag.embedder", [](Config& c, auto& k, auto& v) { c.embedder = one_of(k, v, {"hash", "http"}); }},
      {"rag.dimension", [](Config& c, auto& k, auto& v) { c.embedding_dimension = as_uint(k, v); }},
      {"rag.chunk_size", [](Config& c, auto& k, auto& v) { c.chunk_size = as_uint(k, v); }},
      {"rag.overlap", [](Config& c, auto& k, auto& v) { c.overlap = as_uint(k, v); }},
      {"rag.summaries", [](Config& c, auto& k, auto& v) { c.summaries = one_of(k, v, {"extractive", "abstractive"}); }},
      {"rag.summary_budget", [](Config& c, auto& k, auto& v) { c.summary_budget = as_uint(k, v); }},
      {"rag.documents", [](Config& c, auto&, auto& v) { c.documents_dir = v; }},
      {"rag.answer_provider", [](Config& c, auto& k, auto& v) { c.answer_provider = one_of(k, v, {"echo", "http"}); }},
      {"rag.k_sections", [](Config& c, auto& k, auto& v) { c.agentic.cascade.k_sections = as_uint(k, v); }},
      {"rag.k_chunks", [](Config& c, auto& k, auto& v) { c.agentic.cascade.k_chunks = as_uint(k, v); }},
      {"rag.k_captions", [](Config& c, auto& k, auto& v) { c.agentic.cascade.k_captions = as_uint(k, v); }},
      {"rag.min_score", [](Config& c, auto& k, auto& v) { c.agentic.cascade.min_score = as_double(k, v); }},
      {"rag.sufficiency_threshold", [](Config& c, auto& k, auto& v) { c.agentic.sufficiency.threshold = as_double(k, v); }},
      {"rag.min_coverage", [](Config& c, auto& k, auto& v) { c.agentic.sufficiency.min_coverage = as_double(k, v); }},
      {"rag.refine_terms", [](Config& c, auto& k, auto& v) { c.agentic.sufficiency.refine_terms = as_uint(k, v); }},
      {"rag.refine", [](Config& c, auto& k, auto& v) { c.agentic.refine = one_of(k, v, {"heuristic", "provider"}); }},
      {"rag.max_refinements", [](Config& c, auto& k, auto& v) { c.agentic.max_refinements = static_cast<int>(as_uint(k, v)); }},
      {"service.host", [](Config& c, auto&, auto& v) { c.host = v; }},
      {"service.port", [](Config& c, auto& k, auto& v) {
         const auto p = as_uint(k, v);
         if (p > 65535) bad(k, v, "a port number");
         c.port = static_cast<int>(p);
       }},
      {"llm.max_retries", [](Config& c, auto& k, auto& v) { c.max_retries = static_cast<int>(as_uint(k, v)); }},
      {"llm.base_delay_ms", [](Config& c, auto& k, auto& v) { c.base_delay_ms = static_cast<int>(as_uint(k, v)); }},
  };
  return table;
}

void validate(const Config& c) {
  if (c.max_candidates == 0) throw Error(ErrorCode::ConfigError, "catalog.max_candidates must be positive");
  if (!(c.gap_threshold > 0.0 && c.gap_threshold < 1.0)) throw Error(ErrorCode::ConfigError, "quality.gap_threshold must be in (0,1)");
  if (c.embedding_dimension == 0) throw Error(ErrorCode::ConfigError, "rag.dimension must be positive");
  if (c.overlap >= c.chunk_size) throw Error(ErrorCode::ConfigError, "rag.overlap must be smaller than rag.chunk_size");
  if (c.summary_budget == 0) throw Error(ErrorCode::ConfigError, "rag.summary_budget must be positive");
  c.udm.validate();
  c.caption.hyperparams.validate();
}

void apply_text(Config& c, std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string section, line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw Error(ErrorCode::ConfigError, "malformed section header on line " + std::to_string(lineno));
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::ConfigError, "expected key = value on line " + std::to_string(lineno));
    const std::string key = (section.empty() ? "" : section + ".") + trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw Error(ErrorCode::ConfigError, "unknown config key '" + key + "'", key);
    it->second(c, key, value);
    c.entries[key] = value;
  }
}

}  // namespace

std::string default_config_text() {
  return R"(# minescape workspace configuration. Paths are relative to this file.
# Provider credentials are read from the environment (PROVIDER_URL,
# PROVIDER_KEY, PROVIDER_MODEL, optional JUDGE_ and ANSWER_ prefixed
# variants, and EMBEDDER_URL, EMBEDDER_KEY, EMBEDDER_MODEL, EMBEDDER_DIM).

[catalog]
file = catalog/catalog.json
horizon = 2024-12-31
max_cloud_pct = 20
lookback_months = 18
max_candidates = 5

[quality]
gap_threshold = 0.05
low_pct = 2
high_pct = 98
sat_gain = 1.2

[udm]
enabled = true
veto = true
texture_window = 5
ndvi_gate = 0.4
min_area_px = 4
max_area_px = 1000000
distance_margin = 0
morphology_radius = 1

[caption]
provider = mock
seed = 0
payload = auto
multi_shot = true
word_cap = 250
temperature = 0.2
frequency_penalty = 0.3
max_tokens = 400

[judge]
provider = mock
seed = 0
mean_min = 4.0
dim_min = 3
parallel = false

[rag]
embedder = hash
dimension = 256
chunk_size = 150
overlap = 30
summary_budget = 60
summaries = extractive
documents = documents
answer_provider = echo
k_sections = 3
k_chunks = 3
k_captions = 3
min_score = 0
sufficiency_threshold = 0.15
min_coverage = 0.5
refine_terms = 3
max_refinements = 3
refine = heuristic

[service]
host = 127.0.0.1
port = 8080

[llm]
max_retries = 3
base_delay_ms = 500
)";
}

Config parse_config(std::string_view text, const fs::path& root) {
  Config c;
  c.root = root;
  apply_text(c, default_config_text());
  apply_text(c, text);
  validate(c);
  return c;
}

Config load_config(const fs::path& root) {
  const fs::path file = root / "config.ini";
  if (!fs::exists(file)) return parse_config("", root);
  return parse_config(read_text_file(file), root);
}

std::string Config::config_hash() const {
  std::string flat;
  for (const auto& [k, v] : entries) flat += k + "=" + v + "\n";
  return hex64(fnv1a64(flat));
}

}  // namespace minescape::pipeline
