#include "minescape/caption/caption.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <sstream>
#include <thread>

#include "minescape/date.hpp"
#include "minescape/embedded_data.hpp"
#include "minescape/util.hpp"

namespace minescape::caption {

using nlohmann::json;

namespace {

std::string rstrip(std::string s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  return s;
}

std::string embedded_or_throw(std::string_view name) {
  const auto text = embedded_file(name);
  if (!text) throw Error(ErrorCode::TemplateError, "missing embedded file " + std::string(name));
  return std::string(*text);
}

}  // namespace

PromptTemplate parse_template(std::string_view text, std::string name) {
  PromptTemplate t;
  t.name = std::move(name);
  std::istringstream in{std::string(text)};
  std::string line, current;
  bool in_section = false;
  while (std::getline(in, line)) {
    if (line.rfind("@@section", 0) == 0) {
      current = trim(line.substr(9));
      if (current.empty()) throw Error(ErrorCode::TemplateError, "section marker without a name");
      if (t.sections.count(current)) throw Error(ErrorCode::TemplateError, "duplicate section '" + current + "'", current);
      t.sections[current];
      in_section = true;
      continue;
    }
    if (!in_section) continue;
    t.sections[current] += line + "\n";
  }
  for (auto& [k, v] : t.sections) v = rstrip(v);
  for (auto req : kRequiredSections) {
    auto it = t.sections.find(std::string(req));
    if (it == t.sections.end() || trim(it->second).empty()) {
      throw Error(ErrorCode::TemplateError, "template lacks section '" + std::string(req) + "'", std::string(req));
    }
  }
  return t;
}

const PromptTemplate& default_template() {
  static const PromptTemplate t = parse_template(embedded_or_throw("prompts/caption_system_v1.txt"));
  return t;
}

std::vector<Exemplar> parse_exemplars(std::string_view json_text) {
  std::vector<Exemplar> out;
  try {
    const json j = json::parse(json_text);
    const json& arr = j.is_array() ? j : j.at("exemplars");
    for (const auto& e : arr) out.push_back({e.at("question").get<std::string>(), e.at("answer").get<std::string>()});
  } catch (const json::exception& e) {
    throw Error(ErrorCode::TemplateError, std::string("malformed exemplars: ") + e.what());
  }
  return out;
}

const std::vector<Exemplar>& default_exemplars() {
  static const std::vector<Exemplar> ex = parse_exemplars(embedded_or_throw("prompts/exemplars_v1.json"));
  return ex;
}

void GenerationHyperparams::validate() const {
  if (!(temperature >= 0.0 && temperature <= 2.0)) throw Error(ErrorCode::ConfigError, "temperature must be in [0, 2]");
  if (!std::isfinite(frequency_penalty)) throw Error(ErrorCode::ConfigError, "frequency_penalty must be finite");
  if (max_tokens < 1 || max_tokens > 32768) throw Error(ErrorCode::ConfigError, "max_tokens must be in [1, 32768]");
}

namespace {

std::string coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string join(const std::vector<std::string>& v, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
  return out;
}

}  // namespace

PromptBundle build_prompt(const sites::SiteRecord& site, const sites::Dossier& dossier,
                          const std::vector<Exemplar>& exemplars, const CaptionConfig& config,
                          const PromptTemplate& tmpl) {
  for (auto req : kRequiredSections) {
    if (!tmpl.sections.count(std::string(req))) {
      throw Error(ErrorCode::TemplateError, "template lacks section '" + std::string(req) + "'", std::string(req));
    }
  }
  if (config.multi_shot && (exemplars.size() < 5 || exemplars.size() > 10)) {
    throw Error(ErrorCode::TemplateError,
                "multi-shot prompting needs 5 to 10 exemplars, got " + std::to_string(exemplars.size()), "exemplars",
                static_cast<std::int64_t>(exemplars.size()));
  }
  const sites::Dossier d = sites::validate_dossier(dossier);

  PromptBundle b;
  std::string sys;
  if (auto it = tmpl.sections.find("role"); it != tmpl.sections.end()) sys += it->second + "\n\n";
  for (std::size_t i = 0; i < kRequiredSections.size(); ++i) {
    const std::string& body = tmpl.sections.at(std::string(kRequiredSections[i]));
    if (body.find(kSectionMarkers[i]) == std::string::npos) sys += std::string(kSectionMarkers[i]) + "\n";
    sys += body + "\n\n";
  }
  b.system_prompt = rstrip(sys);

  std::istringstream cin_(tmpl.sections.at("constraints"));
  std::string line;
  while (std::getline(cin_, line)) {
    const std::string t = trim(line);
    if (t.rfind("- ", 0) == 0) b.constraints_digest.push_back(trim(t.substr(2)));
  }

  if (config.multi_shot) b.exemplars = exemplars;

  std::string ctx = std::string(kContextOpen) + "\n";
  ctx += "Site: " + site.name + (site.country.empty() ? "" : ", " + site.country) + "\n";
  ctx += "Coordinates: " + coord(site.lat) + ", " + coord(site.lon) + "\n";
  if (!site.commodity.empty()) ctx += "Commodity: " + join(site.commodity, ", ") + "\n";
  const std::pair<const char*, const std::string*> segs[] = {
      {"History", &d.history}, {"Geology", &d.geology}, {"Controversies", &d.controversies}};
  for (const auto& [header, text] : segs) {
    if (trim(*text).empty()) continue;
    ctx += "\n## " + std::string(header) + "\n" + trim(*text) + "\n";
  }
  if (!d.sources.empty()) ctx += "\n## Sources\n" + join(d.sources, "\n") + "\n";
  if (d.sparse_flag) ctx += "\n" + std::string(kNoSpeculation) + "\n";
  ctx += kContextClose;
  b.context = ctx;

  b.query = "Write the landscape caption for the attached Sentinel-2 renders of this mining site.\nSite: " + site.name +
            (site.country.empty() ? "" : ", " + site.country);
  return b;
}

std::string bundle_to_json(const PromptBundle& b) {
  json ex = json::array();
  for (const auto& e : b.exemplars) ex.push_back({{"question", e.question}, {"answer", e.answer}});
  return json{{"system_prompt", b.system_prompt},
              {"exemplars", ex},
              {"context", b.context},
              {"query", b.query},
              {"constraints_digest", b.constraints_digest}}
      .dump(2);
}

PromptBundle bundle_from_json(std::string_view text) {
  PromptBundle b;
  try {
    const json j = json::parse(text);
    b.system_prompt = j.at("system_prompt").get<std::string>();
    for (const auto& e : j.at("exemplars")) b.exemplars.push_back({e.at("question"), e.at("answer")});
    b.context = j.at("context").get<std::string>();
    b.query = j.at("query").get<std::string>();
    b.constraints_digest = j.at("constraints_digest").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadRequest, std::string("malformed prompt bundle: ") + e.what());
  }
  return b;
}

std::vector<std::string> ImagePayload::roles() const {
  std::vector<std::string> out;
  for (const auto& i : images) out.push_back(i.role);
  return out;
}

ImagePayload make_payload(PayloadArm arm, const raster::RenderImage& rgb, const raster::RenderImage* ndvi,
                          const raster::RenderImage* udm) {
  ImagePayload p;
  p.images.push_back({"rgb", rgb});
  if (arm == PayloadArm::RgbNdviUdm) {
    if (!ndvi || !udm) throw Error(ErrorCode::PayloadInvalid, "arm B needs ndvi and udm renders");
    p.images.push_back({"ndvi", *ndvi});
    p.images.push_back({"udm", *udm});
  }
  return p;
}

void validate_payload(const ImagePayload& payload) {
  if (payload.images.empty()) throw Error(ErrorCode::PayloadInvalid, "payload has no images");
  if (payload.images.size() > 3) {
    throw Error(ErrorCode::PayloadInvalid, "payload has " + std::to_string(payload.images.size()) + " images (max 3)",
                {}, static_cast<std::int64_t>(payload.images.size()));
  }
  std::vector<std::string> seen;
  for (const auto& i : payload.images) {
    if (i.image.pixels.empty()) throw Error(ErrorCode::PayloadInvalid, "image '" + i.role + "' is empty", i.role);
    if (std::find(seen.begin(), seen.end(), i.role) != seen.end()) {
      throw Error(ErrorCode::PayloadInvalid, "duplicate image role '" + i.role + "'", i.role);
    }
    seen.push_back(i.role);
  }
}

std::string candidate_to_json(const CaptionCandidate& c) {
  return json{{"caption_id", c.caption_id},
              {"site_id", c.site_id},
              {"text", c.text},
              {"provider", c.provider},
              {"hyperparams",
               {{"temperature", c.hyperparams.temperature},
                {"frequency_penalty", c.hyperparams.frequency_penalty},
                {"max_tokens", c.hyperparams.max_tokens},
                {"banned_phrases", c.hyperparams.banned_phrases}}},
              {"payload_roles", c.payload_roles},
              {"created_at", c.created_at},
              {"retries", c.retries},
              {"regenerated", c.regenerated},
              {"banned_hits", c.banned_hits}}
      .dump(2);
}

CaptionCandidate candidate_from_json(std::string_view text) {
  CaptionCandidate c;
  try {
    const json j = json::parse(text);
    c.caption_id = j.at("caption_id").get<std::string>();
    c.site_id = j.at("site_id").get<std::string>();
    c.text = j.at("text").get<std::string>();
    c.provider = j.value("provider", "");
    if (j.contains("hyperparams")) {
      const auto& h = j["hyperparams"];
      c.hyperparams.temperature = h.value("temperature", c.hyperparams.temperature);
      c.hyperparams.frequency_penalty = h.value("frequency_penalty", c.hyperparams.frequency_penalty);
      c.hyperparams.max_tokens = h.value("max_tokens", c.hyperparams.max_tokens);
      if (h.contains("banned_phrases")) c.hyperparams.banned_phrases = h["banned_phrases"].get<std::vector<std::string>>();
    }
    c.payload_roles = j.value("payload_roles", std::vector<std::string>{});
    c.created_at = j.value("created_at", "");
    c.retries = j.value("retries", 0);
    c.regenerated = j.value("regenerated", false);
    c.banned_hits = j.value("banned_hits", std::vector<std::string>{});
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadRequest, std::string("malformed caption: ") + e.what());
  }
  return c;
}

std::vector<std::string> banned_phrases_in(std::string_view text, const std::vector<std::string>& phrases) {
  const std::string hay = to_lower(text);
  auto is_word = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '\''; };
  std::vector<std::string> hits;
  for (const auto& p : phrases) {
    const std::string needle = to_lower(p);
    if (needle.empty()) continue;
    for (std::size_t pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) {
      const bool left = pos == 0 || !is_word(hay[pos - 1]);
      const std::size_t end = pos + needle.size();
      const bool right = end >= hay.size() || !is_word(hay[end]);
      if (left && right) {
        hits.push_back(p);
        break;
      }
    }
  }
  return hits;
}

llm::ChatRequest make_request(const PromptBundle& bundle, const ImagePayload& payload,
                              const GenerationHyperparams& hp) {
  llm::ChatRequest r;
  r.purpose = "caption";
  std::string sys = bundle.system_prompt;
  if (!bundle.exemplars.empty()) {
    sys += "\n\n[EXAMPLES]";
    for (const auto& e : bundle.exemplars) sys += "\nQuestion: " + e.question + "\nAnswer: " + e.answer + "\n";
  }
  r.messages.push_back({"system", rstrip(sys)});
  std::string user = bundle.context + "\n\n" + bundle.query + "\nImages: ";
  for (std::size_t i = 0; i < payload.images.size(); ++i) user += (i ? ", " : "") + payload.images[i].role;
  r.messages.push_back({"user", user});
  for (const auto& img : payload.images) r.images.push_back({img.role, img.image.to_png()});
  r.temperature = hp.temperature;
  r.frequency_penalty = hp.frequency_penalty;
  r.max_tokens = hp.max_tokens;
  return r;
}

CaptionCandidate generate_caption(llm::ChatProvider& provider, const PromptBundle& bundle,
                                  const ImagePayload& payload, const GenerationHyperparams& hp,
                                  const GenerateOptions& options) {
  validate_payload(payload);
  hp.validate();
  llm::ChatRequest request = make_request(bundle, payload, hp);

  auto call = [&](const llm::ChatRequest& r, int& retries) {
    llm::CallResult res = llm::call_with_retry(provider, r, options.policy);
    retries += res.retries;
    const std::string text = trim(res.text);
    if (text.empty()) throw Error(ErrorCode::EmptyGeneration, provider.name() + " returned no text", options.site_id);
    return text;
  };

  CaptionCandidate c;
  c.site_id = options.site_id;
  c.provider = provider.name();
  c.hyperparams = hp;
  c.payload_roles = payload.roles();
  c.text = call(request, c.retries);

  auto hits = banned_phrases_in(c.text, hp.banned_phrases);
  std::size_t words = word_count(c.text);
  if (!hits.empty() || words > options.word_cap) {
    std::string fix = "Revise the caption.";
    if (words > options.word_cap) fix += " Keep it under " + std::to_string(options.word_cap) + " words.";
    if (!hits.empty()) {
      fix += " Do not use these words or phrases:";
      for (const auto& h : hits) fix += " \"" + h + "\"";
      fix += ".";
    }
    request.messages.push_back({"assistant", c.text});
    request.messages.push_back({"user", fix});
    c.text = call(request, c.retries);
    c.regenerated = true;
    hits = banned_phrases_in(c.text, hp.banned_phrases);
    words = word_count(c.text);
    if (words > options.word_cap) {
      throw Error(ErrorCode::CaptionTooLong,
                  "caption has " + std::to_string(words) + " words after regeneration (cap " +
                      std::to_string(options.word_cap) + ")",
                  options.site_id, static_cast<std::int64_t>(words));
    }
  }
  c.banned_hits = hits;
  c.created_at = utc_timestamp();
  const std::uint64_t h =
      fnv1a64(c.text, fnv1a64(c.provider, fnv1a64(options.site_id, llm::request_digest(request))));
  c.caption_id = (options.site_id.empty() ? std::string("cap") : options.site_id) + "-" + hex64(h).substr(0, 12);
  return c;
}

std::vector<CaptionOutcome> generate_batch(llm::ChatProvider& provider, const std::vector<CaptionJob>& jobs,
                                           std::size_t concurrency) {
  std::vector<std::optional<CaptionOutcome>> slots(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const auto& j = jobs[i];
      try {
        slots[i] = generate_caption(provider, j.bundle, j.payload, j.hyperparams, j.options);
      } catch (const Error& e) {
        slots[i] = e;
      }
    }
  };
  const std::size_t n = std::min(std::max<std::size_t>(1, concurrency), jobs.size());
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < n; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  std::vector<CaptionOutcome> out;
  out.reserve(jobs.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace minescape::caption
