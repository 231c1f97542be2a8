#include <regex>

#include "minescape/judge/judge.hpp"
#include "minescape/util.hpp"

namespace minescape::judge {

using nlohmann::json;

namespace {

// Index of the '}' matching the '{' at `open`, honouring single- and
// double-quoted strings with backslash escapes; npos when unbalanced.
std::size_t match_brace(std::string_view s, std::size_t open) {
  int depth = 0;
  char quote = 0;
  for (std::size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (quote) {
      if (c == '\\') ++i;
      else if (c == quote) quote = 0;
      continue;
    }
    if (c == '"' || c == '\'') {
      // An apostrophe inside a bare word is not a string delimiter.
      if (c == '\'' && i > 0 && std::isalnum(static_cast<unsigned char>(s[i - 1]))) continue;
      quote = c;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i;
    }
  }
  return std::string_view::npos;
}

std::string strip_trailing_commas(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  bool in_str = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (in_str) {
      out += c;
      if (c == '\\' && i + 1 < s.size()) out += s[++i];
      else if (c == '"') in_str = false;
      continue;
    }
    if (c == '"') {
      in_str = true;
    } else if (c == ',') {
      std::size_t j = i + 1;
      while (j < s.size() && std::isspace(static_cast<unsigned char>(s[j]))) ++j;
      if (j < s.size() && (s[j] == '}' || s[j] == ']')) continue;
    }
    out += c;
  }
  return out;
}

std::string normalize_quotes(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '"') {
      out += c;
      for (++i; i < s.size(); ++i) {
        out += s[i];
        if (s[i] == '\\' && i + 1 < s.size()) out += s[++i];
        else if (s[i] == '"') break;
      }
      continue;
    }
    if (c == '\'') {
      out += '"';
      for (++i; i < s.size(); ++i) {
        if (s[i] == '\\' && i + 1 < s.size()) {
          if (s[i + 1] == '\'') out += '\'';
          else {
            out += s[i];
            out += s[i + 1];
          }
          ++i;
        } else if (s[i] == '\'') {
          break;
        } else if (s[i] == '"') {
          out += "\\\"";
        } else {
          out += s[i];
        }
      }
      out += '"';
      continue;
    }
    out += c;
  }
  return out;
}

}  // namespace

Repaired repair_json(std::string_view input) {
  Repaired r;
  std::string text(input);

  static const std::regex fence(R"(```[A-Za-z0-9_-]*[ \t]*\r?\n?([\s\S]*?)```)");
  std::smatch m;
  if (std::regex_search(text, m, fence)) {
    text = m[1].str();
    r.repairs.emplace_back("fence_strip");
  }

  const std::size_t open = text.find('{');
  if (open == std::string::npos) throw Error(ErrorCode::NoObjectFound, "no JSON object in judge output");
  const std::size_t close = match_brace(text, open);
  if (close == std::string_view::npos) throw Error(ErrorCode::NoObjectFound, "unbalanced JSON object in judge output");
  const bool dropped = !trim(std::string_view(text).substr(0, open)).empty() ||
                       !trim(std::string_view(text).substr(close + 1)).empty();
  text = text.substr(open, close - open + 1);
  if (dropped) r.repairs.emplace_back("object_extract");

  // Only touch text that does not already parse, so valid input is returned
  // unchanged with no repairs recorded.
  if (!json::accept(text)) {
    std::string fixed = strip_trailing_commas(text);
    if (fixed != text) {
      text = std::move(fixed);
      r.repairs.emplace_back("trailing_comma");
    }
  }
  if (!json::accept(text)) {
    std::string fixed = normalize_quotes(text);
    if (fixed != text) {
      text = strip_trailing_commas(fixed);
      r.repairs.emplace_back("quote_normalize");
    }
  }
  try {
    r.value = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseFailed, std::string("judge output is not valid JSON after repair: ") + e.what());
  }
  return r;
}

}  // namespace minescape::judge
