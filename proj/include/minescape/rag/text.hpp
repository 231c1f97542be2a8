#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace minescape::rag {

struct Token {
  std::string text;
  std::size_t begin = 0;  // byte offsets into the source text
  std::size_t end = 0;
};

/// Splits on whitespace, then detaches leading and trailing ASCII
/// punctuation as one-character tokens ("open-pit mine." gives
/// ["open-pit", "mine", "."]). Concatenating the tokens reproduces the text
/// with whitespace removed.
std::vector<Token> tokenize(std::string_view text);
std::vector<std::string> token_strings(std::string_view text);

/// Lowercase word tokens with punctuation and English stop words removed.
std::vector<std::string> content_words(std::string_view text);
bool is_stop_word(std::string_view lower_word);

inline constexpr std::size_t kDefaultChunkSize = 150;
inline constexpr std::size_t kDefaultOverlap = 30;

struct Chunk {
  std::string chunk_id;
  std::string doc_id;
  std::string text;
  std::size_t token_begin = 0;  // span in the source document's tokens
  std::size_t token_end = 0;
  /// kind ("caption" | "document"), mine_name, country, lat, lon, site_id,
  /// source_file, parent_section_id, page.
  nlohmann::json metadata = nlohmann::json::object();

  bool operator==(const Chunk&) const = default;
};

nlohmann::json chunk_to_json(const Chunk& c);
Chunk chunk_from_json(const nlohmann::json& j);

/// Splits a document into windows of at most `chunk_size` tokens. Each
/// window ends at the coarsest boundary (blank line, newline, sentence end,
/// any token) in the latter part of the window, preferring the furthest; the
/// next window starts `overlap` tokens before the previous end. The final
/// window takes whatever remains. Chunk ids are "<doc_id>#NNNN". Throws
/// ConfigError unless 0 <= overlap < chunk_size.
std::vector<Chunk> chunk_text(std::string_view text, const std::string& doc_id,
                              std::size_t chunk_size = kDefaultChunkSize, std::size_t overlap = kDefaultOverlap,
                              const nlohmann::json& metadata = nlohmann::json::object());

/// Same windows over a pre-computed token list; offsets index into `text`.
std::vector<Chunk> chunk_tokens(std::string_view text, const std::vector<Token>& tokens, const std::string& doc_id,
                                std::size_t chunk_size, std::size_t overlap,
                                const nlohmann::json& metadata = nlohmann::json::object());

/// "[mine | country | lat,lon] " for caption chunks (two decimals), or
/// "[source_file] " for chunks without a mine name. Throws MetadataMissing
/// when a caption chunk lacks a key or a document chunk lacks source_file.
std::string metadata_prefix(const Chunk& chunk);

/// Prepends metadata_prefix unless the text already starts with it. The
/// token span is left untouched.
Chunk prepend_metadata(const Chunk& chunk);

}  // namespace minescape::rag
