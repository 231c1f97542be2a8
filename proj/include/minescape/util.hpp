#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace minescape {

/// 64-bit FNV-1a. Stable across platforms; used for content addressing and
/// for the deterministic test doubles.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);

/// splitmix64 step; returns the next value and advances `state`.
std::uint64_t splitmix64(std::uint64_t& state);

std::string hex64(std::uint64_t v);

/// Whitespace-delimited word count.
std::size_t word_count(std::string_view text);

std::vector<std::string> split_words(std::string_view text);
std::string trim(std::string_view text);
std::string to_lower(std::string_view text);
bool contains_icase(std::string_view haystack, std::string_view needle);

std::string base64_encode(std::span<const std::uint8_t> bytes);

}  // namespace minescape
