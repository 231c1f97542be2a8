#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace minescape {

namespace fs = std::filesystem;

std::string read_text_file(const fs::path& path);
std::vector<std::uint8_t> read_binary_file(const fs::path& path);

/// Writes `bytes` to `path` via a sibling temporary file followed by
/// rename(2), so readers observe either the old or the new content.
/// Temporaries end in ".tmp" and are ignored by every loader.
void write_file_atomic(const fs::path& path, std::string_view bytes);
void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> bytes);

/// Appends one line (a trailing '\n' is added) and flushes.
void append_line(const fs::path& path, std::string_view line);

/// Points at which an installed write hook is invoked. Used by the
/// fault-injection harness to kill the process between or inside writes.
enum class WritePhase { TempWritten, Committed };
using WriteHook = std::function<void(const fs::path&, WritePhase)>;

/// Installs a process-wide hook; pass an empty function to clear.
void set_write_hook(WriteHook hook);

}  // namespace minescape
