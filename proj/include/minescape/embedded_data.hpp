#pragma once

#include <optional>
#include <string_view>

namespace minescape {

/// Contents of a file under data/ compiled into the library, keyed by its
/// path relative to data/ (e.g. "palettes/ndvi.json").
std::optional<std::string_view> embedded_file(std::string_view name);

}  // namespace minescape
