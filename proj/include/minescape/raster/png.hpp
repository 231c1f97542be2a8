#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "minescape/grid.hpp"

namespace minescape::raster {

using Rgb = std::array<std::uint8_t, 3>;

std::vector<std::uint8_t> encode_png_rgb(const Grid<Rgb>& pixels);

/// Paletted PNG: `indices` address `palette` entries.
std::vector<std::uint8_t> encode_png_indexed(const Grid<std::uint8_t>& indices, std::span<const Rgb> palette);

/// Decodes any PNG to 8-bit RGB.
Grid<Rgb> decode_png_rgb(std::span<const std::uint8_t> bytes);

}  // namespace minescape::raster
