#include "minescape/raster/png.hpp"

#include <png.h>

#include <cstring>

#include "minescape/error.hpp"

namespace minescape::raster {

namespace {

std::vector<std::uint8_t> write_png(png_image& image, const void* buffer, std::ptrdiff_t stride,
                                    const void* colormap) {
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, buffer, static_cast<png_int_32>(stride), colormap)) {
    throw Error(ErrorCode::IoError, std::string("png sizing failed: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, buffer, static_cast<png_int_32>(stride), colormap)) {
    throw Error(ErrorCode::IoError, std::string("png encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

}  // namespace

std::vector<std::uint8_t> encode_png_rgb(const Grid<Rgb>& pixels) {
  if (pixels.empty()) throw Error(ErrorCode::EmptyScene, "cannot encode empty image");
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(pixels.cols());
  image.height = static_cast<png_uint_32>(pixels.rows());
  image.format = PNG_FORMAT_RGB;
  static_assert(sizeof(Rgb) == 3);
  return write_png(image, pixels.values().data(), static_cast<std::ptrdiff_t>(pixels.cols() * 3), nullptr);
}

std::vector<std::uint8_t> encode_png_indexed(const Grid<std::uint8_t>& indices, std::span<const Rgb> palette) {
  if (indices.empty()) throw Error(ErrorCode::EmptyScene, "cannot encode empty image");
  if (palette.empty() || palette.size() > 256) throw Error(ErrorCode::BadRequest, "palette must have 1..256 entries");
  for (auto v : indices) {
    if (v >= palette.size()) throw Error(ErrorCode::BadRequest, "label index outside palette");
  }
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(indices.cols());
  image.height = static_cast<png_uint_32>(indices.rows());
  image.format = PNG_FORMAT_RGB_COLORMAP;
  image.colormap_entries = static_cast<png_uint_32>(palette.size());
  return write_png(image, indices.values().data(), static_cast<std::ptrdiff_t>(indices.cols()), palette.data());
}

Grid<Rgb> decode_png_rgb(std::span<const std::uint8_t> bytes) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw Error(ErrorCode::DecodeError, std::string("png header: ") + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  Grid<Rgb> out(image.height, image.width);
  if (!png_image_finish_read(&image, nullptr, out.values().data(), static_cast<png_int_32>(image.width * 3), nullptr)) {
    png_image_free(&image);
    throw Error(ErrorCode::DecodeError, std::string("png decode: ") + image.message);
  }
  return out;
}

}  // namespace minescape::raster
