#include "minescape/raster/tiff.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <map>
#include <regex>
#include <sstream>

#include "minescape/error.hpp"
#include "minescape/io.hpp"

namespace minescape::raster {

namespace {

enum Tag : std::uint16_t {
  kImageWidth = 256,
  kImageLength = 257,
  kBitsPerSample = 258,
  kCompression = 259,
  kPhotometric = 262,
  kStripOffsets = 273,
  kSamplesPerPixel = 277,
  kRowsPerStrip = 278,
  kStripByteCounts = 279,
  kPlanarConfig = 284,
  kDateTime = 306,
  kPredictor = 317,
  kTileWidth = 322,
  kTileLength = 323,
  kTileOffsets = 324,
  kTileByteCounts = 325,
  kExtraSamples = 338,
  kSampleFormat = 339,
  kModelPixelScale = 33550,
  kModelTiepoint = 33922,
  kGeoKeyDirectory = 34735,
  kGdalMetadata = 42112,
  kGdalNodata = 42113,
};

enum FieldType : std::uint16_t {
  kByte = 1, kAscii = 2, kShort = 3, kLong = 4, kRational = 5, kSByte = 6, kUndefined = 7,
  kSShort = 8, kSLong = 9, kSRational = 10, kFloat = 11, kDouble = 12,
};

std::size_t type_size(std::uint16_t type) {
  switch (type) {
    case kByte: case kAscii: case kSByte: case kUndefined: return 1;
    case kShort: case kSShort: return 2;
    case kLong: case kSLong: case kFloat: return 4;
    case kRational: case kSRational: case kDouble: return 8;
    default: return 0;
  }
}

[[noreturn]] void fail(const std::string& what) { throw Error(ErrorCode::DecodeError, what); }

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, bool big_endian) : bytes_(bytes), big_(big_endian) {}

  std::uint64_t uint(std::size_t offset, std::size_t width) const {
    if (offset + width > bytes_.size() || offset + width < offset) fail("truncated TIFF");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < width; ++i) {
      const std::uint64_t b = bytes_[offset + i];
      v |= big_ ? (b << (8 * (width - 1 - i))) : (b << (8 * i));
    }
    return v;
  }
  bool big_endian() const { return big_; }
  std::span<const std::uint8_t> bytes() const { return bytes_; }

 private:
  std::span<const std::uint8_t> bytes_;
  bool big_;
};

struct Field {
  std::uint16_t type = 0;
  std::uint32_t count = 0;
  std::size_t data_offset = 0;  // absolute offset of the value bytes
};

double field_value(const Reader& r, const Field& f, std::size_t i) {
  const std::size_t sz = type_size(f.type);
  const std::size_t off = f.data_offset + i * sz;
  switch (f.type) {
    case kByte: case kUndefined: case kShort: case kLong:
      return static_cast<double>(r.uint(off, sz));
    case kSByte: return static_cast<std::int8_t>(r.uint(off, 1));
    case kSShort: return static_cast<std::int16_t>(r.uint(off, 2));
    case kSLong: return static_cast<std::int32_t>(r.uint(off, 4));
    case kRational: return static_cast<double>(r.uint(off, 4)) / static_cast<double>(r.uint(off + 4, 4));
    case kSRational:
      return static_cast<double>(static_cast<std::int32_t>(r.uint(off, 4))) /
             static_cast<double>(static_cast<std::int32_t>(r.uint(off + 4, 4)));
    case kFloat: return std::bit_cast<float>(static_cast<std::uint32_t>(r.uint(off, 4)));
    case kDouble: return std::bit_cast<double>(r.uint(off, 8));
    default: fail("unsupported TIFF field type " + std::to_string(f.type));
  }
}

std::vector<double> field_values(const Reader& r, const Field& f) {
  std::vector<double> out(f.count);
  for (std::uint32_t i = 0; i < f.count; ++i) out[i] = field_value(r, f, i);
  return out;
}

std::string field_string(const Reader& r, const Field& f) {
  const auto bytes = r.bytes();
  if (f.data_offset + f.count > bytes.size()) fail("truncated TIFF string");
  std::string s(reinterpret_cast<const char*>(bytes.data() + f.data_offset), f.count);
  while (!s.empty() && s.back() == '\0') s.pop_back();
  return s;
}

std::vector<std::uint8_t> inflate_chunk(std::span<const std::uint8_t> in, std::size_t expected) {
  std::vector<std::uint8_t> out(expected);
  z_stream zs{};
  if (inflateInit(&zs) != Z_OK) fail("zlib init failed");
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  const std::size_t produced = zs.total_out;
  inflateEnd(&zs);
  if (rc != Z_STREAM_END && rc != Z_BUF_ERROR && rc != Z_OK) fail("corrupt deflate stream");
  if (produced != expected) fail("deflate chunk decoded to unexpected size");
  return out;
}

SampleType sample_type_for(std::uint32_t bits, std::uint32_t format) {
  // format: 1 = unsigned, 2 = signed, 3 = IEEE float
  if (format == 1 && bits == 8) return SampleType::UInt8;
  if (format == 1 && bits == 16) return SampleType::UInt16;
  if (format == 2 && bits == 16) return SampleType::Int16;
  if (format == 1 && bits == 32) return SampleType::UInt32;
  if (format == 2 && bits == 32) return SampleType::Int32;
  if (format == 3 && bits == 32) return SampleType::Float32;
  if (format == 3 && bits == 64) return SampleType::Float64;
  fail("unsupported sample layout: " + std::to_string(bits) + " bits, format " + std::to_string(format));
}

double decode_sample(std::uint64_t raw, SampleType t) {
  switch (t) {
    case SampleType::UInt8: case SampleType::UInt16: case SampleType::UInt32:
      return static_cast<double>(raw);
    case SampleType::Int16: return static_cast<std::int16_t>(raw);
    case SampleType::Int32: return static_cast<std::int32_t>(raw);
    case SampleType::Float32: return std::bit_cast<float>(static_cast<std::uint32_t>(raw));
    case SampleType::Float64: return std::bit_cast<double>(raw);
  }
  return 0.0;
}

std::vector<std::string> parse_band_names(const std::string& xml, std::size_t bands) {
  std::vector<std::string> names;
  static const std::regex item(R"(<Item([^>]*)>([^<]*)</Item>)");
  static const std::regex name_attr(R"re(name\s*=\s*"([^"]*)")re");
  static const std::regex sample_attr(R"re(sample\s*=\s*"(\d+)")re");
  std::map<std::size_t, std::string> by_sample;
  for (auto it = std::sregex_iterator(xml.begin(), xml.end(), item); it != std::sregex_iterator(); ++it) {
    const std::string attrs = (*it)[1].str();
    std::smatch m;
    if (!std::regex_search(attrs, m, name_attr) || m[1].str() != "DESCRIPTION") continue;
    if (!std::regex_search(attrs, m, sample_attr)) continue;
    by_sample[std::stoul(m[1].str())] = (*it)[2].str();
  }
  if (by_sample.empty()) return names;
  names.resize(bands);
  for (const auto& [idx, name] : by_sample) {
    if (idx < bands) names[idx] = name;
  }
  return names;
}

}  // namespace

bool is_integer(SampleType t) { return t != SampleType::Float32 && t != SampleType::Float64; }

TiffImage read_tiff(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) fail("file too small for TIFF");
  bool big = false;
  if (bytes[0] == 'I' && bytes[1] == 'I') big = false;
  else if (bytes[0] == 'M' && bytes[1] == 'M') big = true;
  else fail("not a TIFF file");
  const Reader r(bytes, big);
  const auto magic = r.uint(2, 2);
  if (magic == 43) fail("BigTIFF is not supported");
  if (magic != 42) fail("bad TIFF magic");
  const std::size_t ifd = r.uint(4, 4);
  const std::size_t n_entries = r.uint(ifd, 2);

  std::map<std::uint16_t, Field> fields;
  for (std::size_t i = 0; i < n_entries; ++i) {
    const std::size_t e = ifd + 2 + i * 12;
    Field f;
    const auto tag = static_cast<std::uint16_t>(r.uint(e, 2));
    f.type = static_cast<std::uint16_t>(r.uint(e + 2, 2));
    f.count = static_cast<std::uint32_t>(r.uint(e + 4, 4));
    const std::size_t sz = type_size(f.type);
    if (sz == 0) continue;  // unknown field types are skipped
    f.data_offset = (sz * f.count <= 4) ? e + 8 : static_cast<std::size_t>(r.uint(e + 8, 4));
    fields[tag] = f;
  }
  auto get = [&](std::uint16_t tag) -> const Field* {
    auto it = fields.find(tag);
    return it == fields.end() ? nullptr : &it->second;
  };
  auto scalar = [&](std::uint16_t tag, double def) {
    const Field* f = get(tag);
    return f ? field_value(r, *f, 0) : def;
  };

  TiffImage img;
  if (!get(kImageWidth) || !get(kImageLength)) fail("missing image dimensions");
  img.width = static_cast<std::size_t>(scalar(kImageWidth, 0));
  img.height = static_cast<std::size_t>(scalar(kImageLength, 0));
  const auto spp = static_cast<std::size_t>(scalar(kSamplesPerPixel, 1));
  const auto bits = static_cast<std::uint32_t>(scalar(kBitsPerSample, 1));
  const auto format = static_cast<std::uint32_t>(scalar(kSampleFormat, 1));
  const auto compression = static_cast<int>(scalar(kCompression, 1));
  const auto planar = static_cast<int>(scalar(kPlanarConfig, 1));
  const auto predictor = static_cast<int>(scalar(kPredictor, 1));
  if (img.width == 0 || img.height == 0 || spp == 0) fail("empty image");
  if (const Field* f = get(kBitsPerSample)) {
    for (double b : field_values(r, *f)) {
      if (static_cast<std::uint32_t>(b) != bits) fail("mixed bits per sample");
    }
  }
  img.sample_type = sample_type_for(bits, format);
  if (compression != 1 && compression != 8 && compression != 32946) {
    fail("unsupported compression " + std::to_string(compression));
  }
  if (predictor != 1 && !(predictor == 2 && is_integer(img.sample_type))) {
    fail("unsupported predictor " + std::to_string(predictor));
  }
  if (planar != 1 && planar != 2) fail("bad planar configuration");

  const bool tiled = get(kTileOffsets) != nullptr;
  std::size_t chunk_w, chunk_h, across, down;
  std::vector<double> offsets, counts;
  if (tiled) {
    chunk_w = static_cast<std::size_t>(scalar(kTileWidth, 0));
    chunk_h = static_cast<std::size_t>(scalar(kTileLength, 0));
    if (chunk_w == 0 || chunk_h == 0 || !get(kTileByteCounts)) fail("bad tile layout");
    across = (img.width + chunk_w - 1) / chunk_w;
    down = (img.height + chunk_h - 1) / chunk_h;
    offsets = field_values(r, *get(kTileOffsets));
    counts = field_values(r, *get(kTileByteCounts));
  } else {
    if (!get(kStripOffsets) || !get(kStripByteCounts)) fail("missing strip layout");
    chunk_w = img.width;
    chunk_h = std::min<std::size_t>(static_cast<std::size_t>(scalar(kRowsPerStrip, 4294967295.0)), img.height);
    if (chunk_h == 0) fail("bad rows per strip");
    across = 1;
    down = (img.height + chunk_h - 1) / chunk_h;
    offsets = field_values(r, *get(kStripOffsets));
    counts = field_values(r, *get(kStripByteCounts));
  }
  const std::size_t per_plane = across * down;
  const std::size_t planes = planar == 2 ? spp : 1;
  const std::size_t chunk_spp = planar == 2 ? 1 : spp;
  if (offsets.size() < per_plane * planes || counts.size() < offsets.size()) fail("chunk table too short");

  const std::size_t bps = bits / 8;
  img.bands.assign(spp, Grid<double>(img.height, img.width));
  std::vector<std::uint64_t> raw;
  for (std::size_t k = 0; k < per_plane * planes; ++k) {
    const std::size_t plane = k / per_plane;
    const std::size_t j = k % per_plane;
    const std::size_t row0 = (j / across) * chunk_h;
    const std::size_t col0 = (j % across) * chunk_w;
    const std::size_t rows_here = tiled ? chunk_h : std::min(chunk_h, img.height - row0);
    const std::size_t expected = rows_here * chunk_w * chunk_spp * bps;
    const auto off = static_cast<std::size_t>(offsets[k]);
    const auto len = static_cast<std::size_t>(counts[k]);
    if (off + len > bytes.size()) fail("chunk extends past end of file");
    std::vector<std::uint8_t> data;
    if (compression == 1) {
      if (len < expected) fail("uncompressed chunk too short");
      data.assign(bytes.begin() + off, bytes.begin() + off + expected);
    } else {
      data = inflate_chunk(bytes.subspan(off, len), expected);
    }
    const Reader cr(data, big);
    const std::size_t n = rows_here * chunk_w * chunk_spp;
    raw.resize(n);
    for (std::size_t i = 0; i < n; ++i) raw[i] = cr.uint(i * bps, bps);
    if (predictor == 2) {
      const std::uint64_t mask = bits == 64 ? ~0ULL : ((1ULL << bits) - 1);
      for (std::size_t rr = 0; rr < rows_here; ++rr) {
        std::uint64_t* row = raw.data() + rr * chunk_w * chunk_spp;
        for (std::size_t i = chunk_spp; i < chunk_w * chunk_spp; ++i) {
          row[i] = (row[i] + row[i - chunk_spp]) & mask;
        }
      }
    }
    for (std::size_t rr = 0; rr < rows_here; ++rr) {
      const std::size_t y = row0 + rr;
      if (y >= img.height) break;
      for (std::size_t cc = 0; cc < chunk_w; ++cc) {
        const std::size_t x = col0 + cc;
        if (x >= img.width) break;
        for (std::size_t s = 0; s < chunk_spp; ++s) {
          const std::size_t band = planar == 2 ? plane : s;
          img.bands[band](y, x) = decode_sample(raw[(rr * chunk_w + cc) * chunk_spp + s], img.sample_type);
        }
      }
    }
  }

  if (const Field* f = get(kModelPixelScale); f && f->count >= 3) {
    const auto v = field_values(r, *f);
    img.pixel_scale = std::array<double, 3>{v[0], v[1], v[2]};
  }
  if (const Field* f = get(kModelTiepoint); f && f->count >= 6) {
    const auto v = field_values(r, *f);
    img.tiepoint = std::array<double, 6>{v[0], v[1], v[2], v[3], v[4], v[5]};
  }
  if (const Field* f = get(kGeoKeyDirectory); f && f->count >= 4) {
    const auto v = field_values(r, *f);
    const auto keys = static_cast<std::size_t>(v[3]);
    for (std::size_t i = 0; i < keys && 4 + i * 4 + 3 < v.size(); ++i) {
      const auto id = static_cast<int>(v[4 + i * 4]);
      const auto location = static_cast<int>(v[4 + i * 4 + 1]);
      if ((id == 2048 || id == 3072) && location == 0) img.epsg = static_cast<int>(v[4 + i * 4 + 3]);
    }
  }
  if (const Field* f = get(kGdalNodata)) {
    const std::string s = field_string(r, *f);
    try {
      img.nodata = std::stod(s);
    } catch (const std::exception&) {
      fail("bad GDAL_NODATA value '" + s + "'");
    }
  }
  if (const Field* f = get(kGdalMetadata)) img.band_names = parse_band_names(field_string(r, *f), spp);
  if (const Field* f = get(kDateTime)) img.datetime = field_string(r, *f);
  return img;
}

TiffImage read_tiff(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_binary_file(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::DecodeError, e.what(), path.string());
  }
  return read_tiff(bytes);
}

namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { buf.push_back(v); }
  void u16(std::uint16_t v) { for (int i = 0; i < 2; ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i))); }
  void u32(std::uint32_t v) { for (int i = 0; i < 4; ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i))); }
  void u64(std::uint64_t v) { for (int i = 0; i < 8; ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i))); }
  std::vector<std::uint8_t> buf;
};

struct Entry {
  std::uint16_t tag;
  std::uint16_t type;
  std::uint32_t count;
  std::vector<std::uint8_t> payload;
};

Entry shorts(std::uint16_t tag, const std::vector<std::uint16_t>& v) {
  Writer w;
  for (auto x : v) w.u16(x);
  return {tag, kShort, static_cast<std::uint32_t>(v.size()), std::move(w.buf)};
}
Entry longs(std::uint16_t tag, const std::vector<std::uint32_t>& v) {
  Writer w;
  for (auto x : v) w.u32(x);
  return {tag, kLong, static_cast<std::uint32_t>(v.size()), std::move(w.buf)};
}
Entry doubles(std::uint16_t tag, const std::vector<double>& v) {
  Writer w;
  for (auto x : v) w.u64(std::bit_cast<std::uint64_t>(x));
  return {tag, kDouble, static_cast<std::uint32_t>(v.size()), std::move(w.buf)};
}
Entry ascii(std::uint16_t tag, const std::string& s) {
  std::vector<std::uint8_t> b(s.begin(), s.end());
  b.push_back(0);
  return {tag, kAscii, static_cast<std::uint32_t>(b.size()), std::move(b)};
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::vector<std::uint8_t> encode_tiff(const TiffImage& image) {
  if (image.sample_type != SampleType::UInt16 && image.sample_type != SampleType::Float32) {
    throw Error(ErrorCode::DecodeError, "writer supports UInt16 and Float32 samples only");
  }
  if (image.bands.empty()) throw Error(ErrorCode::EmptyScene, "no bands to write");
  const std::size_t w = image.width, h = image.height, spp = image.bands.size();
  for (const auto& b : image.bands) {
    if (b.rows() != h || b.cols() != w) throw Error(ErrorCode::ShapeError, "band shape differs from image");
  }
  const bool is_float = image.sample_type == SampleType::Float32;
  const std::uint16_t bits = is_float ? 32 : 16;
  const std::size_t plane_bytes = w * h * (bits / 8);

  std::vector<Entry> entries;
  entries.push_back(longs(kImageWidth, {static_cast<std::uint32_t>(w)}));
  entries.push_back(longs(kImageLength, {static_cast<std::uint32_t>(h)}));
  entries.push_back(shorts(kBitsPerSample, std::vector<std::uint16_t>(spp, bits)));
  entries.push_back(shorts(kCompression, {1}));
  entries.push_back(shorts(kPhotometric, {1}));
  entries.push_back(longs(kStripOffsets, std::vector<std::uint32_t>(spp, 0)));  // patched below
  entries.push_back(shorts(kSamplesPerPixel, {static_cast<std::uint16_t>(spp)}));
  entries.push_back(longs(kRowsPerStrip, {static_cast<std::uint32_t>(h)}));
  entries.push_back(longs(kStripByteCounts, std::vector<std::uint32_t>(spp, static_cast<std::uint32_t>(plane_bytes))));
  entries.push_back(shorts(kPlanarConfig, {2}));
  if (image.datetime) entries.push_back(ascii(kDateTime, *image.datetime));
  if (spp > 1) entries.push_back(shorts(kExtraSamples, std::vector<std::uint16_t>(spp - 1, 0)));
  entries.push_back(shorts(kSampleFormat, std::vector<std::uint16_t>(spp, is_float ? 3 : 1)));
  if (image.pixel_scale) {
    entries.push_back(doubles(kModelPixelScale, {(*image.pixel_scale)[0], (*image.pixel_scale)[1], (*image.pixel_scale)[2]}));
  }
  if (image.tiepoint) {
    const auto& t = *image.tiepoint;
    entries.push_back(doubles(kModelTiepoint, {t[0], t[1], t[2], t[3], t[4], t[5]}));
  }
  if (image.epsg) {
    // GTModelType=2 (geographic) or 1 (projected), RasterType=PixelIsArea, CRS code.
    const bool geographic = *image.epsg == 4326;
    entries.push_back(shorts(kGeoKeyDirectory,
                             {1, 1, 0, 3, 1024, 0, 1, static_cast<std::uint16_t>(geographic ? 2 : 1), 1025, 0, 1, 1,
                              static_cast<std::uint16_t>(geographic ? 2048 : 3072), 0, 1,
                              static_cast<std::uint16_t>(*image.epsg)}));
  }
  if (!image.band_names.empty()) {
    std::ostringstream xml;
    xml << "<GDALMetadata>";
    for (std::size_t i = 0; i < image.band_names.size(); ++i) {
      xml << "<Item name=\"DESCRIPTION\" sample=\"" << i << "\" role=\"description\">"
          << xml_escape(image.band_names[i]) << "</Item>";
    }
    xml << "</GDALMetadata>";
    entries.push_back(ascii(kGdalMetadata, xml.str()));
  }
  if (image.nodata) {
    std::ostringstream s;
    s.precision(17);
    s << *image.nodata;
    entries.push_back(ascii(kGdalNodata, s.str()));
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.tag < b.tag; });

  // Layout: header | IFD | out-of-line values | plane data.
  const std::size_t ifd_off = 8;
  const std::size_t ifd_size = 2 + entries.size() * 12 + 4;
  std::size_t cursor = ifd_off + ifd_size;
  std::vector<std::size_t> value_offsets(entries.size(), 0);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].payload.size() > 4) {
      cursor += cursor & 1;
      value_offsets[i] = cursor;
      cursor += entries[i].payload.size();
    }
  }
  cursor += cursor & 1;
  const std::size_t data_off = cursor;
  for (auto& e : entries) {
    if (e.tag == kStripOffsets) {
      std::vector<std::uint32_t> offs(spp);
      for (std::size_t b = 0; b < spp; ++b) offs[b] = static_cast<std::uint32_t>(data_off + b * plane_bytes);
      e = longs(kStripOffsets, offs);
    }
  }

  Writer out;
  out.u8('I');
  out.u8('I');
  out.u16(42);
  out.u32(static_cast<std::uint32_t>(ifd_off));
  out.u16(static_cast<std::uint16_t>(entries.size()));
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    out.u16(e.tag);
    out.u16(e.type);
    out.u32(e.count);
    if (e.payload.size() <= 4) {
      for (std::size_t k = 0; k < 4; ++k) out.u8(k < e.payload.size() ? e.payload[k] : 0);
    } else {
      out.u32(static_cast<std::uint32_t>(value_offsets[i]));
    }
  }
  out.u32(0);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].payload.size() > 4) {
      out.buf.resize(value_offsets[i], 0);
      out.buf.insert(out.buf.end(), entries[i].payload.begin(), entries[i].payload.end());
    }
  }
  out.buf.resize(data_off, 0);
  out.buf.reserve(data_off + spp * plane_bytes);
  for (const auto& band : image.bands) {
    for (double v : band) {
      if (is_float) {
        out.u32(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      } else {
        const double c = std::clamp(v, 0.0, 65535.0);
        out.u16(static_cast<std::uint16_t>(c + 0.5));
      }
    }
  }
  return std::move(out.buf);
}

void write_tiff(const std::filesystem::path& path, const TiffImage& image) {
  write_file_atomic(path, encode_tiff(image));
}

}  // namespace minescape::raster
