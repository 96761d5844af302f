#include "satirforge/image_io.hpp"

#include <png.h>

#include <array>
#include <cctype>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <system_error>
#include <thread>

#include "satirforge/error.hpp"

namespace satirforge {

namespace fs = std::filesystem;

namespace {

// libpng reports errors by longjmp back into the setjmp frame of the caller;
// the message is parked in the error pointer first.
struct PngError {
  std::string message;
};

[[noreturn]] void on_png_error(png_structp png, png_const_charp msg) {
  static_cast<PngError*>(png_get_error_ptr(png))->message = msg;
  png_longjmp(png, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

void append_bytes(png_structp png, png_bytep data, png_size_t n) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + n);
}

void flush_noop(png_structp) {}

struct ReadCursor {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
};

void read_bytes(png_structp png, png_bytep data, png_size_t n) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->pos + n > cur->bytes.size()) {
    png_error(png, "unexpected end of PNG data");
  }
  std::memcpy(data, cur->bytes.data() + cur->pos, n);
  cur->pos += n;
}

std::vector<std::uint8_t> slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::vector<std::uint8_t> encode_label_png(const LabelMap& lm) {
  std::vector<std::uint8_t> out;
  out.reserve(lm.size() / 4 + 1024);
  PngError err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err,
                                            on_png_error, on_png_warning);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG encode failed: " + err.message);
  }
  {
    png_set_write_fn(png, &out, append_bytes, flush_noop);
    png_set_IHDR(png, info, lm.width(), lm.height(), 8, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 6);
    png_set_filter(png, PNG_FILTER_TYPE_BASE, PNG_FILTER_NONE);
    png_write_info(png, info);
    for (std::uint32_t r = 0; r < lm.height(); ++r) {
      png_write_row(png, const_cast<png_bytep>(&lm.at(r, 0)));
    }
    png_write_end(png, nullptr);
  }
  png_destroy_write_struct(&png, &info);
  return out;
}

void write_file_atomic(const fs::path& path,
                       std::span<const std::uint8_t> bytes) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) {
    throw IoError("cannot create directory " + path.parent_path().string() +
                  ": " + ec.message());
  }
  // Unique per writer thread so concurrent writers never share a temp file.
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(
                      std::this_thread::get_id()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename into " + path.string());
  }
}

void write_label_png(const LabelMap& lm, const fs::path& path) {
  write_file_atomic(path, encode_label_png(lm));
}

LabelMap decode_label_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw IoError("not a PNG file");
  }
  PngError err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err,
                                           on_png_error, on_png_warning);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  ReadCursor cursor{bytes, 0};
  LabelMap lm;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError(err.message);
  }
  png_set_read_fn(png, &cursor, read_bytes);
  png_read_info(png, info);
  const auto width = png_get_image_width(png, info);
  const auto height = png_get_image_height(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (depth != 8 ||
      (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_PALETTE)) {
    png_error(png, "label PNG must be 8-bit grayscale or palette");
  }
  if (width > kMaxDimension || height > kMaxDimension) {
    png_error(png, "PNG dimensions out of range");
  }
  if (png_get_interlace_type(png, info) != PNG_INTERLACE_NONE) {
    png_set_interlace_handling(png);
  }
  png_read_update_info(png, info);
  lm = LabelMap(height, width);
  rows.resize(height);
  for (std::uint32_t r = 0; r < height; ++r) rows[r] = &lm.at(r, 0);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return lm;
}

LabelMap read_label_png(const fs::path& path) {
  const auto bytes = slurp(path);
  try {
    return decode_label_png(bytes);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

namespace {

std::uint32_t be16(const std::uint8_t* p) { return (p[0] << 8) | p[1]; }
std::uint32_t be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (p[1] << 16) | (p[2] << 8) | p[3];
}
std::uint32_t le16(const std::uint8_t* p) { return p[0] | (p[1] << 8); }
std::uint32_t le32(const std::uint8_t* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (std::uint32_t{p[3]} << 24);
}

std::optional<ImageSize> probe_jpeg(const std::vector<std::uint8_t>& b) {
  std::size_t p = 2;
  while (p + 4 <= b.size()) {
    if (b[p] != 0xFF) return std::nullopt;
    const std::uint8_t marker = b[p + 1];
    if (marker == 0xFF) {
      ++p;
      continue;
    }
    if (marker == 0xD8 || marker == 0x01 || (marker >= 0xD0 && marker <= 0xD7)) {
      p += 2;
      continue;
    }
    const std::uint32_t len = be16(&b[p + 2]);
    const bool sof = marker >= 0xC0 && marker <= 0xCF && marker != 0xC4 &&
                     marker != 0xC8 && marker != 0xCC;
    if (sof) {
      if (p + 9 > b.size()) return std::nullopt;
      return ImageSize{be16(&b[p + 7]), be16(&b[p + 5])};
    }
    p += 2 + len;
  }
  return std::nullopt;
}

std::optional<ImageSize> probe_tiff(const std::vector<std::uint8_t>& b) {
  const bool le = b[0] == 'I';
  auto u16 = [&](std::size_t o) { return le ? le16(&b[o]) : be16(&b[o]); };
  auto u32 = [&](std::size_t o) { return le ? le32(&b[o]) : be32(&b[o]); };
  const std::size_t ifd = u32(4);
  if (ifd + 2 > b.size()) return std::nullopt;
  const std::uint32_t n = u16(ifd);
  ImageSize size;
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::size_t e = ifd + 2 + 12 * i;
    if (e + 12 > b.size()) return std::nullopt;
    const std::uint32_t tag = u16(e);
    const std::uint32_t type = u16(e + 2);
    const std::uint32_t value = type == 3 ? u16(e + 8) : u32(e + 8);
    if (tag == 256) size.width = value;
    if (tag == 257) size.height = value;
  }
  if (size.width == 0 || size.height == 0) return std::nullopt;
  return size;
}

std::optional<ImageSize> probe_pnm(const std::vector<std::uint8_t>& b) {
  std::array<std::uint32_t, 2> dims{};
  std::size_t p = 2;
  for (auto& d : dims) {
    while (p < b.size()) {
      if (b[p] == '#') {
        while (p < b.size() && b[p] != '\n') ++p;
      } else if (std::isspace(b[p])) {
        ++p;
      } else {
        break;
      }
    }
    if (p >= b.size() || !std::isdigit(b[p])) return std::nullopt;
    while (p < b.size() && std::isdigit(b[p])) d = d * 10 + (b[p++] - '0');
  }
  return ImageSize{dims[0], dims[1]};
}

}  // namespace

std::optional<ImageSize> probe_image_size(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  // Headers of the supported formats sit well inside the first 64 KiB.
  std::vector<std::uint8_t> b(65536);
  in.read(reinterpret_cast<char*>(b.data()),
          static_cast<std::streamsize>(b.size()));
  b.resize(static_cast<std::size_t>(in.gcount()));
  if (b.size() < 10) return std::nullopt;

  if (b.size() >= 24 && png_sig_cmp(b.data(), 0, 8) == 0) {
    return ImageSize{be32(&b[16]), be32(&b[20])};
  }
  if (b[0] == 0xFF && b[1] == 0xD8) return probe_jpeg(b);
  if (b[0] == 'B' && b[1] == 'M' && b.size() >= 26) {
    const auto h = static_cast<std::int32_t>(le32(&b[22]));
    return ImageSize{le32(&b[18]),
                     static_cast<std::uint32_t>(h < 0 ? -h : h)};
  }
  if ((b[0] == 'I' && b[1] == 'I' && b[2] == 42 && b[3] == 0) ||
      (b[0] == 'M' && b[1] == 'M' && b[2] == 0 && b[3] == 42)) {
    return probe_tiff(b);
  }
  if (b[0] == 'P' && b[1] >= '1' && b[1] <= '6') return probe_pnm(b);
  return std::nullopt;
}

}  // namespace satirforge
