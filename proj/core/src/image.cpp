#include "lim/image.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include "lim/binary_io.hpp"

namespace lim {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) fail(ErrorKind::kIo, "cannot open " + path);
  return f;
}

// libpng is C: errors longjmp back to the setjmp in the caller, which then
// throws. The message travels through the error pointer.
[[noreturn]] void png_error_handler(png_structp png, png_const_charp msg) {
  auto* sink = static_cast<std::string*>(png_get_error_ptr(png));
  if (sink) *sink = msg;
  png_longjmp(png, 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

struct PngRead {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::string error;
  PngRead() {
    png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, png_error_handler,
                                 png_warning_handler);
    if (!png) fail(ErrorKind::kIo, "png_create_read_struct failed");
    info = png_create_info_struct(png);
  }
  ~PngRead() { png_destroy_read_struct(&png, &info, nullptr); }
};

struct PngWrite {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::string error;
  PngWrite() {
    png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, png_error_handler,
                                  png_warning_handler);
    if (!png) fail(ErrorKind::kIo, "png_create_write_struct failed");
    info = png_create_info_struct(png);
  }
  ~PngWrite() { png_destroy_write_struct(&png, &info); }
};

// Decoded pixel rows, packed.
struct RawPng {
  int width = 0;
  int height = 0;
  int channels = 0;
  int depth = 0;
  std::vector<png_byte> bytes;
};

RawPng read_raw(const std::string& path) {
  auto file = open_file(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    fail(ErrorKind::kParse, path + " is not a PNG file");
  }
  PngRead r;
  RawPng out;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(r.png))) fail(ErrorKind::kParse, path + ": png: " + r.error);
  png_init_io(r.png, file.get());
  png_set_sig_bytes(r.png, 8);
  png_read_info(r.png, r.info);
  const int color = png_get_color_type(r.png, r.info);
  const int depth = png_get_bit_depth(r.png, r.info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(r.png);
  if (depth == 16) png_set_swap(r.png);  // host (little-endian) order
  png_read_update_info(r.png, r.info);

  out.width = static_cast<int>(png_get_image_width(r.png, r.info));
  out.height = static_cast<int>(png_get_image_height(r.png, r.info));
  out.channels = png_get_channels(r.png, r.info);
  out.depth = png_get_bit_depth(r.png, r.info);
  const std::size_t rowbytes = png_get_rowbytes(r.png, r.info);
  out.bytes.resize(rowbytes * static_cast<std::size_t>(out.height));
  rows.resize(static_cast<std::size_t>(out.height));
  for (int v = 0; v < out.height; ++v) rows[v] = out.bytes.data() + rowbytes * v;
  png_read_image(r.png, rows.data());
  png_read_end(r.png, nullptr);
  return out;
}

void write_raw(const std::string& path, int width, int height, int channels, int depth,
               const png_byte* data) {
  auto file = open_file(path, "wb");
  PngWrite w;
  if (setjmp(png_jmpbuf(w.png))) fail(ErrorKind::kIo, path + ": png: " + w.error);
  png_init_io(w.png, file.get());
  int color = PNG_COLOR_TYPE_GRAY;
  if (channels == 2) color = PNG_COLOR_TYPE_GRAY_ALPHA;
  if (channels == 3) color = PNG_COLOR_TYPE_RGB;
  if (channels == 4) color = PNG_COLOR_TYPE_RGB_ALPHA;
  png_set_IHDR(w.png, w.info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               depth, color, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(w.png, w.info);
  if (depth == 16) png_set_swap(w.png);
  const std::size_t rowbytes = static_cast<std::size_t>(width) * channels * (depth / 8);
  for (int v = 0; v < height; ++v) {
    png_write_row(w.png, const_cast<png_bytep>(data + rowbytes * v));
  }
  png_write_end(w.png, nullptr);
}

}  // namespace

int png_bit_depth(const std::string& path) {
  auto file = open_file(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    fail(ErrorKind::kParse, path + " is not a PNG file");
  }
  PngRead r;
  if (setjmp(png_jmpbuf(r.png))) fail(ErrorKind::kParse, path + ": png: " + r.error);
  png_init_io(r.png, file.get());
  png_set_sig_bytes(r.png, 8);
  png_read_info(r.png, r.info);
  return png_get_bit_depth(r.png, r.info);
}

Image<std::uint8_t> read_png8(const std::string& path) {
  RawPng raw = read_raw(path);
  if (raw.depth != 8) fail(ErrorKind::kParse, path + ": expected an 8-bit PNG");
  Image<std::uint8_t> img(raw.width, raw.height, raw.channels);
  img.data.assign(raw.bytes.begin(), raw.bytes.end());
  return img;
}

Image<std::uint16_t> read_png16(const std::string& path) {
  RawPng raw = read_raw(path);
  if (raw.depth != 16 || raw.channels != 1) {
    fail(ErrorKind::kParse, path + ": expected a single-channel 16-bit PNG");
  }
  Image<std::uint16_t> img(raw.width, raw.height, 1);
  std::memcpy(img.data.data(), raw.bytes.data(), img.data.size() * sizeof(std::uint16_t));
  return img;
}

void write_png8(const std::string& path, const Image<std::uint8_t>& img) {
  require(img.channels >= 1 && img.channels <= 4, "png supports 1 to 4 channels");
  write_raw(path, img.width, img.height, img.channels, 8, img.data.data());
}

void write_png16(const std::string& path, const Image<std::uint16_t>& img) {
  require(img.channels == 1, "16-bit png output is single-channel");
  write_raw(path, img.width, img.height, 1, 16,
            reinterpret_cast<const png_byte*>(img.data.data()));
}

Image<float> read_feature_image(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorKind::kIo, "cannot open " + path);
  binary::expect_magic(is, "LIMF");
  if (binary::read<std::uint32_t>(is, "feature image version") != 1) {
    fail(ErrorKind::kParse, path + ": unsupported feature image version");
  }
  const auto w = binary::read<std::uint32_t>(is, "width");
  const auto h = binary::read<std::uint32_t>(is, "height");
  const auto c = binary::read<std::uint32_t>(is, "channels");
  if (binary::read<std::uint32_t>(is, "dtype") != 1) {
    fail(ErrorKind::kParse, path + ": only float32 feature images are supported");
  }
  if (w == 0 || h == 0 || c == 0 || w > 65536 || h > 65536 || c > 65536) {
    fail(ErrorKind::kParse, path + ": invalid feature image dimensions");
  }
  Image<float> img(static_cast<int>(w), static_cast<int>(h), static_cast<int>(c));
  if (!is.read(reinterpret_cast<char*>(img.data.data()),
               static_cast<std::streamsize>(img.data.size() * sizeof(float)))) {
    fail(ErrorKind::kParse, path + ": truncated feature image payload");
  }
  return img;
}

void write_feature_image(const std::string& path, const Image<float>& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorKind::kIo, "cannot open " + path + " for writing");
  binary::write_magic(os, "LIMF");
  binary::write<std::uint32_t>(os, 1);
  binary::write<std::uint32_t>(os, static_cast<std::uint32_t>(img.width));
  binary::write<std::uint32_t>(os, static_cast<std::uint32_t>(img.height));
  binary::write<std::uint32_t>(os, static_cast<std::uint32_t>(img.channels));
  binary::write<std::uint32_t>(os, 1);
  os.write(reinterpret_cast<const char*>(img.data.data()),
           static_cast<std::streamsize>(img.data.size() * sizeof(float)));
  if (!os) fail(ErrorKind::kIo, "failed writing " + path);
}

}  // namespace lim
