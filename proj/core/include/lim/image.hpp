#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lim/error.hpp"

namespace lim {

/// Interleaved row-major image.
template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, int c, T fill = T{})
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  T& at(int u, int v, int c = 0) { return data[index(u, v, c)]; }
  const T& at(int u, int v, int c = 0) const { return data[index(u, v, c)]; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

 private:
  std::size_t index(int u, int v, int c) const {
    return (static_cast<std::size_t>(v) * width + u) * channels + c;
  }
};

/// 8-bit gray/RGB/RGBA PNG. Throws kIo / kParse.
Image<std::uint8_t> read_png8(const std::string& path);
/// 16-bit single-channel PNG, values as stored (no gamma handling).
Image<std::uint16_t> read_png16(const std::string& path);
void write_png8(const std::string& path, const Image<std::uint8_t>& img);
void write_png16(const std::string& path, const Image<std::uint16_t>& img);

/// Bit depth of a PNG file (8 or 16) without decoding it.
int png_bit_depth(const std::string& path);

/// Float tensor image: "LIMF" magic, u32 version, u32 width, u32 height,
/// u32 channels, u32 dtype (1 = float32), then row-major float32 payload.
Image<float> read_feature_image(const std::string& path);
void write_feature_image(const std::string& path, const Image<float>& img);

}  // namespace lim
