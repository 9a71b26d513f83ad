#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "lim/error.hpp"

namespace lim::binary {

static_assert(std::endian::native == std::endian::little,
              "binary artifacts are little-endian; big-endian hosts need byte swapping");

template <typename T>
  requires std::is_arithmetic_v<T>
void write(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
  requires std::is_arithmetic_v<T>
T read(std::istream& is, const char* what) {
  T value{};
  if (!is.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    fail(ErrorKind::kParse, std::string("truncated artifact while reading ") + what);
  }
  return value;
}

void write_magic(std::ostream& os, const char (&magic)[5]);
void expect_magic(std::istream& is, const char (&magic)[5]);

/// 64-bit FNV-1a over a byte range.
std::uint64_t fnv1a(const void* data, std::size_t size,
                    std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace lim::binary
