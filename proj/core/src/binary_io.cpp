#include "lim/binary_io.hpp"

#include "lim/types.hpp"

namespace lim {

std::string_view to_string(FieldKind kind) {
  switch (kind) {
    case FieldKind::kSdf:
      return "sdf";
    case FieldKind::kProperty:
      return "property";
    case FieldKind::kFeature:
      return "feature";
  }
  return "unknown";
}

namespace binary {

void write_magic(std::ostream& os, const char (&magic)[5]) { os.write(magic, 4); }

void expect_magic(std::istream& is, const char (&magic)[5]) {
  char got[4] = {};
  if (!is.read(got, 4) || std::memcmp(got, magic, 4) != 0) {
    fail(ErrorKind::kParse, std::string("bad magic bytes, expected \"") + magic + "\"");
  }
}

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace binary
}  // namespace lim
