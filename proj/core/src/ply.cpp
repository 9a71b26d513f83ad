#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "lim/error.hpp"
#include "lim/io.hpp"

namespace lim {
namespace {

enum class PlyType { kInt8, kUint8, kInt16, kUint16, kInt32, kUint32, kFloat32, kFloat64 };

PlyType parse_type(const std::string& s, int line) {
  if (s == "char" || s == "int8") return PlyType::kInt8;
  if (s == "uchar" || s == "uint8") return PlyType::kUint8;
  if (s == "short" || s == "int16") return PlyType::kInt16;
  if (s == "ushort" || s == "uint16") return PlyType::kUint16;
  if (s == "int" || s == "int32") return PlyType::kInt32;
  if (s == "uint" || s == "uint32") return PlyType::kUint32;
  if (s == "float" || s == "float32") return PlyType::kFloat32;
  if (s == "double" || s == "float64") return PlyType::kFloat64;
  fail(ErrorKind::kParse, "ply header line " + std::to_string(line) + ": unknown type '" + s + "'");
}

struct Property {
  std::string name;
  PlyType type = PlyType::kFloat32;
  bool list = false;
  PlyType count_type = PlyType::kUint8;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> props;
  int find(const std::string& n) const {
    for (std::size_t i = 0; i < props.size(); ++i) {
      if (props[i].name == n) return static_cast<int>(i);
    }
    return -1;
  }
};

template <typename T>
double read_le(std::istream& is, bool* ok) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  *ok = static_cast<bool>(is);
  return static_cast<double>(v);
}

double read_binary(std::istream& is, PlyType t, bool* ok) {
  switch (t) {
    case PlyType::kInt8: return read_le<std::int8_t>(is, ok);
    case PlyType::kUint8: return read_le<std::uint8_t>(is, ok);
    case PlyType::kInt16: return read_le<std::int16_t>(is, ok);
    case PlyType::kUint16: return read_le<std::uint16_t>(is, ok);
    case PlyType::kInt32: return read_le<std::int32_t>(is, ok);
    case PlyType::kUint32: return read_le<std::uint32_t>(is, ok);
    case PlyType::kFloat32: return read_le<float>(is, ok);
    case PlyType::kFloat64: return read_le<double>(is, ok);
  }
  *ok = false;
  return 0.0;
}

// One element record: scalar values by property index, and the list of the
// (at most one used) list property.
struct Record {
  std::vector<double> scalars;
  std::vector<double> list;
};

class RecordReader {
 public:
  RecordReader(std::istream& is, bool binary, int first_line)
      : is_(is), binary_(binary), line_(first_line) {}

  void read(const Element& e, std::size_t item, Record* rec) {
    rec->scalars.assign(e.props.size(), 0.0);
    rec->list.clear();
    if (binary_) {
      read_bin(e, item, rec);
    } else {
      read_ascii(e, item, rec);
    }
  }

 private:
  [[noreturn]] void truncated(const Element& e, std::size_t item) const {
    std::string where = "element '" + e.name + "' item " + std::to_string(item) + " of " +
                        std::to_string(e.count);
    if (!binary_) where += " (line " + std::to_string(line_) + ")";
    fail(ErrorKind::kParse, "ply: truncated or malformed " + where);
  }

  void read_bin(const Element& e, std::size_t item, Record* rec) {
    bool ok = true;
    for (std::size_t p = 0; p < e.props.size(); ++p) {
      const Property& prop = e.props[p];
      if (!prop.list) {
        rec->scalars[p] = read_binary(is_, prop.type, &ok);
        if (!ok) truncated(e, item);
        continue;
      }
      const double n = read_binary(is_, prop.count_type, &ok);
      if (!ok || n < 0) truncated(e, item);
      std::vector<double> values(static_cast<std::size_t>(n));
      for (auto& v : values) {
        v = read_binary(is_, prop.type, &ok);
        if (!ok) truncated(e, item);
      }
      rec->list = std::move(values);
    }
  }

  void read_ascii(const Element& e, std::size_t item, Record* rec) {
    std::string line;
    do {
      if (!std::getline(is_, line)) truncated(e, item);
      ++line_;
    } while (line.find_first_not_of(" \t\r") == std::string::npos);
    std::istringstream ss(line);
    auto next = [&]() {
      std::string tok;
      if (!(ss >> tok)) truncated(e, item);
      char* end = nullptr;
      const double v = std::strtod(tok.c_str(), &end);
      if (end != tok.c_str() + tok.size()) truncated(e, item);
      return v;
    };
    for (std::size_t p = 0; p < e.props.size(); ++p) {
      if (!e.props[p].list) {
        rec->scalars[p] = next();
        continue;
      }
      const double n = next();
      if (n < 0 || n != std::floor(n)) truncated(e, item);
      std::vector<double> values(static_cast<std::size_t>(n));
      for (auto& v : values) v = next();
      rec->list = std::move(values);
    }
  }

  std::istream& is_;
  bool binary_;
  int line_;
};

}  // namespace

PlyData load_ply(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorKind::kIo, "cannot open " + path);
  std::string line;
  int line_no = 0;
  auto header_error = [&](const std::string& msg) {
    fail(ErrorKind::kParse, path + ": ply header line " + std::to_string(line_no) + ": " + msg);
  };
  if (!std::getline(is, line) || (++line_no, line.rfind("ply", 0) != 0)) {
    header_error("missing 'ply' magic");
  }
  bool binary = false;
  bool have_format = false;
  std::vector<Element> elements;
  bool ended = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    if (word.empty() || word == "comment" || word == "obj_info") continue;
    if (word == "end_header") {
      ended = true;
      break;
    }
    if (word == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt == "ascii") {
        binary = false;
      } else if (fmt == "binary_little_endian") {
        binary = true;
      } else {
        header_error("unsupported format '" + fmt + "'");
      }
      have_format = true;
    } else if (word == "element") {
      Element e;
      long long count = -1;
      if (!(ss >> e.name >> count) || count < 0) header_error("malformed element");
      e.count = static_cast<std::size_t>(count);
      elements.push_back(std::move(e));
    } else if (word == "property") {
      if (elements.empty()) header_error("property before any element");
      Property p;
      std::string type;
      if (!(ss >> type)) header_error("malformed property");
      if (type == "list") {
        std::string ct;
        std::string it;
        if (!(ss >> ct >> it >> p.name)) header_error("malformed list property");
        p.list = true;
        p.count_type = parse_type(ct, line_no);
        p.type = parse_type(it, line_no);
      } else {
        if (!(ss >> p.name)) header_error("malformed property");
        p.type = parse_type(type, line_no);
      }
      elements.back().props.push_back(p);
    } else {
      header_error("unexpected keyword '" + word + "'");
    }
  }
  if (!ended) header_error("missing end_header");
  if (!have_format) header_error("missing format line");

  PlyData out;
  out.vertices.resize(0, 3);
  out.faces.resize(0, 3);
  RecordReader reader(is, binary, line_no);
  Record rec;
  for (const Element& e : elements) {
    if (e.name == "vertex") {
      const int ix = e.find("x");
      const int iy = e.find("y");
      const int iz = e.find("z");
      if (ix < 0 || iy < 0 || iz < 0) {
        fail(ErrorKind::kParse, path + ": element 'vertex' lacks x/y/z");
      }
      const int inx = e.find("nx");
      const int iny = e.find("ny");
      const int inz = e.find("nz");
      const int ir = e.find("red");
      const int ig = e.find("green");
      const int ib = e.find("blue");
      const int il = e.find("label");
      const auto n = static_cast<Eigen::Index>(e.count);
      out.vertices.resize(n, 3);
      if (inx >= 0 && iny >= 0 && inz >= 0) out.normals = Points(n, 3);
      if (ir >= 0 && ig >= 0 && ib >= 0) out.colors = Colors(n, 3);
      if (il >= 0) out.labels = std::vector<std::int32_t>(static_cast<std::size_t>(n));
      for (Eigen::Index v = 0; v < n; ++v) {
        reader.read(e, static_cast<std::size_t>(v), &rec);
        out.vertices.row(v) << rec.scalars[ix], rec.scalars[iy], rec.scalars[iz];
        if (out.normals) out.normals->row(v) << rec.scalars[inx], rec.scalars[iny], rec.scalars[inz];
        if (out.colors) {
          for (int c = 0; c < 3; ++c) {
            const double x = rec.scalars[c == 0 ? ir : c == 1 ? ig : ib];
            (*out.colors)(v, c) = static_cast<std::uint8_t>(std::clamp(x, 0.0, 255.0));
          }
        }
        if (out.labels) (*out.labels)[static_cast<std::size_t>(v)] = static_cast<std::int32_t>(rec.scalars[il]);
      }
    } else if (e.name == "face") {
      int il = e.find("vertex_indices");
      if (il < 0) il = e.find("vertex_index");
      if (il < 0 || !e.props[il].list) {
        fail(ErrorKind::kParse, path + ": element 'face' lacks a vertex_indices list");
      }
      std::vector<std::array<std::int32_t, 3>> tris;
      tris.reserve(e.count);
      for (std::size_t f = 0; f < e.count; ++f) {
        reader.read(e, f, &rec);
        if (rec.list.size() < 3) {
          fail(ErrorKind::kParse, path + ": element 'face' item " + std::to_string(f) +
                                      " has fewer than 3 indices");
        }
        for (std::size_t k = 1; k + 1 < rec.list.size(); ++k) {
          tris.push_back({static_cast<std::int32_t>(rec.list[0]),
                          static_cast<std::int32_t>(rec.list[k]),
                          static_cast<std::int32_t>(rec.list[k + 1])});
        }
      }
      out.faces.resize(static_cast<Eigen::Index>(tris.size()), 3);
      for (std::size_t t = 0; t < tris.size(); ++t) {
        for (int c = 0; c < 3; ++c) out.faces(static_cast<Eigen::Index>(t), c) = tris[t][c];
      }
    } else {
      for (std::size_t i = 0; i < e.count; ++i) reader.read(e, i, &rec);
    }
  }
  if (out.faces.size() > 0 &&
      (out.faces.minCoeff() < 0 || out.faces.maxCoeff() >= out.vertices.rows())) {
    fail(ErrorKind::kParse, path + ": element 'face' references a missing vertex");
  }
  return out;
}

void save_ply(const std::string& path, const PlyData& data, PlyFormat format) {
  const Eigen::Index n = data.vertices.rows();
  require(!data.normals || data.normals->rows() == n, "ply normals must match vertex count");
  require(!data.colors || data.colors->rows() == n, "ply colors must match vertex count");
  require(!data.labels || static_cast<Eigen::Index>(data.labels->size()) == n,
          "ply labels must match vertex count");
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorKind::kIo, "cannot open " + path + " for writing");
  const bool binary = format == PlyFormat::kBinaryLittleEndian;
  os << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n";
  os << "element vertex " << n << "\n";
  os << "property float x\nproperty float y\nproperty float z\n";
  if (data.normals) os << "property float nx\nproperty float ny\nproperty float nz\n";
  if (data.colors) os << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  if (data.labels) os << "property int label\n";
  if (data.faces.rows() > 0) {
    os << "element face " << data.faces.rows() << "\n";
    os << "property list uchar int vertex_indices\n";
  }
  os << "end_header\n";

  if (binary) {
    std::vector<char> buf;
    auto put = [&buf](const auto& v) {
      const char* p = reinterpret_cast<const char*>(&v);
      buf.insert(buf.end(), p, p + sizeof(v));
    };
    for (Eigen::Index v = 0; v < n; ++v) {
      for (int c = 0; c < 3; ++c) put(static_cast<float>(data.vertices(v, c)));
      if (data.normals) {
        for (int c = 0; c < 3; ++c) put(static_cast<float>((*data.normals)(v, c)));
      }
      if (data.colors) {
        for (int c = 0; c < 3; ++c) put((*data.colors)(v, c));
      }
      if (data.labels) put((*data.labels)[static_cast<std::size_t>(v)]);
    }
    for (Eigen::Index f = 0; f < data.faces.rows(); ++f) {
      put(static_cast<std::uint8_t>(3));
      for (int c = 0; c < 3; ++c) put(data.faces(f, c));
    }
    os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  } else {
    char tmp[64];
    for (Eigen::Index v = 0; v < n; ++v) {
      std::string row;
      auto num = [&](float x) {
        std::snprintf(tmp, sizeof(tmp), "%.9g", static_cast<double>(x));
        if (!row.empty()) row += ' ';
        row += tmp;
      };
      for (int c = 0; c < 3; ++c) num(static_cast<float>(data.vertices(v, c)));
      if (data.normals) {
        for (int c = 0; c < 3; ++c) num(static_cast<float>((*data.normals)(v, c)));
      }
      if (data.colors) {
        for (int c = 0; c < 3; ++c) row += ' ' + std::to_string((*data.colors)(v, c));
      }
      if (data.labels) row += ' ' + std::to_string((*data.labels)[static_cast<std::size_t>(v)]);
      os << row << '\n';
    }
    for (Eigen::Index f = 0; f < data.faces.rows(); ++f) {
      os << "3 " << data.faces(f, 0) << ' ' << data.faces(f, 1) << ' ' << data.faces(f, 2) << '\n';
    }
  }
  if (!os) fail(ErrorKind::kIo, "failed writing " + path);
}

Colors to_colors(const Matrix& rgb) {
  require(rgb.cols() == 3, "colors need 3 channels");
  Colors out(rgb.rows(), 3);
  for (Eigen::Index i = 0; i < rgb.rows(); ++i) {
    for (int c = 0; c < 3; ++c) {
      const double x = std::isfinite(rgb(i, c)) ? std::clamp(rgb(i, c), 0.0, 1.0) : 0.0;
      out(i, c) = static_cast<std::uint8_t>(std::lround(x * 255.0));
    }
  }
  return out;
}

Matrix from_colors(const Colors& colors) {
  return colors.cast<double>() / 255.0;
}

void save_mesh_ply(const std::string& path, const Mesh& mesh, PlyFormat format,
                   const std::string& color_attribute) {
  mesh.validate();
  PlyData data;
  data.vertices = mesh.vertices;
  data.faces = mesh.triangles;
  const auto it = mesh.attributes.find(color_attribute);
  if (it != mesh.attributes.end() && it->second.cols() == 3) {
    Matrix rgb = it->second;
    const auto valid = mesh.attributes.find(color_attribute + "_valid");
    if (valid != mesh.attributes.end()) {
      for (Eigen::Index v = 0; v < rgb.rows(); ++v) {
        if (valid->second(v, 0) == 0.0) rgb.row(v).setZero();
      }
    }
    data.colors = to_colors(rgb);
  }
  save_ply(path, data, format);
}

Mesh load_mesh_ply(const std::string& path) {
  PlyData data = load_ply(path);
  Mesh mesh;
  mesh.vertices = std::move(data.vertices);
  mesh.triangles = std::move(data.faces);
  if (data.colors) mesh.attributes["color"] = from_colors(*data.colors);
  return mesh;
}

}  // namespace lim
