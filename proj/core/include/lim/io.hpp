#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lim/geometry.hpp"

namespace lim {

using Colors = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// Contents of a PLY file: vertices with optional normals and RGB, and
/// optional faces (polygons are fan-triangulated on load).
struct PlyData {
  Points vertices;
  std::optional<Points> normals;
  std::optional<Colors> colors;
  std::optional<std::vector<std::int32_t>> labels;  // int property "label"
  Triangles faces;
};

enum class PlyFormat { kAscii, kBinaryLittleEndian };

/// Reads ASCII or binary little-endian PLY. Throws kParse naming the element
/// (and line, for ASCII) that is malformed or truncated.
PlyData load_ply(const std::string& path);
/// Positions and normals are written as float32, colors as uchar.
void save_ply(const std::string& path, const PlyData& data, PlyFormat format);

/// Mesh export; attribute `color_attribute` (V × 3, [0, 1]) becomes uchar RGB
/// when present.
void save_mesh_ply(const std::string& path, const Mesh& mesh, PlyFormat format,
                   const std::string& color_attribute = "color");
Mesh load_mesh_ply(const std::string& path);

/// Rounds [0, 1] colors to uchar, clamping out-of-range values.
Colors to_colors(const Matrix& rgb);
Matrix from_colors(const Colors& colors);

/// One pose per non-comment line: either 16 floats (row-major 4×4) or TUM
/// "timestamp tx ty tz qx qy qz qw". The format is detected per file.
std::vector<Mat4> load_poses(const std::string& path);

/// Rotation matrix of a (not necessarily normalized) quaternion.
Eigen::Matrix3d quaternion_to_rotation(double qx, double qy, double qz, double qw);

}  // namespace lim
