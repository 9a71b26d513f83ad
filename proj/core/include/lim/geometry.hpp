#pragma once

#include <Eigen/Geometry>
#include <map>
#include <optional>
#include <string>

#include "lim/types.hpp"

namespace lim {

/// Pinhole intrinsics in pixels.
struct Intrinsics {
  double fx = 525.0;
  double fy = 525.0;
  double cx = 319.5;
  double cy = 239.5;
  int width = 640;
  int height = 480;

  void validate() const;
};

/// Throws kData unless the upper-left 3×3 block is a rotation (R^T R = I to
/// 1e-6, det R = +1) and the bottom row is (0, 0, 0, 1).
void validate_pose(const Mat4& pose);

struct Camera {
  Intrinsics intrinsics;
  Mat4 pose = Mat4::Identity();  // camera-to-world

  Vec3 origin() const { return pose.block<3, 1>(0, 3); }
};

/// Posed observation: world-frame points, optional normals, and named
/// per-point property channels.
struct Frame {
  Points points;
  std::optional<Points> normals;
  std::map<std::string, Matrix> properties;
  Camera camera;

  Eigen::Index size() const { return points.rows(); }
  void validate() const;
};

using Triangles = Eigen::Matrix<std::int32_t, Eigen::Dynamic, 3, Eigen::RowMajor>;

struct Mesh {
  Points vertices;
  Triangles triangles;
  /// Per-vertex channels, each V × c.
  std::map<std::string, Matrix> attributes;

  Eigen::Index vertex_count() const { return vertices.rows(); }
  Eigen::Index triangle_count() const { return triangles.rows(); }
  void validate() const;
};

}  // namespace lim
