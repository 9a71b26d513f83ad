#pragma once

#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Geometry>

#include "lim/geometry.hpp"
#include "lim/image.hpp"
#include "lim/voxel_map.hpp"

namespace lim {

struct RayHit {
  double t = 0.0;  // ray parameter; equals camera depth for z-normalized rays
  std::int32_t triangle = -1;
  Vec3 point = Vec3::Zero();
};

/// Bounding-volume hierarchy over a triangle mesh with a watertight
/// ray/triangle test (no cracks along shared edges).
class MeshRaycaster {
 public:
  explicit MeshRaycaster(const Mesh& mesh);

  /// Closest hit with t in (0, t_max]. `dir` need not be normalized.
  std::optional<RayHit> intersect(const Vec3& origin, const Vec3& dir,
                                  double t_max = std::numeric_limits<double>::infinity()) const;

 private:
  struct Node {
    Eigen::AlignedBox3d box;
    std::int32_t left = -1;  // child index, or -1 for a leaf
    std::int32_t right = -1;
    std::int32_t first = 0;  // leaf range into order_
    std::int32_t count = 0;
  };

  std::int32_t build(std::int32_t first, std::int32_t count, const std::vector<Vec3>& centroids);

  Points vertices_;
  Triangles triangles_;
  std::vector<std::int32_t> order_;
  std::vector<Node> nodes_;
};

/// Camera-frame ray direction through pixel (u, v), scaled so z = 1.
Vec3 pixel_direction(const Intrinsics& k, double u, double v);

struct RenderResult {
  Image<float> depth;     // meters along the optical axis; 0 = miss
  Image<float> property;  // c channels; zeros where invalid
  Image<std::uint8_t> property_valid;
};

/// Casts one ray per pixel against `mesh`. When `property_map` is given,
/// hit points are decoded through that map.
RenderResult raycast_render(const Mesh& mesh, const Camera& camera,
                            const LatentImplicitMap* property_map = nullptr,
                            const PositionalEncoder* enc = nullptr);

/// Quantizes depth to 16-bit millimeters and properties to 8 bits (clamped
/// to [0, 1]); invalid property pixels become black.
Image<std::uint16_t> depth_to_png16(const Image<float>& depth);
Image<std::uint8_t> property_to_png8(const Image<float>& property,
                                     const Image<std::uint8_t>& valid);

}  // namespace lim
