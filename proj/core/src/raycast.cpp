#include <algorithm>
#include <cmath>
#include <numeric>

#include "lim/parallel.hpp"
#include "lim/render.hpp"

namespace lim {
namespace {

constexpr std::int32_t kLeafSize = 4;

bool slab_hit(const Eigen::AlignedBox3d& box, const Vec3& origin, const Vec3& inv_dir,
              double t_max) {
  double t0 = 0.0;
  double t1 = t_max;
  for (int a = 0; a < 3; ++a) {
    double near = (box.min()[a] - origin[a]) * inv_dir[a];
    double far = (box.max()[a] - origin[a]) * inv_dir[a];
    if (near > far) std::swap(near, far);
    // NaN from 0 * inf (ray in the slab plane) must not reject the box.
    if (!(near <= t1) && !std::isnan(near)) return false;
    if (!(far >= t0) && !std::isnan(far)) return false;
    if (near > t0) t0 = near;
    if (far < t1) t1 = far;
    if (t0 > t1) return false;
  }
  return true;
}

// Watertight ray/triangle intersection (shear into ray space, then signed
// edge functions). Returns t or NaN.
double intersect_triangle(const Vec3& origin, const Vec3& dir, const Vec3& p0, const Vec3& p1,
                          const Vec3& p2) {
  int kz = 0;
  dir.cwiseAbs().maxCoeff(&kz);
  int kx = (kz + 1) % 3;
  int ky = (kx + 1) % 3;
  if (dir[kz] < 0.0) std::swap(kx, ky);
  const double sx = dir[kx] / dir[kz];
  const double sy = dir[ky] / dir[kz];
  const double sz = 1.0 / dir[kz];
  const Vec3 a = p0 - origin;
  const Vec3 b = p1 - origin;
  const Vec3 c = p2 - origin;
  const double ax = a[kx] - sx * a[kz];
  const double ay = a[ky] - sy * a[kz];
  const double bx = b[kx] - sx * b[kz];
  const double by = b[ky] - sy * b[kz];
  const double cx = c[kx] - sx * c[kz];
  const double cy = c[ky] - sy * c[kz];
  const double u = cx * by - cy * bx;
  const double v = ax * cy - ay * cx;
  const double w = bx * ay - by * ax;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if ((u < 0.0 || v < 0.0 || w < 0.0) && (u > 0.0 || v > 0.0 || w > 0.0)) return nan;
  const double det = u + v + w;
  if (det == 0.0) return nan;
  const double t = (u * sz * a[kz] + v * sz * b[kz] + w * sz * c[kz]) / det;
  return t > 0.0 ? t : nan;
}

}  // namespace

MeshRaycaster::MeshRaycaster(const Mesh& mesh)
    : vertices_(mesh.vertices), triangles_(mesh.triangles) {
  mesh.validate();
  const auto n = static_cast<std::int32_t>(triangles_.rows());
  order_.resize(static_cast<std::size_t>(n));
  std::iota(order_.begin(), order_.end(), 0);
  std::vector<Vec3> centroids(static_cast<std::size_t>(n));
  for (std::int32_t t = 0; t < n; ++t) {
    centroids[t] = (vertices_.row(triangles_(t, 0)) + vertices_.row(triangles_(t, 1)) +
                    vertices_.row(triangles_(t, 2)))
                       .transpose() /
                   3.0;
  }
  if (n > 0) {
    nodes_.reserve(static_cast<std::size_t>(2 * n / kLeafSize + 1));
    build(0, n, centroids);
  }
}

std::int32_t MeshRaycaster::build(std::int32_t first, std::int32_t count,
                                  const std::vector<Vec3>& centroids) {
  const auto index = static_cast<std::int32_t>(nodes_.size());
  nodes_.emplace_back();
  Eigen::AlignedBox3d box;
  Eigen::AlignedBox3d centroid_box;
  for (std::int32_t i = first; i < first + count; ++i) {
    const std::int32_t t = order_[i];
    for (int c = 0; c < 3; ++c) box.extend(Vec3(vertices_.row(triangles_(t, c)).transpose()));
    centroid_box.extend(centroids[t]);
  }
  nodes_[index].box = box;
  if (count <= kLeafSize) {
    nodes_[index].first = first;
    nodes_[index].count = count;
    return index;
  }
  int axis = 0;
  centroid_box.sizes().maxCoeff(&axis);
  const std::int32_t mid = first + count / 2;
  std::nth_element(order_.begin() + first, order_.begin() + mid, order_.begin() + first + count,
                   [&](std::int32_t lhs, std::int32_t rhs) {
                     return centroids[lhs][axis] < centroids[rhs][axis];
                   });
  const std::int32_t left = build(first, mid - first, centroids);
  const std::int32_t right = build(mid, first + count - mid, centroids);
  nodes_[index].left = left;
  nodes_[index].right = right;
  return index;
}

std::optional<RayHit> MeshRaycaster::intersect(const Vec3& origin, const Vec3& dir,
                                               double t_max) const {
  if (nodes_.empty()) return std::nullopt;
  const Vec3 inv_dir = dir.cwiseInverse();
  std::optional<RayHit> best;
  double limit = t_max;
  std::vector<std::int32_t> stack{0};
  stack.reserve(64);
  while (!stack.empty()) {
    const Node& node = nodes_[stack.back()];
    stack.pop_back();
    if (!slab_hit(node.box, origin, inv_dir, limit)) continue;
    if (node.left < 0) {
      for (std::int32_t i = node.first; i < node.first + node.count; ++i) {
        const std::int32_t t = order_[i];
        const double hit = intersect_triangle(
            origin, dir, vertices_.row(triangles_(t, 0)).transpose(),
            vertices_.row(triangles_(t, 1)).transpose(), vertices_.row(triangles_(t, 2)).transpose());
        if (std::isnan(hit) || hit > limit) continue;
        limit = hit;
        best = RayHit{hit, t, origin + hit * dir};
      }
    } else {
      stack.push_back(node.left);
      stack.push_back(node.right);
    }
  }
  return best;
}

Vec3 pixel_direction(const Intrinsics& k, double u, double v) {
  return {(u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0};
}

RenderResult raycast_render(const Mesh& mesh, const Camera& camera,
                            const LatentImplicitMap* property_map, const PositionalEncoder* enc) {
  camera.intrinsics.validate();
  validate_pose(camera.pose);
  require(property_map == nullptr || enc != nullptr, "decoding a property map needs its encoder");
  const int w = camera.intrinsics.width;
  const int h = camera.intrinsics.height;
  const int channels = property_map ? property_map->config().channels : 0;
  RenderResult out;
  out.depth = Image<float>(w, h, 1, 0.0f);
  out.property = Image<float>(w, h, std::max(channels, 1), 0.0f);
  out.property_valid = Image<std::uint8_t>(w, h, 1, 0);

  const MeshRaycaster caster(mesh);
  const Eigen::Matrix3d rot = camera.pose.topLeftCorner<3, 3>();
  const Vec3 origin = camera.origin();
  std::vector<Vec3> hits(static_cast<std::size_t>(w) * h);
  std::vector<std::uint8_t> hit_mask(hits.size(), 0);
  parallel_for(static_cast<std::size_t>(h), [&](std::size_t row) {
    const int v = static_cast<int>(row);
    for (int u = 0; u < w; ++u) {
      const Vec3 dir = rot * pixel_direction(camera.intrinsics, u, v);
      if (auto hit = caster.intersect(origin, dir)) {
        out.depth.at(u, v) = static_cast<float>(hit->t);
        const std::size_t p = static_cast<std::size_t>(v) * w + u;
        hits[p] = hit->point;
        hit_mask[p] = 1;
      }
    }
  });

  if (property_map == nullptr) return out;
  std::vector<std::size_t> pixels;
  for (std::size_t p = 0; p < hits.size(); ++p) {
    if (hit_mask[p]) pixels.push_back(p);
  }
  Points queries(static_cast<Eigen::Index>(pixels.size()), 3);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    queries.row(static_cast<Eigen::Index>(i)) = hits[pixels[i]].transpose();
  }
  const QueryResult q = query(*property_map, *enc, queries);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    if (!q.valid[i]) continue;
    const int u = static_cast<int>(pixels[i] % static_cast<std::size_t>(w));
    const int v = static_cast<int>(pixels[i] / static_cast<std::size_t>(w));
    out.property_valid.at(u, v) = 1;
    for (int c = 0; c < channels; ++c) {
      out.property.at(u, v, c) = static_cast<float>(q.values(static_cast<Eigen::Index>(i), c));
    }
  }
  return out;
}

Image<std::uint16_t> depth_to_png16(const Image<float>& depth) {
  Image<std::uint16_t> out(depth.width, depth.height, 1, 0);
  for (std::size_t i = 0; i < depth.data.size(); ++i) {
    const double mm = std::round(static_cast<double>(depth.data[i]) * 1000.0);
    out.data[i] = static_cast<std::uint16_t>(std::clamp(mm, 0.0, 65535.0));
  }
  return out;
}

Image<std::uint8_t> property_to_png8(const Image<float>& property,
                                     const Image<std::uint8_t>& valid) {
  Image<std::uint8_t> out(property.width, property.height, property.channels, 0);
  for (int v = 0; v < property.height; ++v) {
    for (int u = 0; u < property.width; ++u) {
      if (!valid.at(u, v)) continue;
      for (int c = 0; c < property.channels; ++c) {
        const double x = std::clamp(static_cast<double>(property.at(u, v, c)), 0.0, 1.0);
        out.at(u, v, c) = static_cast<std::uint8_t>(std::lround(x * 255.0));
      }
    }
  }
  return out;
}

}  // namespace lim
