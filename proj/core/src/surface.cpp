#include "lim/surface.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "lim/error.hpp"
#include "lim/parallel.hpp"

namespace lim {

void Intrinsics::validate() const {
  if (!(fx > 0.0 && fy > 0.0 && std::isfinite(cx) && std::isfinite(cy) && width > 0 &&
        height > 0)) {
    fail(ErrorKind::kInvalidArgument, "camera intrinsics must be positive");
  }
}

void validate_pose(const Mat4& pose) {
  if (!pose.allFinite()) fail(ErrorKind::kData, "pose is not finite");
  const Eigen::Matrix3d r = pose.topLeftCorner<3, 3>();
  if ((r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-6 ||
      r.determinant() < 0.0) {
    fail(ErrorKind::kData, "pose rotation is not a proper rotation");
  }
  if ((pose.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > 1e-12) {
    fail(ErrorKind::kData, "pose bottom row must be (0, 0, 0, 1)");
  }
}

void Frame::validate() const {
  validate_pose(camera.pose);
  if (normals && normals->rows() != points.rows()) {
    fail(ErrorKind::kData, "frame normals do not match the point count");
  }
  for (const auto& [name, values] : properties) {
    if (values.rows() != points.rows()) {
      fail(ErrorKind::kData, "property channel '" + name + "' does not match the point count");
    }
  }
}

void Mesh::validate() const {
  if (!vertices.allFinite()) fail(ErrorKind::kData, "mesh has non-finite vertices");
  if (triangles.size() > 0 &&
      (triangles.minCoeff() < 0 || triangles.maxCoeff() >= vertices.rows())) {
    fail(ErrorKind::kData, "mesh triangle index out of range");
  }
  for (const auto& [name, values] : attributes) {
    if (values.rows() != vertices.rows()) {
      fail(ErrorKind::kData, "mesh attribute '" + name + "' does not match the vertex count");
    }
  }
}

LatentImplicitMap build_local_surface_lim(const Frame& frame, const PositionalEncoder& enc,
                                          const SurfaceConfig& cfg) {
  frame.validate();
  cfg.gpis.validate();
  cfg.encoding.validate();
  LatentImplicitMap map(MapConfig{FieldKind::kSdf, 1, enc.rank(), cfg.voxel_size, 0}, enc);
  if (frame.size() == 0) return map;

  Points normals;
  if (frame.normals) {
    normals = *frame.normals;
  } else {
    if (frame.size() < 3) return map;
    const int k = static_cast<int>(std::min<Eigen::Index>(cfg.normal_neighbors, frame.size()));
    normals = estimate_normals(frame.points, k, frame.camera.origin()).normals;
  }

  std::vector<VoxelAssignment> assigned = assign_points_overlapped(frame.points, cfg.voxel_size);
  std::erase_if(assigned, [&](const VoxelAssignment& a) {
    return static_cast<int>(a.rows.size()) < cfg.encoding.min_points;
  });

  std::vector<LatentFeature> latents(assigned.size());
  parallel_for(assigned.size(), [&](std::size_t i) {
    const VoxelAssignment& a = assigned[i];
    const std::size_t n = a.rows.size();
    const std::size_t keep =
        cfg.max_points > 0 ? std::min(n, static_cast<std::size_t>(cfg.max_points)) : n;
    OrientedPoints op;
    op.points.resize(static_cast<Eigen::Index>(keep), 3);
    op.normals.resize(static_cast<Eigen::Index>(keep), 3);
    for (std::size_t j = 0; j < keep; ++j) {
      const std::size_t r = j * n / keep;
      op.points.row(static_cast<Eigen::Index>(j)) = a.coords.row(static_cast<Eigen::Index>(r));
      op.normals.row(static_cast<Eigen::Index>(j)) = normals.row(a.rows[r]);
    }
    latents[i] = encode_surface(enc, op, cfg.gpis, cfg.encoding);
  });
  for (std::size_t i = 0; i < assigned.size(); ++i) {
    Voxel v;
    v.center = voxel_center(assigned[i].key, cfg.voxel_size);
    v.feature = std::move(latents[i]);
    v.weight = static_cast<std::uint32_t>(assigned[i].rows.size());
    map.fuse(assigned[i].key, v);
  }
  return map;
}

SdfGrid::SdfGrid(const Vec3& origin, double spacing, const std::array<int, 3>& dims,
                 int per_voxel, const VoxelKey& min_key)
    : origin_(origin), spacing_(spacing), dims_(dims), per_voxel_(per_voxel), min_key_(min_key) {
  require(spacing > 0.0, "grid spacing must be positive");
  require(per_voxel >= 1, "samples per voxel must be positive");
}

Vec3 SdfGrid::position(int i, int j, int k) const {
  return origin_ + spacing_ * Vec3(i, j, k);
}

VoxelKey SdfGrid::owner(int i, int j, int k) const {
  return {min_key_[0] + i / per_voxel_, min_key_[1] + j / per_voxel_,
          min_key_[2] + k / per_voxel_};
}

const SdfGrid::Block* SdfGrid::find_block(int i, int j, int k, int* local) const {
  if (i < 0 || j < 0 || k < 0 || i >= dims_[0] || j >= dims_[1] || k >= dims_[2]) return nullptr;
  const auto it = blocks_.find(owner(i, j, k));
  if (it == blocks_.end()) return nullptr;
  const int r = per_voxel_;
  *local = (i % r) + r * ((j % r) + r * (k % r));
  return &it->second;
}

bool SdfGrid::valid(int i, int j, int k) const {
  int local = 0;
  const Block* b = find_block(i, j, k, &local);
  return b != nullptr && std::isfinite(b->values[static_cast<std::size_t>(local)]);
}

double SdfGrid::value(int i, int j, int k) const {
  int local = 0;
  const Block* b = find_block(i, j, k, &local);
  return b == nullptr ? std::numeric_limits<double>::quiet_NaN()
                      : static_cast<double>(b->values[static_cast<std::size_t>(local)]);
}

std::size_t SdfGrid::sample_count() const {
  return static_cast<std::size_t>(dims_[0]) * static_cast<std::size_t>(dims_[1]) *
         static_cast<std::size_t>(dims_[2]);
}

std::size_t SdfGrid::valid_count() const {
  std::size_t n = 0;
  const int r = per_voxel_;
  for (const auto& [key, b] : blocks_) {
    for (int c = 0; c < r * r * r; ++c) {
      const int i = (key[0] - min_key_[0]) * r + c % r;
      const int j = (key[1] - min_key_[1]) * r + (c / r) % r;
      const int k = (key[2] - min_key_[2]) * r + c / (r * r);
      if (i < dims_[0] && j < dims_[1] && k < dims_[2] &&
          std::isfinite(b.values[static_cast<std::size_t>(c)])) {
        ++n;
      }
    }
  }
  return n;
}

SdfGrid::Block& SdfGrid::block(const VoxelKey& key) {
  Block& b = blocks_[key];
  const auto n = static_cast<std::size_t>(per_voxel_) * per_voxel_ * per_voxel_;
  if (b.values.size() != n) b.values.assign(n, std::numeric_limits<float>::quiet_NaN());
  return b;
}

SdfGrid extract_sdf_grid(const LatentImplicitMap& map, const PositionalEncoder& enc,
                         int samples_per_axis) {
  require(samples_per_axis >= 2, "need at least 2 samples per voxel axis");
  check_encoder(map, enc);
  if (map.empty()) return {};
  const int r = samples_per_axis;
  const double vs = map.config().voxel_size;

  VoxelKey lo{std::numeric_limits<std::int32_t>::max(), std::numeric_limits<std::int32_t>::max(),
              std::numeric_limits<std::int32_t>::max()};
  VoxelKey hi{std::numeric_limits<std::int32_t>::min(), std::numeric_limits<std::int32_t>::min(),
              std::numeric_limits<std::int32_t>::min()};
  for (const auto& [key, v] : map.voxels()) {
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], key[a]);
      hi[a] = std::max(hi[a], key[a]);
    }
  }
  const std::array<int, 3> dims{(hi[0] - lo[0] + 1) * r + 1, (hi[1] - lo[1] + 1) * r + 1,
                                (hi[2] - lo[2] + 1) * r + 1};
  SdfGrid grid(Vec3(lo[0], lo[1], lo[2]) * vs, vs / r, dims, r, lo);

  // Every voxel samples the same in-voxel offsets, so one encoding serves all.
  const int n = r * r * r;
  Points local(n, 3);
  for (int c = 0; c < n; ++c) {
    const Vec3 offset(c % r, (c / r) % r, c / (r * r));
    local.row(c) = ((offset / r).array() - 0.5).matrix().transpose() / 2.0;
  }
  const Matrix basis = enc.encode_batch(local);  // rank × n

  const auto keys = map.sorted_keys();
  std::vector<SdfGrid::Block*> blocks;
  blocks.reserve(keys.size());
  for (const auto& key : keys) blocks.push_back(&grid.block(key));
  parallel_for(keys.size(), [&](std::size_t i) {
    const Voxel& v = *map.find(keys[i]);
    const Vector values = (basis.transpose() * v.feature.matrix.col(0)) * (2.0 * vs);
    for (int c = 0; c < n; ++c) {
      blocks[i]->values[static_cast<std::size_t>(c)] = static_cast<float>(values(c));
    }
  });
  return grid;
}

SdfGrid SdfGrid::from_function(const Vec3& origin, double spacing, const std::array<int, 3>& dims,
                               const std::function<double(const Vec3&)>& sdf) {
  constexpr int r = 8;
  SdfGrid grid(origin, spacing, dims, r, VoxelKey{0, 0, 0});
  for (int k = 0; k < dims[2]; ++k) {
    for (int j = 0; j < dims[1]; ++j) {
      for (int i = 0; i < dims[0]; ++i) {
        Block& b = grid.block({i / r, j / r, k / r});
        b.values[static_cast<std::size_t>((i % r) + r * ((j % r) + r * (k % r)))] =
            static_cast<float>(sdf(grid.position(i, j, k)));
      }
    }
  }
  return grid;
}

SdfGrid SdfGrid::negated() const {
  SdfGrid out = *this;
  for (auto& [key, b] : out.blocks_) {
    for (auto& v : b.values) v = -v;
  }
  return out;
}

}  // namespace lim
