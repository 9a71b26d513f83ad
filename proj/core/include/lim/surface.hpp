#pragma once

#include <array>
#include <functional>
#include <unordered_map>
#include <vector>

#include "lim/geometry.hpp"
#include "lim/gpis.hpp"
#include "lim/voxel_map.hpp"

namespace lim {

struct SurfaceConfig {
  double voxel_size = 0.05;  // meters
  GpisConfig gpis{};
  EncodingConfig encoding = EncodingConfig::defaults_for(FieldKind::kSdf);
  int normal_neighbors = 16;
  /// Points encoded per overlapped voxel; denser voxels keep an evenly
  /// strided subset. 0 keeps everything. The fusion weight stays the full
  /// point count.
  int max_points = 32;
};

/// Encodes one frame into a local SDF map. Normals are estimated from the
/// camera origin when the frame has none. Each overlapped voxel with at
/// least `encoding.min_points` points gets weight equal to its point count.
LatentImplicitMap build_local_surface_lim(const Frame& frame, const PositionalEncoder& enc,
                                          const SurfaceConfig& cfg);

/// Signed distances sampled on a regular lattice. Storage is sparse: only
/// samples owned by allocated voxels exist; everything else is masked.
class SdfGrid {
 public:
  struct Block {
    std::vector<float> values;  // r^3, x fastest; world units
  };

  SdfGrid() = default;
  SdfGrid(const Vec3& origin, double spacing, const std::array<int, 3>& dims, int per_voxel,
          const VoxelKey& min_key);

  /// Dense lattice sampled from an analytic function (for tests and oracles).
  static SdfGrid from_function(const Vec3& origin, double spacing, const std::array<int, 3>& dims,
                               const std::function<double(const Vec3&)>& sdf);
  SdfGrid negated() const;

  const Vec3& origin() const { return origin_; }
  double spacing() const { return spacing_; }
  const std::array<int, 3>& dims() const { return dims_; }
  int samples_per_voxel() const { return per_voxel_; }
  bool empty() const { return blocks_.empty(); }

  Vec3 position(int i, int j, int k) const;
  bool valid(int i, int j, int k) const;
  /// Precondition: valid(i, j, k).
  double value(int i, int j, int k) const;

  std::size_t sample_count() const;
  std::size_t valid_count() const;

  /// Voxel that owns lattice sample (i, j, k).
  VoxelKey owner(int i, int j, int k) const;

  const std::unordered_map<VoxelKey, Block, VoxelKeyHash>& blocks() const { return blocks_; }
  Block& block(const VoxelKey& key);

 private:
  const Block* find_block(int i, int j, int k, int* local) const;

  Vec3 origin_ = Vec3::Zero();
  double spacing_ = 0.0;
  std::array<int, 3> dims_{0, 0, 0};
  int per_voxel_ = 0;
  VoxelKey min_key_{0, 0, 0};
  std::unordered_map<VoxelKey, Block, VoxelKeyHash> blocks_;
};

/// Samples the SDF at spacing voxel_size / r over the allocated voxels'
/// bounding box. Each sample is decoded by the voxel that owns it; samples
/// in absent voxels stay masked.
SdfGrid extract_sdf_grid(const LatentImplicitMap& map, const PositionalEncoder& enc,
                         int samples_per_axis = 8);

/// Zero isosurface with linear edge interpolation. Cells touching masked
/// samples are skipped. Triangles wind counter-clockwise seen from the
/// positive side.
Mesh marching_cubes(const SdfGrid& grid);

}  // namespace lim
