#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "lim/encoder.hpp"

namespace lim {

using VoxelKey = std::array<std::int32_t, 3>;

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const noexcept {
    // Spatial-hash primes.
    const auto x = static_cast<std::uint64_t>(static_cast<std::uint32_t>(k[0]));
    const auto y = static_cast<std::uint64_t>(static_cast<std::uint32_t>(k[1]));
    const auto z = static_cast<std::uint64_t>(static_cast<std::uint32_t>(k[2]));
    return static_cast<std::size_t>((x * 73856093ULL) ^ (y * 19349663ULL) ^ (z * 83492791ULL));
  }
};

/// floor(p / voxel_size) per axis; cells are half-open.
VoxelKey voxel_index(const Vec3& p, double voxel_size);
/// (key + 0.5) * voxel_size.
Vec3 voxel_center(const VoxelKey& key, double voxel_size);

struct Voxel {
  Vec3 center = Vec3::Zero();
  LatentFeature feature;
  std::uint32_t weight = 0;
};

/// Running weighted mean of two latents at the same center.
Voxel fuse_voxel(const Voxel& global, const Voxel& local);

struct MapConfig {
  FieldKind kind = FieldKind::kSdf;
  int channels = 1;
  int rank = 20;
  double voxel_size = 0.05;
  std::uint64_t encoder_ref = 0;

  bool compatible_with(const MapConfig& other) const;
};

/// Sparse grid of latent voxels for one field.
class LatentImplicitMap {
 public:
  using Storage = std::unordered_map<VoxelKey, Voxel, VoxelKeyHash>;

  LatentImplicitMap() = default;
  explicit LatentImplicitMap(const MapConfig& cfg);
  LatentImplicitMap(const MapConfig& cfg, const PositionalEncoder& enc);

  const MapConfig& config() const { return cfg_; }
  std::size_t size() const { return voxels_.size(); }
  bool empty() const { return voxels_.empty(); }

  const Voxel* find(const VoxelKey& key) const;
  /// Fuses `voxel` into the slot at `key`, allocating it if absent.
  void fuse(const VoxelKey& key, const Voxel& voxel);

  const Storage& voxels() const { return voxels_; }
  /// Keys in lexicographic order.
  std::vector<VoxelKey> sorted_keys() const;

  /// Content hash over (key, weight, feature) in key order.
  std::uint64_t content_hash() const;

  void save(std::ostream& os) const;
  static LatentImplicitMap load(std::istream& is);
  void save(const std::string& path) const;
  static LatentImplicitMap load(const std::string& path);

 private:
  void check_voxel(const Voxel& voxel) const;

  MapConfig cfg_;
  Storage voxels_;
};

/// Points routed to one overlapped voxel.
struct VoxelAssignment {
  VoxelKey key{0, 0, 0};
  std::vector<std::size_t> rows;  // ascending
  Points coords;  // (p - center) / (2 voxel_size), in [-0.5, 0.5)^3
};

/// Routes every point to each voxel whose doubled cube [c - s, c + s)^3
/// contains it, which is exactly 8 voxels per point. Sorted by key.
std::vector<VoxelAssignment> assign_points_overlapped(const Points& points, double voxel_size);

/// Fuses every voxel of `local` into `global`. Throws kData on config mismatch.
void integrate(LatentImplicitMap& global, const LatentImplicitMap& local);

struct QueryResult {
  Matrix values;            // M × c
  std::vector<bool> valid;  // false where the owning voxel is absent
};

/// Voxels whose doubled cube contains `p`, in fallback order: the floor
/// voxel, then its neighbors toward p shifted along x, y, z, then xy, xz,
/// yz, then all three axes.
std::array<VoxelKey, 8> covering_voxels(const Vec3& p, double voxel_size);

/// First allocated entry of covering_voxels(p), or nullptr.
const Voxel* find_covering(const LatentImplicitMap& map, const Vec3& p, VoxelKey* key);

/// Decodes each point in the doubled frame of find_covering(p).
QueryResult query(const LatentImplicitMap& map, const PositionalEncoder& enc,
                  const Points& points);

/// Throws kData if `enc` is not the encoder the map was built with.
void check_encoder(const LatentImplicitMap& map, const PositionalEncoder& enc);

/// Normalized coordinate of `p` in the doubled frame of `key`.
Vec3 normalized_coord(const Vec3& p, const VoxelKey& key, double voxel_size);

/// A map shared between one integrating writer and any number of readers.
/// Readers get immutable snapshots that contain either all or none of each
/// integrated frame.
class SharedMap {
 public:
  explicit SharedMap(LatentImplicitMap initial);

  std::shared_ptr<const LatentImplicitMap> snapshot() const;
  void integrate(const LatentImplicitMap& local);

 private:
  std::mutex write_mu_;
  mutable std::mutex mu_;
  std::shared_ptr<const LatentImplicitMap> current_;
};

}  // namespace lim
