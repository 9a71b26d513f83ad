#include "lim/voxel_map.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "lim/binary_io.hpp"
#include "lim/error.hpp"

namespace lim {
namespace {

constexpr std::uint32_t kMapVersion = 1;

std::string key_string(const VoxelKey& k) {
  std::ostringstream os;
  os << "(" << k[0] << ", " << k[1] << ", " << k[2] << ")";
  return os.str();
}

}  // namespace

VoxelKey voxel_index(const Vec3& p, double voxel_size) {
  return {static_cast<std::int32_t>(std::floor(p.x() / voxel_size)),
          static_cast<std::int32_t>(std::floor(p.y() / voxel_size)),
          static_cast<std::int32_t>(std::floor(p.z() / voxel_size))};
}

Vec3 voxel_center(const VoxelKey& key, double voxel_size) {
  return {(key[0] + 0.5) * voxel_size, (key[1] + 0.5) * voxel_size, (key[2] + 0.5) * voxel_size};
}

Vec3 normalized_coord(const Vec3& p, const VoxelKey& key, double voxel_size) {
  return (p - voxel_center(key, voxel_size)) / (2.0 * voxel_size);
}

Voxel fuse_voxel(const Voxel& global, const Voxel& local) {
  if (global.weight == 0) return local;
  if ((global.center - local.center).cwiseAbs().maxCoeff() > 1e-9) {
    fail(ErrorKind::kData, "cannot fuse voxels with different centers");
  }
  if (global.feature.matrix.rows() != local.feature.matrix.rows() ||
      global.feature.matrix.cols() != local.feature.matrix.cols() ||
      global.feature.kind != local.feature.kind) {
    fail(ErrorKind::kData, "cannot fuse latents of different shape or kind");
  }
  Voxel out = global;
  const double total = static_cast<double>(global.weight) + static_cast<double>(local.weight);
  // Running-mean form of (F_g w_g + F_l w_l) / (w_g + w_l).
  out.feature.matrix += (local.feature.matrix - global.feature.matrix) * (local.weight / total);
  out.weight = global.weight + local.weight;
  return out;
}

bool MapConfig::compatible_with(const MapConfig& other) const {
  return kind == other.kind && channels == other.channels && rank == other.rank &&
         voxel_size == other.voxel_size && encoder_ref == other.encoder_ref;
}

LatentImplicitMap::LatentImplicitMap(const MapConfig& cfg) : cfg_(cfg) {
  require(cfg.voxel_size > 0.0 && std::isfinite(cfg.voxel_size), "voxel size must be positive");
  require(cfg.channels >= 1, "map needs at least one channel");
  require(cfg.rank >= 1, "map rank must be positive");
  require(cfg.kind != FieldKind::kSdf || cfg.channels == 1, "sdf maps carry one channel");
}

LatentImplicitMap::LatentImplicitMap(const MapConfig& cfg, const PositionalEncoder& enc)
    : LatentImplicitMap([&] {
        MapConfig c = cfg;
        c.rank = enc.rank();
        c.encoder_ref = enc.fingerprint();
        return c;
      }()) {}

const Voxel* LatentImplicitMap::find(const VoxelKey& key) const {
  const auto it = voxels_.find(key);
  return it == voxels_.end() ? nullptr : &it->second;
}

void LatentImplicitMap::check_voxel(const Voxel& v) const {
  if (v.weight == 0) fail(ErrorKind::kData, "stored voxels need positive weight");
  if (v.feature.rank() != cfg_.rank || v.feature.channels() != cfg_.channels ||
      v.feature.kind != cfg_.kind) {
    fail(ErrorKind::kData, "voxel latent does not match the map configuration");
  }
  if (!v.feature.matrix.allFinite()) fail(ErrorKind::kData, "voxel latent is not finite");
}

void LatentImplicitMap::fuse(const VoxelKey& key, const Voxel& voxel) {
  check_voxel(voxel);
  auto [it, inserted] = voxels_.try_emplace(key, voxel);
  if (inserted) {
    it->second.center = voxel_center(key, cfg_.voxel_size);
  } else {
    Voxel local = voxel;
    local.center = it->second.center;
    it->second = fuse_voxel(it->second, local);
  }
}

std::vector<VoxelKey> LatentImplicitMap::sorted_keys() const {
  std::vector<VoxelKey> keys;
  keys.reserve(voxels_.size());
  for (const auto& [k, v] : voxels_) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  return keys;
}

std::uint64_t LatentImplicitMap::content_hash() const {
  std::uint64_t h = binary::fnv1a(&cfg_.voxel_size, sizeof(double));
  for (const auto& key : sorted_keys()) {
    const Voxel& v = voxels_.at(key);
    h = binary::fnv1a(key.data(), sizeof(key), h);
    h = binary::fnv1a(&v.weight, sizeof(v.weight), h);
    h = binary::fnv1a(v.feature.matrix.data(),
                      sizeof(double) * static_cast<std::size_t>(v.feature.matrix.size()), h);
  }
  return h;
}

void LatentImplicitMap::save(std::ostream& os) const {
  binary::write_magic(os, "LIMM");
  binary::write<std::uint32_t>(os, kMapVersion);
  binary::write<std::uint32_t>(os, static_cast<std::uint32_t>(cfg_.kind));
  binary::write<std::uint32_t>(os, static_cast<std::uint32_t>(cfg_.channels));
  binary::write<std::uint32_t>(os, static_cast<std::uint32_t>(cfg_.rank));
  binary::write<double>(os, cfg_.voxel_size);
  binary::write<std::uint64_t>(os, cfg_.encoder_ref);
  binary::write<std::uint64_t>(os, voxels_.size());
  for (const auto& key : sorted_keys()) {
    const Voxel& v = voxels_.at(key);
    for (auto c : key) binary::write<std::int32_t>(os, c);
    binary::write<std::uint32_t>(os, v.weight);
    for (int i = 0; i < cfg_.rank; ++i) {
      for (int j = 0; j < cfg_.channels; ++j) {
        binary::write<float>(os, static_cast<float>(v.feature.matrix(i, j)));
      }
    }
  }
}

LatentImplicitMap LatentImplicitMap::load(std::istream& is) {
  binary::expect_magic(is, "LIMM");
  const auto version = binary::read<std::uint32_t>(is, "map version");
  if (version != kMapVersion) {
    fail(ErrorKind::kParse, "unsupported map version " + std::to_string(version));
  }
  MapConfig cfg;
  const auto kind = binary::read<std::uint32_t>(is, "map kind");
  if (kind > 2) fail(ErrorKind::kParse, "unknown map kind " + std::to_string(kind));
  cfg.kind = static_cast<FieldKind>(kind);
  cfg.channels = static_cast<int>(binary::read<std::uint32_t>(is, "channels"));
  cfg.rank = static_cast<int>(binary::read<std::uint32_t>(is, "rank"));
  cfg.voxel_size = binary::read<double>(is, "voxel size");
  cfg.encoder_ref = binary::read<std::uint64_t>(is, "encoder reference");
  const auto count = binary::read<std::uint64_t>(is, "voxel count");
  if (cfg.channels < 1 || cfg.rank < 1 || cfg.channels > (1 << 16) || cfg.rank > (1 << 16)) {
    fail(ErrorKind::kParse, "map header has invalid channel count or rank");
  }
  LatentImplicitMap map;
  try {
    map = LatentImplicitMap(cfg);
  } catch (const Error& e) {
    fail(ErrorKind::kParse, std::string("invalid map header: ") + e.what());
  }
  for (std::uint64_t n = 0; n < count; ++n) {
    VoxelKey key;
    for (auto& c : key) c = binary::read<std::int32_t>(is, "voxel index");
    Voxel v;
    v.weight = binary::read<std::uint32_t>(is, "voxel weight");
    v.center = voxel_center(key, cfg.voxel_size);
    v.feature.kind = cfg.kind;
    v.feature.matrix.resize(cfg.rank, cfg.channels);
    for (int i = 0; i < cfg.rank; ++i) {
      for (int j = 0; j < cfg.channels; ++j) {
        v.feature.matrix(i, j) = binary::read<float>(is, "voxel latent");
      }
    }
    if (v.weight == 0) fail(ErrorKind::kParse, "voxel " + key_string(key) + " has zero weight");
    if (!map.voxels_.emplace(key, std::move(v)).second) {
      fail(ErrorKind::kParse, "duplicate voxel " + key_string(key));
    }
  }
  return map;
}

void LatentImplicitMap::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorKind::kIo, "cannot open " + path + " for writing");
  save(os);
  if (!os) fail(ErrorKind::kIo, "failed writing " + path);
}

LatentImplicitMap LatentImplicitMap::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorKind::kIo, "cannot open map " + path);
  return load(is);
}

std::vector<VoxelAssignment> assign_points_overlapped(const Points& points, double voxel_size) {
  require(voxel_size > 0.0, "voxel size must be positive");
  constexpr std::int64_t kBias = std::int64_t{1} << 20;
  auto pack = [](const VoxelKey& k) {
    return (static_cast<std::uint64_t>(k[0] + kBias) << 42) |
           (static_cast<std::uint64_t>(k[1] + kBias) << 21) |
           static_cast<std::uint64_t>(k[2] + kBias);
  };
  auto unpack = [](std::uint64_t v) {
    const std::uint64_t mask = (std::uint64_t{1} << 21) - 1;
    return VoxelKey{static_cast<std::int32_t>(static_cast<std::int64_t>(v >> 42) - kBias),
                    static_cast<std::int32_t>(static_cast<std::int64_t>((v >> 21) & mask) - kBias),
                    static_cast<std::int32_t>(static_cast<std::int64_t>(v & mask) - kBias)};
  };
  const double extent = 2.0 * voxel_size;
  std::vector<std::pair<std::uint64_t, std::uint32_t>> entries;
  entries.reserve(static_cast<std::size_t>(points.rows()) * 8);
  for (Eigen::Index r = 0; r < points.rows(); ++r) {
    const Vec3 p = points.row(r).transpose();
    if (!p.allFinite()) fail(ErrorKind::kData, "non-finite point at row " + std::to_string(r));
    const VoxelKey base = voxel_index(p, voxel_size);
    for (int a = 0; a < 3; ++a) {
      if (std::abs(static_cast<std::int64_t>(base[a])) >= kBias - 1) {
        fail(ErrorKind::kData, "point at row " + std::to_string(r) + " is outside the voxel key range");
      }
    }
    // Per axis, the offsets in {-1, 0, +1} whose doubled cube holds p.
    std::array<std::array<std::int32_t, 3>, 3> hits;
    std::array<int, 3> count{0, 0, 0};
    for (int a = 0; a < 3; ++a) {
      for (int off = -1; off <= 1; ++off) {
        const std::int32_t k = base[a] + off;
        const double t = (p[a] - (k + 0.5) * voxel_size) / extent;
        if (t >= -0.5 && t < 0.5) hits[a][count[a]++] = k;
      }
    }
    for (int i = 0; i < count[0]; ++i) {
      for (int j = 0; j < count[1]; ++j) {
        for (int l = 0; l < count[2]; ++l) {
          entries.emplace_back(pack({hits[0][i], hits[1][j], hits[2][l]}),
                               static_cast<std::uint32_t>(r));
        }
      }
    }
  }
  std::sort(entries.begin(), entries.end());

  std::vector<VoxelAssignment> out;
  for (std::size_t begin = 0; begin < entries.size();) {
    std::size_t end = begin;
    while (end < entries.size() && entries[end].first == entries[begin].first) ++end;
    VoxelAssignment a;
    a.key = unpack(entries[begin].first);
    a.rows.resize(end - begin);
    a.coords.resize(static_cast<Eigen::Index>(end - begin), 3);
    const Vec3 center = voxel_center(a.key, voxel_size);
    for (std::size_t i = begin; i < end; ++i) {
      a.rows[i - begin] = entries[i].second;
      a.coords.row(static_cast<Eigen::Index>(i - begin)) =
          ((points.row(entries[i].second).transpose() - center) / extent).transpose();
    }
    out.push_back(std::move(a));
    begin = end;
  }
  return out;
}

void integrate(LatentImplicitMap& global, const LatentImplicitMap& local) {
  if (!global.config().compatible_with(local.config())) {
    fail(ErrorKind::kData, "cannot integrate maps with different configuration");
  }
  for (const auto& [key, voxel] : local.voxels()) global.fuse(key, voxel);
}

void check_encoder(const LatentImplicitMap& map, const PositionalEncoder& enc) {
  if (map.config().encoder_ref != enc.fingerprint() || map.config().rank != enc.rank()) {
    fail(ErrorKind::kData, "map was built with a different positional encoder");
  }
}

std::array<VoxelKey, 8> covering_voxels(const Vec3& p, double voxel_size) {
  const VoxelKey k = voxel_index(p, voxel_size);
  std::array<int, 3> dir{};
  for (int a = 0; a < 3; ++a) dir[a] = p[a] / voxel_size - k[a] < 0.5 ? -1 : 1;
  static constexpr int kOrder[8] = {0, 1, 2, 4, 3, 5, 6, 7};
  std::array<VoxelKey, 8> out;
  for (int i = 0; i < 8; ++i) {
    for (int a = 0; a < 3; ++a) out[i][a] = k[a] + ((kOrder[i] >> a) & 1 ? dir[a] : 0);
  }
  return out;
}

const Voxel* find_covering(const LatentImplicitMap& map, const Vec3& p, VoxelKey* key) {
  for (const VoxelKey& k : covering_voxels(p, map.config().voxel_size)) {
    if (const Voxel* v = map.find(k)) {
      if (key) *key = k;
      return v;
    }
  }
  return nullptr;
}

QueryResult query(const LatentImplicitMap& map, const PositionalEncoder& enc,
                  const Points& points) {
  check_encoder(map, enc);
  const double vs = map.config().voxel_size;
  QueryResult out;
  out.values = Matrix::Zero(points.rows(), map.config().channels);
  out.valid.assign(points.rows(), false);
  std::unordered_map<VoxelKey, std::vector<Eigen::Index>, VoxelKeyHash> groups;
  for (Eigen::Index r = 0; r < points.rows(); ++r) {
    const Vec3 p = points.row(r).transpose();
    if (!p.allFinite()) continue;
    VoxelKey key;
    if (find_covering(map, p, &key) != nullptr) groups[key].push_back(r);
  }
  for (const auto& [key, rows] : groups) {
    const Voxel& v = *map.find(key);
    Points local(static_cast<Eigen::Index>(rows.size()), 3);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      local.row(static_cast<Eigen::Index>(i)) =
          normalized_coord(points.row(rows[i]).transpose(), key, vs).transpose();
    }
    const Matrix decoded = decode_batch(enc, v.feature, local);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out.values.row(rows[i]) = decoded.row(static_cast<Eigen::Index>(i));
      out.valid[rows[i]] = true;
    }
  }
  return out;
}

SharedMap::SharedMap(LatentImplicitMap initial)
    : current_(std::make_shared<const LatentImplicitMap>(std::move(initial))) {}

std::shared_ptr<const LatentImplicitMap> SharedMap::snapshot() const {
  std::lock_guard lock(mu_);
  return current_;
}

void SharedMap::integrate(const LatentImplicitMap& local) {
  std::lock_guard writer(write_mu_);
  auto next = std::make_shared<LatentImplicitMap>(*snapshot());
  lim::integrate(*next, local);
  std::lock_guard lock(mu_);
  current_ = std::move(next);
}

}  // namespace lim
