#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "doctest.h"
#include "lim/voxel_map.hpp"
#include "support.hpp"

using namespace lim;

namespace {

Voxel make_voxel(int rank, int channels, std::uint32_t weight, std::uint64_t seed,
                 FieldKind kind = FieldKind::kProperty) {
  Voxel v;
  v.feature.matrix = test::uniform_matrix(rank, channels, seed);
  v.feature.kind = kind;
  v.weight = weight;
  return v;
}

MapConfig prop_config(int channels = 3) {
  MapConfig c;
  c.kind = FieldKind::kProperty;
  c.channels = channels;
  c.rank = 20;
  c.voxel_size = 0.1;
  return c;
}

}  // namespace

TEST_CASE("overlapped assignment matches a neighborhood search") {
  const double vs = 0.07;
  const Points p = test::uniform_points(500, 1, -0.3, 0.3);
  // Oracle: scan the 27-neighborhood and keep voxels whose doubled cube
  // [c - vs, c + vs)^3 contains the point.
  std::map<VoxelKey, std::vector<std::size_t>> want;
  for (int i = 0; i < p.rows(); ++i) {
    const Vec3 x = p.row(i).transpose();
    const VoxelKey k = voxel_index(x, vs);
    int hits = 0;
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = -1; dz <= 1; ++dz) {
          const VoxelKey n{k[0] + dx, k[1] + dy, k[2] + dz};
          const Vec3 c = voxel_center(n, vs);
          if (((x - c).array() >= -vs).all() && ((x - c).array() < vs).all()) {
            want[n].push_back(static_cast<std::size_t>(i));
            ++hits;
          }
        }
    REQUIRE(hits == 8);
  }
  const auto got = assign_points_overlapped(p, vs);
  REQUIRE(got.size() == want.size());
  for (std::size_t a = 0; a < got.size(); ++a) {
    if (a > 0) CHECK(got[a - 1].key < got[a].key);
    const auto it = want.find(got[a].key);
    REQUIRE(it != want.end());
    CHECK(got[a].rows == it->second);
    REQUIRE(got[a].coords.rows() == static_cast<Eigen::Index>(got[a].rows.size()));
    for (std::size_t r = 0; r < got[a].rows.size(); ++r) {
      const Vec3 want_c = normalized_coord(p.row(got[a].rows[r]).transpose(), got[a].key, vs);
      CHECK((got[a].coords.row(r).transpose() - want_c).norm() < 1e-12);
      CHECK(got[a].coords.row(r).minCoeff() >= -0.5);
      CHECK(got[a].coords.row(r).maxCoeff() < 0.5);
    }
  }
}

TEST_CASE("covering voxels follow the fallback order") {
  const double vs = 0.1;
  const Vec3 p(0.12, 0.38, -0.04);  // fracs 0.2, 0.8, 0.6
  const auto keys = covering_voxels(p, vs);
  const VoxelKey f = voxel_index(p, vs);
  CHECK(keys[0] == f);
  CHECK(keys[1] == VoxelKey{f[0] - 1, f[1], f[2]});
  CHECK(keys[2] == VoxelKey{f[0], f[1] + 1, f[2]});
  CHECK(keys[3] == VoxelKey{f[0], f[1], f[2] + 1});
  CHECK(keys[4] == VoxelKey{f[0] - 1, f[1] + 1, f[2]});
  CHECK(keys[5] == VoxelKey{f[0] - 1, f[1], f[2] + 1});
  CHECK(keys[6] == VoxelKey{f[0], f[1] + 1, f[2] + 1});
  CHECK(keys[7] == VoxelKey{f[0] - 1, f[1] + 1, f[2] + 1});
  for (const auto& k : keys) {
    const Vec3 c = normalized_coord(p, k, vs);
    CHECK(c.minCoeff() >= -0.5);
    CHECK(c.maxCoeff() < 0.5);
  }
}

TEST_CASE("fusion is a weight-proportional mean") {
  const Voxel a = make_voxel(20, 3, 5, 1);
  const Voxel b = make_voxel(20, 3, 3, 2);
  const Voxel c = make_voxel(20, 3, 7, 3);
  const Voxel ab = fuse_voxel(a, b);
  CHECK(ab.weight == 8);
  const Matrix want = (5.0 * a.feature.matrix + 3.0 * b.feature.matrix) / 8.0;
  CHECK((ab.feature.matrix - want).cwiseAbs().maxCoeff() < 1e-14);
  const Voxel abc = fuse_voxel(ab, c);
  const Voxel acb = fuse_voxel(fuse_voxel(a, c), b);
  const Matrix all = (5.0 * a.feature.matrix + 3.0 * b.feature.matrix + 7.0 * c.feature.matrix) / 15.0;
  CHECK((abc.feature.matrix - all).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((acb.feature.matrix - all).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(abc.weight == 15);
  CHECK(fuse_voxel(Voxel{}, a).feature.matrix == a.feature.matrix);
  CHECK(test::error_kind([&] { fuse_voxel(a, make_voxel(20, 2, 1, 4)); }) == ErrorKind::kData);
}

TEST_CASE("integration order does not change the fused map") {
  const MapConfig cfg = prop_config();
  std::vector<LatentImplicitMap> locals;
  for (int f = 0; f < 4; ++f) {
    LatentImplicitMap m(cfg);
    for (int k = 0; k < 6; ++k) m.fuse({k % 3, f % 2, k / 3}, make_voxel(20, 3, 1 + f + k, 10 * f + k));
    locals.push_back(std::move(m));
  }
  LatentImplicitMap fwd(cfg);
  LatentImplicitMap rev(cfg);
  for (int f = 0; f < 4; ++f) integrate(fwd, locals[f]);
  for (int f = 3; f >= 0; --f) integrate(rev, locals[f]);
  REQUIRE(fwd.sorted_keys() == rev.sorted_keys());
  for (const auto& k : fwd.sorted_keys()) {
    CHECK(fwd.find(k)->weight == rev.find(k)->weight);
    CHECK((fwd.find(k)->feature.matrix - rev.find(k)->feature.matrix).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((fwd.find(k)->center - voxel_center(k, cfg.voxel_size)).norm() < 1e-15);
  }
}

TEST_CASE("integration rejects mismatched maps") {
  LatentImplicitMap g(prop_config(3));
  LatentImplicitMap other(prop_config(4));
  CHECK(test::error_kind([&] { integrate(g, other); }) == ErrorKind::kData);
  MapConfig vs = prop_config(3);
  vs.voxel_size = 0.2;
  LatentImplicitMap v(vs);
  CHECK(test::error_kind([&] { integrate(g, v); }) == ErrorKind::kData);
  CHECK(test::error_kind([&] { g.fuse({0, 0, 0}, make_voxel(20, 3, 0, 1)); }) == ErrorKind::kData);
  CHECK(test::error_kind([&] { g.fuse({0, 0, 0}, make_voxel(10, 3, 1, 1)); }) == ErrorKind::kData);
  MapConfig sdf = prop_config(2);
  sdf.kind = FieldKind::kSdf;
  CHECK(test::error_kind([&] { LatentImplicitMap bad(sdf); }) == ErrorKind::kInvalidArgument);
}

TEST_CASE("map save and load") {
  const PositionalEncoder enc = PositionalEncoder::build(BasisConfig{});
  LatentImplicitMap m(prop_config(), enc);
  for (int k = 0; k < 10; ++k) m.fuse({k, -k, 2 * k}, make_voxel(20, 3, 1 + k, k));
  std::ostringstream a;
  m.save(a);
  std::istringstream in(a.str());
  const LatentImplicitMap back = LatentImplicitMap::load(in);
  CHECK(back.config().compatible_with(m.config()));
  CHECK(back.size() == m.size());
  for (const auto& k : m.sorted_keys()) {
    REQUIRE(back.find(k) != nullptr);
    CHECK(back.find(k)->weight == m.find(k)->weight);
    // Latents are stored in single precision.
    const Matrix want = m.find(k)->feature.matrix.cast<float>().cast<double>();
    CHECK(back.find(k)->feature.matrix == want);
  }
  std::ostringstream b;
  back.save(b);
  CHECK(a.str() == b.str());
  check_encoder(back, enc);
  BasisConfig other;
  other.seed = 99;
  CHECK(test::error_kind([&] { check_encoder(back, PositionalEncoder::build(other)); }) == ErrorKind::kData);

  std::istringstream trunc(a.str().substr(0, a.str().size() - 7));
  CHECK(test::error_kind([&] { LatentImplicitMap::load(trunc); }) == ErrorKind::kParse);
  CHECK(test::error_kind([] { LatentImplicitMap::load(std::string("/nonexistent/x.limm")); }) == ErrorKind::kIo);
}

TEST_CASE("query decodes in the covering voxel frame") {
  const PositionalEncoder enc = PositionalEncoder::build(BasisConfig{});
  LatentImplicitMap m(prop_config(2), enc);
  const VoxelKey k0{0, 0, 0};
  const VoxelKey k1{1, 0, 0};
  m.fuse(k0, make_voxel(20, 2, 1, 5));
  m.fuse(k1, make_voxel(20, 2, 1, 6));
  Points q(4, 3);
  q << 0.05, 0.05, 0.05,   // floor voxel k0
       0.16, 0.05, 0.05,   // floor voxel k1
       0.21, 0.05, 0.05,   // floor (2,0,0) absent, falls back to k1
       -0.3, 0.05, 0.05;   // nothing covers it
  const QueryResult r = query(m, enc, q);
  REQUIRE(r.valid.size() == 4);
  CHECK(r.valid[0]);
  CHECK(r.valid[1]);
  CHECK(r.valid[2]);
  CHECK_FALSE(r.valid[3]);
  const auto expect = [&](int row, const VoxelKey& k) {
    const Vec3 x = normalized_coord(q.row(row).transpose(), k, 0.1);
    const Vector v = decode(enc, m.find(k)->feature, x);
    CHECK((r.values.row(row).transpose() - v).cwiseAbs().maxCoeff() < 1e-12);
  };
  expect(0, k0);
  expect(1, k1);
  expect(2, k1);
  VoxelKey used{};
  CHECK(find_covering(m, q.row(2).transpose(), &used) == m.find(k1));
  CHECK(used == k1);
  CHECK(find_covering(m, q.row(3).transpose(), &used) == nullptr);
}

TEST_CASE("shared map snapshots are atomic per frame") {
  const MapConfig cfg = prop_config(1);
  SharedMap shared{LatentImplicitMap(cfg)};
  const int frames = 50;
  std::atomic<bool> bad{false};
  std::thread reader([&] {
    for (int i = 0; i < 2000; ++i) {
      const auto snap = shared.snapshot();
      // Every frame adds 4 voxels with weight 1 each at fixed keys.
      std::uint64_t w = 0;
      for (const auto& [k, v] : snap->voxels()) w += v.weight;
      if (w % 4 != 0 || (snap->size() != 0 && snap->size() != 4)) bad = true;
    }
  });
  for (int f = 0; f < frames; ++f) {
    LatentImplicitMap local(cfg);
    for (int k = 0; k < 4; ++k) local.fuse({k, 0, 0}, make_voxel(20, 1, 1, f * 4 + k));
    shared.integrate(local);
  }
  reader.join();
  CHECK_FALSE(bad);
  std::uint64_t w = 0;
  for (const auto& [k, v] : shared.snapshot()->voxels()) w += v.weight;
  CHECK(w == 4 * frames);
}
