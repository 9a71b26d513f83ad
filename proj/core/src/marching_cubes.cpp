#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <unordered_map>
#include <vector>

#include "lim/surface.hpp"

namespace lim {
namespace {

// Corner c sits at offset (c & 1, (c >> 1) & 1, (c >> 2) & 1).
struct Edge {
  int a;
  int b;
  int axis;
};

constexpr std::array<Edge, 12> kEdges{{
    {0, 1, 0}, {2, 3, 0}, {4, 5, 0}, {6, 7, 0},
    {0, 2, 1}, {1, 3, 1}, {4, 6, 1}, {5, 7, 1},
    {0, 4, 2}, {1, 5, 2}, {2, 6, 2}, {3, 7, 2},
}};

// Cube faces, corners counter-clockwise seen from outside the cube.
constexpr std::array<std::array<int, 4>, 6> kFaces{{
    {0, 4, 6, 2}, {1, 3, 7, 5}, {0, 1, 5, 4}, {2, 6, 7, 3}, {0, 2, 3, 1}, {4, 5, 7, 6},
}};

int edge_between(int a, int b) {
  for (int e = 0; e < 12; ++e) {
    if ((kEdges[e].a == a && kEdges[e].b == b) || (kEdges[e].a == b && kEdges[e].b == a)) return e;
  }
  return -1;
}

using CaseTable = std::array<std::vector<std::array<int, 3>>, 256>;

// Builds the triangulation for every sign configuration. On each face,
// crossing edges are found walking the boundary counter-clockwise; every
// edge where the walk leaves the negative region is joined to the nearest
// preceding edge where it entered. On ambiguous faces this keeps negative
// corners apart, a rule both cubes sharing the face agree on, so the output
// is watertight. Chaining the face segments yields closed loops, which are
// fanned into triangles.
CaseTable build_case_table() {
  CaseTable table;
  for (int config = 0; config < 256; ++config) {
    auto negative = [config](int c) { return (config >> c) & 1; };
    std::array<int, 12> next;
    next.fill(-1);
    for (const auto& face : kFaces) {
      struct Crossing {
        int edge;
        bool enter;
      };
      std::vector<Crossing> crossings;
      for (int i = 0; i < 4; ++i) {
        const int a = face[i];
        const int b = face[(i + 1) % 4];
        if (negative(a) != negative(b)) crossings.push_back({edge_between(a, b), !negative(a)});
      }
      const int n = static_cast<int>(crossings.size());
      for (int i = 0; i < n; ++i) {
        if (crossings[i].enter) continue;
        for (int back = 1; back < n; ++back) {
          const Crossing& c = crossings[(i - back + n) % n];
          if (c.enter) {
            next[crossings[i].edge] = c.edge;
            break;
          }
        }
      }
    }
    std::array<bool, 12> used{};
    for (int start = 0; start < 12; ++start) {
      if (next[start] < 0 || used[start]) continue;
      std::vector<int> loop;
      for (int e = start; !used[e]; e = next[e]) {
        used[e] = true;
        loop.push_back(e);
      }
      // The loop winds around the negative side; emit reversed so normals
      // point toward positive values.
      for (std::size_t i = 1; i + 1 < loop.size(); ++i) {
        table[config].push_back({loop[0], loop[i + 1], loop[i]});
      }
    }
  }
  return table;
}

const CaseTable& case_table() {
  static const CaseTable table = build_case_table();
  return table;
}

}  // namespace

Mesh marching_cubes(const SdfGrid& grid) {
  Mesh mesh;
  if (grid.empty()) {
    mesh.vertices.resize(0, 3);
    mesh.triangles.resize(0, 3);
    return mesh;
  }
  const auto& table = case_table();
  const auto dims = grid.dims();
  const int r = grid.samples_per_voxel();

  std::vector<VoxelKey> keys;
  keys.reserve(grid.blocks().size());
  for (const auto& [key, b] : grid.blocks()) keys.push_back(key);
  std::sort(keys.begin(), keys.end());
  const VoxelKey base = grid.owner(0, 0, 0);

  std::unordered_map<std::uint64_t, std::int32_t> edge_vertex;
  std::vector<Vec3> vertices;
  std::vector<std::array<std::int32_t, 3>> triangles;

  auto vertex_on = [&](int i, int j, int k, int axis, double v0, double v1) {
    const std::uint64_t id =
        ((static_cast<std::uint64_t>(k) * static_cast<std::uint64_t>(dims[1]) +
          static_cast<std::uint64_t>(j)) *
             static_cast<std::uint64_t>(dims[0]) +
         static_cast<std::uint64_t>(i)) *
            3 +
        static_cast<std::uint64_t>(axis);
    auto [it, inserted] = edge_vertex.try_emplace(id, static_cast<std::int32_t>(vertices.size()));
    if (inserted) {
      const double denom = v0 - v1;
      const double t = std::abs(denom) < 1e-12 ? 0.5 : v0 / denom;
      Vec3 step = Vec3::Zero();
      step[axis] = grid.spacing();
      vertices.push_back(grid.position(i, j, k) + t * step);
    }
    return it->second;
  };

  // Block samples plus the +x/+y/+z face layers borrowed from neighbors.
  const int m = r + 1;
  std::vector<double> local(static_cast<std::size_t>(m) * m * m);
  const auto at = [&](int li, int lj, int lk) -> double& {
    return local[static_cast<std::size_t>(li + m * (lj + m * lk))];
  };
  std::array<double, 8> values;
  std::array<std::array<int, 3>, 8> corners;
  for (const auto& key : keys) {
    const int bi = (key[0] - base[0]) * r;
    const int bj = (key[1] - base[1]) * r;
    const int bk = (key[2] - base[2]) * r;
    std::fill(local.begin(), local.end(), std::numeric_limits<double>::quiet_NaN());
    for (int d = 0; d < 8; ++d) {
      const VoxelKey nk{key[0] + (d & 1), key[1] + ((d >> 1) & 1), key[2] + ((d >> 2) & 1)};
      const auto it = grid.blocks().find(nk);
      if (it == grid.blocks().end()) continue;
      const auto& vals = it->second.values;
      const int i0 = d & 1 ? r : 0, j0 = d & 2 ? r : 0, k0 = d & 4 ? r : 0;
      const int i1 = d & 1 ? m : r, j1 = d & 2 ? m : r, k1 = d & 4 ? m : r;
      for (int lk = k0; lk < k1; ++lk) {
        for (int lj = j0; lj < j1; ++lj) {
          for (int li = i0; li < i1; ++li) {
            if (bi + li >= dims[0] || bj + lj >= dims[1] || bk + lk >= dims[2]) continue;
            at(li, lj, lk) = vals[static_cast<std::size_t>((li - i0) + r * ((lj - j0) + r * (lk - k0)))];
          }
        }
      }
    }
    for (int lk = 0; lk < r; ++lk) {
      for (int lj = 0; lj < r; ++lj) {
        for (int li = 0; li < r; ++li) {
          int config = 0;
          bool ok = true;
          for (int c = 0; c < 8; ++c) {
            values[c] = at(li + (c & 1), lj + ((c >> 1) & 1), lk + ((c >> 2) & 1));
            if (!std::isfinite(values[c])) {
              ok = false;
              break;
            }
            if (values[c] < 0.0) config |= 1 << c;
          }
          if (!ok || config == 0 || config == 255) continue;
          const int i = bi + li;
          const int j = bj + lj;
          const int k = bk + lk;
          for (int c = 0; c < 8; ++c) {
            corners[c] = {i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1)};
          }
          for (const auto& tri : table[config]) {
            std::array<std::int32_t, 3> ids;
            for (int v = 0; v < 3; ++v) {
              const Edge& e = kEdges[tri[v]];
              const auto& lo = corners[e.a];
              ids[v] = vertex_on(lo[0], lo[1], lo[2], e.axis, values[e.a], values[e.b]);
            }
            const Vec3 n = (vertices[ids[1]] - vertices[ids[0]])
                               .cross(vertices[ids[2]] - vertices[ids[0]]);
            if (0.5 * n.norm() > 1e-12) triangles.push_back(ids);
          }
        }
      }
    }
  }

  mesh.vertices.resize(static_cast<Eigen::Index>(vertices.size()), 3);
  for (std::size_t v = 0; v < vertices.size(); ++v) {
    mesh.vertices.row(static_cast<Eigen::Index>(v)) = vertices[v].transpose();
  }
  mesh.triangles.resize(static_cast<Eigen::Index>(triangles.size()), 3);
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    for (int c = 0; c < 3; ++c) mesh.triangles(static_cast<Eigen::Index>(t), c) = triangles[t][c];
  }
  return mesh;
}

}  // namespace lim
