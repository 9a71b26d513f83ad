#include "lim/metrics.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "lim/error.hpp"
#include "lim/parallel.hpp"
#include "lim/spatial_index.hpp"

namespace lim {

Points sample_mesh_surface(const Mesh& mesh, std::size_t n, std::uint64_t seed) {
  mesh.validate();
  Points out(0, 3);
  if (mesh.triangle_count() == 0 || n == 0) return out;
  std::vector<double> cumulative(static_cast<std::size_t>(mesh.triangle_count()));
  double total = 0.0;
  for (Eigen::Index t = 0; t < mesh.triangle_count(); ++t) {
    const Vec3 a = mesh.vertices.row(mesh.triangles(t, 0));
    const Vec3 b = mesh.vertices.row(mesh.triangles(t, 1));
    const Vec3 c = mesh.vertices.row(mesh.triangles(t, 2));
    total += 0.5 * (b - a).cross(c - a).norm();
    cumulative[static_cast<std::size_t>(t)] = total;
  }
  if (!(total > 0.0)) return out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  out.resize(static_cast<Eigen::Index>(n), 3);
  for (std::size_t i = 0; i < n; ++i) {
    const double pick = uni(rng) * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    if (it == cumulative.end()) --it;
    const auto t = static_cast<Eigen::Index>(it - cumulative.begin());
    double r1 = uni(rng);
    double r2 = uni(rng);
    if (r1 + r2 > 1.0) {
      r1 = 1.0 - r1;
      r2 = 1.0 - r2;
    }
    const Vec3 a = mesh.vertices.row(mesh.triangles(t, 0));
    const Vec3 b = mesh.vertices.row(mesh.triangles(t, 1));
    const Vec3 c = mesh.vertices.row(mesh.triangles(t, 2));
    out.row(static_cast<Eigen::Index>(i)) = (a + r1 * (b - a) + r2 * (c - a)).transpose();
  }
  return out;
}

namespace {

// Mean distance and the fraction within `threshold`, from each `from` point
// to its nearest `to` point.
std::pair<double, double> one_way(const Points& from, const Points& to, double threshold) {
  if (from.rows() == 0) return {0.0, 0.0};
  if (to.rows() == 0) return {std::numeric_limits<double>::infinity(), 0.0};
  const PointIndex index(to);
  std::vector<double> d(static_cast<std::size_t>(from.rows()));
  parallel_for(d.size(), [&](std::size_t i) {
    d[i] = index.nearest_distance(from.row(static_cast<Eigen::Index>(i)).transpose());
  });
  double sum = 0.0;
  std::size_t inside = 0;
  for (double x : d) {
    sum += x;
    if (x < threshold) ++inside;
  }
  return {sum / static_cast<double>(d.size()), static_cast<double>(inside) / static_cast<double>(d.size())};
}

}  // namespace

SurfaceMetrics compare_surfaces(const Points& reconstruction, const Points& reference,
                                double threshold) {
  require(threshold > 0.0, "metric threshold must be positive");
  SurfaceMetrics m;
  std::tie(m.accuracy, m.precision) = one_way(reconstruction, reference, threshold);
  std::tie(m.completeness, m.recall) = one_way(reference, reconstruction, threshold);
  const double s = m.precision + m.recall;
  m.f1 = s > 0.0 ? 2.0 * m.precision * m.recall / s : 0.0;
  return m;
}

RenderMetrics compare_renders(const Image<float>& depth, const Image<float>& color,
                              const Image<std::uint8_t>& color_valid,
                              const Image<float>& ref_depth, const Image<float>& ref_color,
                              const Image<std::uint8_t>& ref_valid) {
  require(depth.width == ref_depth.width && depth.height == ref_depth.height,
          "render sizes differ");
  RenderMetrics m;
  double l1 = 0.0;
  for (std::size_t i = 0; i < depth.data.size(); ++i) {
    if (depth.data[i] > 0.0f && ref_depth.data[i] > 0.0f) {
      l1 += std::abs(static_cast<double>(depth.data[i]) - ref_depth.data[i]);
      ++m.depth_pixels;
    }
  }
  m.depth_l1 = m.depth_pixels ? l1 / static_cast<double>(m.depth_pixels) : 0.0;

  if (color.data.empty() || ref_color.data.empty()) return m;
  require(color.channels == ref_color.channels, "render channel counts differ");
  double se = 0.0;
  std::size_t values = 0;
  for (int v = 0; v < color.height; ++v) {
    for (int u = 0; u < color.width; ++u) {
      if (!color_valid.at(u, v) || !ref_valid.at(u, v)) continue;
      ++m.color_pixels;
      for (int c = 0; c < color.channels; ++c) {
        const double e = std::clamp(static_cast<double>(color.at(u, v, c)), 0.0, 1.0) -
                         std::clamp(static_cast<double>(ref_color.at(u, v, c)), 0.0, 1.0);
        se += e * e;
        ++values;
      }
    }
  }
  if (values > 0) {
    const double mse = se / static_cast<double>(values);
    m.psnr = mse > 0.0 ? 10.0 * std::log10(1.0 / mse) : std::numeric_limits<double>::infinity();
  }
  return m;
}

}  // namespace lim
