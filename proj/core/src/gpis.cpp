#include "lim/gpis.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <string>

#include "lim/error.hpp"
#include "lim/spatial_index.hpp"

namespace lim {

void GpisConfig::validate() const {
  require(sample_distance > 0.0 && sample_distance < 0.5,
          "GPIS sample distance must lie in (0, 0.5)");
  require(mode != GpisMode::kSample || samples_per_point == 2,
          "sample-mode GPIS uses exactly two samples per point");
}

void OrientedPoints::validate() const {
  if (points.rows() != normals.rows()) {
    fail(ErrorKind::kData, "points and normals have different row counts");
  }
  for (Eigen::Index i = 0; i < normals.rows(); ++i) {
    if (std::abs(normals.row(i).norm() - 1.0) > 1e-6) {
      fail(ErrorKind::kData, "normal " + std::to_string(i) + " is not unit length");
    }
  }
}

NormalEstimate estimate_normals(const Points& points, int k, const Vec3& viewpoint) {
  require(k >= 3, "normal estimation needs k >= 3");
  require(points.rows() >= k, "normal estimation needs at least k points");
  const PointIndex index(points);
  NormalEstimate out;
  out.normals.resize(points.rows(), 3);
  out.degenerate.assign(points.rows(), false);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const Vec3 p = points.row(i).transpose();
    const auto nbrs = index.nearest(p, static_cast<std::size_t>(k));
    Vec3 mean = Vec3::Zero();
    for (auto j : nbrs) mean += points.row(j).transpose();
    mean /= static_cast<double>(nbrs.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (auto j : nbrs) {
      const Vec3 d = points.row(j).transpose() - mean;
      cov += d * d.transpose();
    }
    Vec3 to_view = viewpoint - p;
    if (to_view.norm() == 0.0) to_view = Vec3::UnitZ();
    Vec3 n;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    // Coincident or collinear neighbors leave the normal undetermined.
    if (cov.trace() <= 1e-24 || eig.eigenvalues()(1) <= 1e-12 * eig.eigenvalues()(2)) {
      n = to_view.normalized();
      out.degenerate[i] = true;
    } else {
      n = eig.eigenvectors().col(0).normalized();
      if (n.dot(to_view) < 0.0) n = -n;
    }
    out.normals.row(i) = n.transpose();
  }
  return out;
}

ExtendedSamples extend_samples(const OrientedPoints& op, double distance) {
  const Eigen::Index n = op.size();
  ExtendedSamples out;
  out.points.resize(3 * n, 3);
  out.values.resize(3 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto x = op.points.row(i);
    const auto s = op.normals.row(i);
    out.points.row(3 * i) = x;
    out.points.row(3 * i + 1) = x + distance * s;
    out.points.row(3 * i + 2) = x - distance * s;
    out.values(3 * i) = 0.0;
    out.values(3 * i + 1) = distance;
    out.values(3 * i + 2) = -distance;
  }
  return out;
}

namespace {

void check_count(const OrientedPoints& op, const EncodingConfig& cfg) {
  cfg.validate();
  if (op.size() < cfg.min_points) {
    fail(ErrorKind::kEmptyVoxel, "surface voxel has " + std::to_string(op.size()) +
                                     " points, fewer than " + std::to_string(cfg.min_points));
  }
  if (!op.points.allFinite() || !op.normals.allFinite()) {
    fail(ErrorKind::kData, "non-finite surface input");
  }
}

}  // namespace

LatentFeature encode_surface_sample(const PositionalEncoder& enc, const OrientedPoints& op,
                                    double distance, const EncodingConfig& cfg) {
  check_count(op, cfg);
  const ExtendedSamples ext = extend_samples(op, distance);
  return {solve_latent(enc.encode_batch(ext.points), ext.values, cfg.noise), FieldKind::kSdf};
}

GpisDesign derivative_design(const PositionalEncoder& enc, const OrientedPoints& op) {
  const Eigen::Index n = op.size();
  GpisDesign out;
  out.design.resize(enc.rank(), 4 * n);
  out.design.leftCols(n) = enc.encode_batch(op.points);
  for (int axis = 1; axis <= 3; ++axis) {
    out.design.middleCols(axis * n, n) = enc.encode_deriv_batch(op.points, axis);
  }
  out.targets.resize(4 * n);
  out.targets.head(n).setZero();
  for (int axis = 1; axis <= 3; ++axis) {
    out.targets.segment(axis * n, n) = op.normals.col(axis - 1);
  }
  return out;
}

LatentFeature encode_surface_derivative(const PositionalEncoder& enc, const OrientedPoints& op,
                                        const EncodingConfig& cfg) {
  check_count(op, cfg);
  const GpisDesign d = derivative_design(enc, op);
  return {solve_latent(d.design, d.targets, cfg.noise), FieldKind::kSdf};
}

LatentFeature encode_surface(const PositionalEncoder& enc, const OrientedPoints& op,
                             const GpisConfig& gpis, const EncodingConfig& cfg) {
  gpis.validate();
  if (gpis.mode == GpisMode::kSample) {
    return encode_surface_sample(enc, op, gpis.sample_distance, cfg);
  }
  return encode_surface_derivative(enc, op, cfg);
}

}  // namespace lim
