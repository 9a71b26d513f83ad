#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "lim/gpis.hpp"
#include "support.hpp"

using namespace lim;

namespace {

const PositionalEncoder& basis() {
  static const PositionalEncoder enc = PositionalEncoder::build(BasisConfig{});
  return enc;
}

// Points on the tilted plane n . x = 0 within the normalized cube.
OrientedPoints tilted_plane(int n, std::uint64_t seed, const Vec3& normal) {
  const Vec3 u = normal.unitOrthogonal();
  const Vec3 v = normal.cross(u);
  const Points ab = test::uniform_points(n, seed, -0.4, 0.4);
  OrientedPoints op;
  op.points.resize(n, 3);
  op.normals.resize(n, 3);
  for (int i = 0; i < n; ++i) {
    op.points.row(i) = (ab(i, 0) * u + ab(i, 1) * v).transpose();
    op.normals.row(i) = normal.transpose();
  }
  return op;
}

double angle_deg(const Vec3& a, const Vec3& b) {
  return std::acos(std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

}  // namespace

TEST_CASE("extended samples keep point, outside, inside order") {
  OrientedPoints op;
  op.points = Points(2, 3);
  op.points << 0.1, 0.2, 0.3, -0.1, 0.0, 0.2;
  op.normals = Points(2, 3);
  op.normals << 0, 0, 1, 1, 0, 0;
  const ExtendedSamples s = extend_samples(op, 0.1);
  REQUIRE(s.points.rows() == 6);
  CHECK((s.points.row(0) - op.points.row(0)).norm() == 0.0);
  CHECK(s.values(0) == 0.0);
  CHECK((s.points.row(1) - Vec3(0.1, 0.2, 0.4).transpose()).norm() < 1e-15);
  CHECK(s.values(1) == doctest::Approx(0.1));
  CHECK((s.points.row(2) - Vec3(0.1, 0.2, 0.2).transpose()).norm() < 1e-15);
  CHECK(s.values(2) == doctest::Approx(-0.1));
  CHECK((s.points.row(4) - Vec3(0.0, 0.0, 0.2).transpose()).norm() < 1e-15);
  CHECK(s.values(5) == doctest::Approx(-0.1));
}

TEST_CASE("sample-based surface fits a tilted plane") {
  const Vec3 n = Vec3(0.3, -0.4, 0.85).normalized();
  const OrientedPoints op = tilted_plane(200, 3, n);
  const LatentFeature f = encode_surface_sample(basis(), op, 0.1, EncodingConfig::defaults_for(FieldKind::kSdf));
  CHECK(f.kind == FieldKind::kSdf);
  const Matrix v = decode_batch(basis(), f, op.points);
  CHECK(v.cwiseAbs().maxCoeff() < 0.05);
  const Points g = decode_gradient_batch(basis(), f, op.points);
  double worst = 0.0;
  for (int i = 0; i < g.rows(); ++i) worst = std::max(worst, angle_deg(g.row(i).transpose(), n));
  CHECK(worst < 10.0);
  // Sign: positive on the free side.
  CHECK(decode(basis(), f, 0.1 * n)(0) > 0.0);
  CHECK(decode(basis(), f, -0.1 * n)(0) < 0.0);
}

TEST_CASE("derivative design stacks values and axis derivatives") {
  const OrientedPoints op = tilted_plane(30, 5, Vec3::UnitZ());
  const GpisDesign d = derivative_design(basis(), op);
  REQUIRE(d.design.cols() == 120);
  REQUIRE(d.targets.size() == 120);
  CHECK((d.design.leftCols(30) - basis().encode_batch(op.points)).cwiseAbs().maxCoeff() == 0.0);
  for (int a = 1; a <= 3; ++a) {
    CHECK((d.design.middleCols(30 * a, 30) - basis().encode_deriv_batch(op.points, a)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((d.targets.segment(30 * a, 30) - op.normals.col(a - 1)).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(d.targets.head(30).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("derivative-based surface fits a tilted plane") {
  const Vec3 n = Vec3(-0.5, 0.2, 0.84).normalized();
  const OrientedPoints op = tilted_plane(200, 6, n);
  GpisConfig g;
  g.mode = GpisMode::kDerivative;
  const LatentFeature f = encode_surface(basis(), op, g, EncodingConfig::defaults_for(FieldKind::kSdf));
  CHECK(decode_batch(basis(), f, op.points).cwiseAbs().maxCoeff() < 0.05);
  const Points grad = decode_gradient_batch(basis(), f, op.points);
  double worst = 0.0;
  for (int i = 0; i < grad.rows(); ++i) worst = std::max(worst, angle_deg(grad.row(i).transpose(), n));
  CHECK(worst < 10.0);
}

TEST_CASE("point minimum applies to surface points") {
  const OrientedPoints op = tilted_plane(5, 7, Vec3::UnitZ());
  CHECK(test::error_kind([&] {
          encode_surface_sample(basis(), op, 0.1, EncodingConfig::defaults_for(FieldKind::kSdf));
        }) == ErrorKind::kEmptyVoxel);
  GpisConfig g;
  g.mode = GpisMode::kDerivative;
  CHECK(test::error_kind([&] {
          encode_surface(basis(), op, g, EncodingConfig::defaults_for(FieldKind::kSdf));
        }) == ErrorKind::kEmptyVoxel);
  GpisConfig bad;
  bad.sample_distance = 0.0;
  CHECK(test::error_kind([&] { bad.validate(); }) == ErrorKind::kInvalidArgument);
}

TEST_CASE("pca normals on a plane orient toward the viewpoint") {
  const Vec3 n = Vec3(0.2, 0.1, 1.0).normalized();
  const OrientedPoints op = tilted_plane(500, 8, n);
  const NormalEstimate up = estimate_normals(op.points, 10, 5.0 * n);
  const NormalEstimate down = estimate_normals(op.points, 10, -5.0 * n);
  for (int i = 0; i < op.points.rows(); ++i) {
    CHECK_FALSE(up.degenerate[i]);
    CHECK(angle_deg(up.normals.row(i).transpose(), n) < 1.0);
    CHECK(angle_deg(down.normals.row(i).transpose(), -n) < 1.0);
  }
}

TEST_CASE("collinear neighborhoods fall back to the view direction") {
  Points line(20, 3);
  for (int i = 0; i < 20; ++i) line.row(i) = Vec3(0.01 * i, 0.0, 0.0).transpose();
  const Vec3 eye(0.1, 0.0, 2.0);
  const NormalEstimate e = estimate_normals(line, 5, eye);
  for (int i = 0; i < 20; ++i) {
    CHECK(e.degenerate[i]);
    const Vec3 want = (eye - line.row(i).transpose()).normalized();
    CHECK(angle_deg(e.normals.row(i).transpose(), want) < 1e-6);
  }
}

TEST_CASE("oriented points validation") {
  OrientedPoints op = tilted_plane(10, 9, Vec3::UnitZ());
  op.validate();
  op.normals(3, 2) = 0.5;
  CHECK(test::error_kind([&] { op.validate(); }) == ErrorKind::kData);
  op.normals.conservativeResize(9, 3);
  CHECK(test::error_kind([&] { op.validate(); }) == ErrorKind::kData);
}
