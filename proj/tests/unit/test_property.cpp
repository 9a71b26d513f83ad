#include <cmath>
#include <fstream>

#include "doctest.h"
#include "lim/property.hpp"
#include "support.hpp"

using namespace lim;

namespace {

const PositionalEncoder& basis() {
  static const PositionalEncoder enc = PositionalEncoder::build(BasisConfig{});
  return enc;
}

// Dense samples on the z = 0 plane with a linear RGB ramp.
Frame ramp_plane(int n, std::uint64_t seed) {
  Frame f;
  f.points = test::uniform_points(n, seed, 0.0, 0.4);
  f.points.col(2).setZero();
  Matrix rgb(n, 3);
  for (int i = 0; i < n; ++i) {
    const double x = f.points(i, 0), y = f.points(i, 1);
    rgb.row(i) << 0.2 + x, 0.8 - y, 0.5 + 0.5 * (x - y);
  }
  f.properties["color"] = rgb;
  return f;
}

Matrix prototypes(int c) { return test::uniform_matrix(2, c, 4); }

// Two feature regions split at x = 0.2.
Frame two_regions(int n, int c) {
  Frame f = ramp_plane(n, 3);
  const Matrix proto = prototypes(c);
  Matrix feat(n, c);
  for (int i = 0; i < n; ++i) feat.row(i) = proto.row(f.points(i, 0) < 0.2 ? 0 : 1);
  f.properties["feature"] = feat;
  return f;
}

LatentImplicitMap feature_map(const Frame& f) {
  PropertyConfig cfg;
  cfg.voxel_size = 0.04;
  cfg.kind = FieldKind::kFeature;
  return build_property_lim(f, "feature", basis(), cfg);
}

}  // namespace

TEST_CASE("property voxels hold the latent of their assigned points") {
  const Frame f = ramp_plane(3000, 1);
  PropertyConfig cfg;
  cfg.voxel_size = 0.05;
  const LatentImplicitMap m = build_property_lim(f, "color", basis(), cfg);
  CHECK(m.config().channels == 3);
  CHECK(m.config().kind == FieldKind::kProperty);
  const auto assigned = assign_points_overlapped(f.points, cfg.voxel_size);
  std::size_t kept = 0;
  for (const auto& a : assigned) {
    const Voxel* v = m.find(a.key);
    if (a.rows.size() < 4) {
      CHECK(v == nullptr);
      continue;
    }
    REQUIRE(v != nullptr);
    ++kept;
    CHECK(v->weight == a.rows.size());
    Matrix y(a.rows.size(), 3);
    for (std::size_t r = 0; r < a.rows.size(); ++r) y.row(r) = f.properties.at("color").row(a.rows[r]);
    const LatentFeature want = encode(basis(), a.coords, y, cfg.encoding);
    CHECK((v->feature.matrix - want.matrix).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK(kept == m.size());
  CHECK(test::error_kind([&] { build_property_lim(f, "missing", basis(), cfg); }) == ErrorKind::kData);
}

TEST_CASE("colorized vertices follow a smooth color field") {
  const Frame f = ramp_plane(20000, 2);
  PropertyConfig cfg;
  cfg.voxel_size = 0.02;
  const LatentImplicitMap m = build_property_lim(f, "color", basis(), cfg);
  Mesh mesh;
  mesh.vertices = test::uniform_points(300, 5, 0.05, 0.35);
  mesh.vertices.col(2).setZero();
  mesh.vertices.conservativeResize(301, 3);
  mesh.vertices.row(300) << 5.0, 5.0, 5.0;  // far from any voxel
  mesh.triangles.resize(0, 3);
  const Mesh out = colorize_mesh(m, basis(), mesh);
  const Matrix& c = out.attributes.at("color");
  const Matrix& valid = out.attributes.at("color_valid");
  CHECK(valid(300, 0) == 0.0);
  double worst = 0.0;
  for (int v = 0; v < 300; ++v) {
    REQUIRE(valid(v, 0) == 1.0);
    const double x = mesh.vertices(v, 0), y = mesh.vertices(v, 1);
    const Vec3 want(0.2 + x, 0.8 - y, 0.5 + 0.5 * (x - y));
    worst = std::max(worst, (c.row(v).transpose() - want).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 0.03);
}

TEST_CASE("similarity is invariant to query scale") {
  const Frame f = two_regions(8000, 16);
  const LatentImplicitMap m = feature_map(f);
  const Points q = test::uniform_points(50, 6, 0.05, 0.35).array() * Eigen::Array<double, 1, 3>(1, 1, 0).replicate(50, 1);
  const Vector proto = prototypes(16).row(0).transpose();
  const ScoreResult a = similarity_query(m, basis(), q, proto);
  const ScoreResult b = similarity_query(m, basis(), q, 3.5 * proto);
  for (int i = 0; i < q.rows(); ++i) {
    REQUIRE(a.valid[i]);
    CHECK(a.scores[i] == doctest::Approx(b.scores[i]).epsilon(1e-12));
    CHECK(std::abs(a.scores[i]) <= 1.0 + 1e-12);
    // Oracle: cosine of the decoded feature.
    const QueryResult d = query(m, basis(), q.row(i));
    const double cosv = d.values.row(0).dot(proto.transpose()) / (d.values.row(0).norm() * proto.norm());
    CHECK(a.scores[i] == doctest::Approx(cosv).epsilon(1e-12));
  }
  CHECK(test::error_kind([&] { similarity_query(m, basis(), q, Vector::Ones(5)); }) == ErrorKind::kData);
  CHECK(test::error_kind([&] { similarity_query(m, basis(), q, Vector::Zero(16)); }) == ErrorKind::kInvalidArgument);
  PropertyConfig pc;
  const LatentImplicitMap color = build_property_lim(f, "color", basis(), pc);
  CHECK(test::error_kind([&] { similarity_query(color, basis(), q, Vector::Ones(3)); }) == ErrorKind::kInvalidArgument);
}

TEST_CASE("classification separates two regions") {
  const Frame f = two_regions(8000, 16);
  const LatentImplicitMap m = feature_map(f);
  const Matrix proto = prototypes(16);
  Points q(4, 3);
  q << 0.05, 0.2, 0.0,  0.15, 0.1, 0.0,  0.26, 0.2, 0.0,  0.35, 0.3, 0.0;
  const Classification c = classify_points(m, basis(), q, proto);
  CHECK(c.labels == std::vector<int>{0, 0, 1, 1});
  for (int i = 0; i < 4; ++i) CHECK(c.best_scores[i] > 0.9);

  const Classification strict = classify_points(m, basis(), q, proto, 1.01);
  CHECK(strict.labels == std::vector<int>{-1, -1, -1, -1});
  CHECK(strict.best_scores[0] == doctest::Approx(c.best_scores[0]));

  Matrix dup(3, proto.cols());
  dup.row(0) = proto.row(1);
  dup.row(1) = proto.row(0);
  dup.row(2) = 2.0 * proto.row(0);  // same direction as row 1
  const Classification tie = classify_points(m, basis(), q, dup);
  CHECK(tie.labels[0] == 1);
  CHECK(tie.labels[3] == 0);

  Points far(1, 3);
  far << 9, 9, 9;
  const Classification none = classify_points(m, basis(), far, proto);
  CHECK(none.labels[0] == -1);
  CHECK(std::isnan(none.best_scores[0]));
  CHECK(test::error_kind([&] { classify_points(m, basis(), q, proto.leftCols(8)); }) == ErrorKind::kData);
}

TEST_CASE("label vector files") {
  test::TempDir dir;
  {
    std::ofstream os(dir.file("ok.txt"));
    os << "# name values\nchair 1 0 0\n\ntable 0 1.5e0 -2\n";
  }
  const LabelSet ls = read_label_vectors(dir.file("ok.txt"));
  CHECK(ls.names == std::vector<std::string>{"chair", "table"});
  CHECK(ls.vectors.rows() == 2);
  CHECK(ls.vectors(1, 1) == 1.5);
  CHECK(ls.vectors(1, 2) == -2.0);
  {
    std::ofstream os(dir.file("ragged.txt"));
    os << "a 1 2 3\nb 1 2\n";
  }
  CHECK(test::error_kind([&] { read_label_vectors(dir.file("ragged.txt")); }) == ErrorKind::kParse);
  {
    std::ofstream os(dir.file("bad.txt"));
    os << "a 1 2x 3\n";
  }
  CHECK(test::error_kind([&] { read_label_vectors(dir.file("bad.txt")); }) == ErrorKind::kParse);
  {
    std::ofstream os(dir.file("empty.txt"));
    os << "# nothing\n";
  }
  CHECK(test::error_kind([&] { read_label_vectors(dir.file("empty.txt")); }) == ErrorKind::kParse);
  CHECK(test::error_kind([&] { read_label_vectors(dir.file("absent.txt")); }) == ErrorKind::kIo);
}
