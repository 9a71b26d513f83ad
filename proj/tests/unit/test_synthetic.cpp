#include <cmath>
#include <numbers>

#include "doctest.h"
#include "lim/metrics.hpp"
#include "lim/synthetic.hpp"
#include "support.hpp"

using namespace lim;

TEST_CASE("scene spec text round trip") {
  const SceneSpec s = parse_scene_spec("kind=room density=1500 # comment\nnoise=0.002 color=two_tone\nfeatures=8 frames=3 seed=9 radius=2");
  CHECK(s.kind == SceneKind::kRoom);
  CHECK(s.density == 1500.0);
  CHECK(s.noise_std == 0.002);
  CHECK(s.color == ColorFn::kTwoTone);
  CHECK(s.feature_dim == 8);
  CHECK(s.frames == 3);
  CHECK(s.seed == 9);
  CHECK(s.radius == 2.0);
  const SceneSpec back = parse_scene_spec(to_string(s));
  CHECK(to_string(back) == to_string(s));
  CHECK(test::error_kind([] { parse_scene_spec("kind=torus"); }) == ErrorKind::kParse);
  CHECK(test::error_kind([] { parse_scene_spec("points"); }) == ErrorKind::kParse);
  CHECK(test::error_kind([] { parse_scene_spec("points=abc"); }) == ErrorKind::kParse);
  SceneSpec bad;
  bad.frames = 0;
  CHECK(test::error_kind([&] { bad.validate(); }) == ErrorKind::kInvalidArgument);
}

TEST_CASE("scenes are deterministic in their seed") {
  SceneSpec s;
  s.kind = SceneKind::kBox;
  s.points = 3000;
  s.frames = 2;
  s.noise_std = 0.001;
  const SyntheticScene a(s), b(s);
  REQUIRE(a.frames().size() == 2);
  CHECK(a.frames()[0].points == b.frames()[0].points);
  CHECK(a.frames()[1].properties.at("color") == b.frames()[1].properties.at("color"));
  CHECK(a.merged().size() == 3000);
  s.seed = 2;
  const SyntheticScene c(s);
  CHECK(c.frames()[0].points != a.frames()[0].points);
}

TEST_CASE("noise-free samples lie on the surface with exact normals") {
  for (SceneKind kind : {SceneKind::kSphere, SceneKind::kBox, SceneKind::kRoom}) {
    SceneSpec s;
    s.kind = kind;
    s.points = 4000;
    s.feature_dim = 4;
    const SyntheticScene scene(s);
    const Frame f = scene.merged();
    REQUIRE(f.normals.has_value());
    for (int i = 0; i < f.size(); ++i) {
      const Vec3 p = f.points.row(i).transpose();
      CHECK(std::abs(scene.sdf(p)) < 1e-9);
      CHECK((f.normals->row(i).transpose() - scene.normal(p)).norm() < 1e-9);
      CHECK((f.properties.at("color").row(i).transpose() - scene.color(p)).norm() < 1e-12);
      const Vector feat = f.properties.at("feature").row(i).transpose();
      CHECK((feat - scene.region_features().row(scene.region(p)).transpose()).norm() < 1e-12);
    }
    const Points surf = scene.sample_surface(500, 3);
    CHECK(surf.rows() <= 501);
    CHECK(surf.rows() >= 450);
    for (int i = 0; i < surf.rows(); ++i) CHECK(std::abs(scene.sdf(surf.row(i).transpose())) < 1e-9);
  }
}

TEST_CASE("sphere area and density") {
  SceneSpec s;
  s.radius = 0.8;
  s.density = 1000.0;
  const SyntheticScene scene(s);
  CHECK(scene.surface_area() == doctest::Approx(4.0 * std::numbers::pi * 0.64));
  CHECK(static_cast<double>(scene.merged().size()) == doctest::Approx(1000.0 * scene.surface_area()).epsilon(0.01));
}

TEST_CASE("analytic render hits the sphere where the ray does") {
  SceneSpec s;
  s.radius = 1.0;
  s.points = 100;
  const SyntheticScene scene(s);
  Intrinsics k{60.0, 60.0, 31.5, 23.5, 64, 48};
  const Camera cam{k, look_at(Vec3(0, -4, 0.5), Vec3::Zero())};
  const RenderResult r = scene.render(cam);
  int hits = 0;
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const Vec3 dir = cam.pose.topLeftCorner<3, 3>() * pixel_direction(k, u, v);
      const Vec3 o = cam.origin();
      // Oracle: quadratic ray-sphere intersection.
      const double a = dir.squaredNorm(), b = 2 * o.dot(dir), c = o.squaredNorm() - 1.0;
      const double disc = b * b - 4 * a * c;
      const float d = r.depth.at(u, v);
      if (disc < 0) {
        CHECK(d == 0.0f);
        continue;
      }
      const double t = (-b - std::sqrt(disc)) / (2 * a);
      CHECK(d == doctest::Approx(t).epsilon(1e-5));
      CHECK(r.property_valid.at(u, v) == 1);
      const Vec3 col = scene.color(o + t * dir);
      CHECK(r.property.at(u, v, 0) == doctest::Approx(col.x()).epsilon(1e-4));
      ++hits;
    }
  }
  CHECK(hits > 300);
}

TEST_CASE("surface metrics against shifted copies") {
  const Points ref = test::uniform_points(2000, 1);
  const SurfaceMetrics same = compare_surfaces(ref, ref, 0.025);
  CHECK(same.accuracy == 0.0);
  CHECK(same.f1 == 1.0);
  Points near = ref;
  near.col(0).array() += 0.001;
  const SurfaceMetrics n = compare_surfaces(near, ref, 0.025);
  CHECK(n.accuracy <= 0.001 + 1e-12);
  CHECK(n.precision == 1.0);
  CHECK(n.recall == 1.0);
  Points far = ref;
  far.col(0).array() += 10.0;
  const SurfaceMetrics f = compare_surfaces(far, ref, 0.025);
  CHECK(f.precision == 0.0);
  CHECK(f.f1 == 0.0);
  // Half the reference missing: precision 1, recall about 1/2.
  const Points half = ref.topRows(1000);
  const SurfaceMetrics h = compare_surfaces(half, ref, 1e-6);
  CHECK(h.precision == 1.0);
  CHECK(h.recall == doctest::Approx(0.5));
  CHECK(h.f1 == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("mesh surface sampling is area weighted") {
  Mesh m;
  m.vertices.resize(6, 3);
  m.vertices << 0, 0, 0, 1, 0, 0, 0, 1, 0,  5, 0, 0, 7, 0, 0, 5, 2, 0;  // areas 0.5 and 2
  m.triangles.resize(2, 3);
  m.triangles << 0, 1, 2, 3, 4, 5;
  const Points s = sample_mesh_surface(m, 10000, 7);
  int small = 0;
  for (int i = 0; i < s.rows(); ++i) small += s(i, 0) < 2.0;
  CHECK(small / 10000.0 == doctest::Approx(0.2).epsilon(0.1));
  CHECK(s.col(2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("render metrics") {
  Image<float> d(4, 1, 1), rd(4, 1, 1);
  d.data = {1.0f, 2.0f, 0.0f, 3.0f};
  rd.data = {1.5f, 2.0f, 1.0f, 0.0f};
  Image<float> c(4, 1, 1), rc(4, 1, 1);
  c.data = {0.5f, 0.2f, 0.9f, 1.5f};
  rc.data = {0.4f, 0.2f, 0.0f, 1.0f};
  Image<std::uint8_t> cv(4, 1, 1, 1), rv(4, 1, 1, 1);
  cv.data[2] = 0;
  const RenderMetrics m = compare_renders(d, c, cv, rd, rc, rv);
  CHECK(m.depth_pixels == 2);
  CHECK(m.depth_l1 == doctest::Approx(0.25));
  CHECK(m.color_pixels == 3);
  // Errors 0.1, 0, 0 (1.5 clamps to 1).
  CHECK(m.psnr == doctest::Approx(10.0 * std::log10(3.0 / 0.01)).epsilon(1e-6));
}
