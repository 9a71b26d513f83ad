#include <Eigen/Geometry>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "lim/image.hpp"
#include "lim/ingest.hpp"
#include "lim/io.hpp"
#include "support.hpp"

using namespace lim;

namespace {

PlyData sample_ply() {
  PlyData d;
  d.vertices = test::uniform_points(7, 1);
  d.normals = Points(7, 3);
  for (int i = 0; i < 7; ++i) d.normals->row(i) = d.vertices.row(i).normalized();
  d.colors = Colors(7, 3);
  for (int i = 0; i < 7; ++i) d.colors->row(i) << 10 * i, 255 - i, 3;
  d.labels = std::vector<std::int32_t>{0, 1, -1, 4, 2, 2, 100000};
  d.faces.resize(2, 3);
  d.faces << 0, 1, 2, 3, 4, 6;
  return d;
}

void check_same(const PlyData& a, const PlyData& b) {
  // Positions and normals pass through float32.
  CHECK((a.vertices - b.vertices).cwiseAbs().maxCoeff() < 1e-6);
  REQUIRE(b.normals.has_value());
  CHECK((*a.normals - *b.normals).cwiseAbs().maxCoeff() < 1e-6);
  REQUIRE(b.colors.has_value());
  CHECK(*a.colors == *b.colors);
  REQUIRE(b.labels.has_value());
  CHECK(*a.labels == *b.labels);
  CHECK(a.faces == b.faces);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  os << text;
}

std::string read_text(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

}  // namespace

TEST_CASE("ply round trip in both encodings") {
  test::TempDir dir;
  const PlyData d = sample_ply();
  save_ply(dir.file("a.ply"), d, PlyFormat::kAscii);
  save_ply(dir.file("b.ply"), d, PlyFormat::kBinaryLittleEndian);
  check_same(d, load_ply(dir.file("a.ply")));
  check_same(d, load_ply(dir.file("b.ply")));
  CHECK(read_text(dir.file("b.ply")).find("format binary_little_endian 1.0") != std::string::npos);
}

TEST_CASE("ply polygons are fan triangulated") {
  test::TempDir dir;
  write_text(dir.file("quad.ply"),
             "ply\nformat ascii 1.0\ncomment q\nelement vertex 5\nproperty float x\nproperty float y\n"
             "property float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n"
             "0 0 0\n1 0 0\n1 1 0\n0 1 0\n0.5 1.5 0\n5 0 1 2 4 3\n");
  const PlyData d = load_ply(dir.file("quad.ply"));
  REQUIRE(d.faces.rows() == 3);
  CHECK(d.faces.row(0) == Eigen::RowVector3i(0, 1, 2));
  CHECK(d.faces.row(1) == Eigen::RowVector3i(0, 2, 4));
  CHECK(d.faces.row(2) == Eigen::RowVector3i(0, 4, 3));
  CHECK_FALSE(d.normals.has_value());
  CHECK_FALSE(d.labels.has_value());
}

TEST_CASE("ply errors name the element") {
  test::TempDir dir;
  const PlyData d = sample_ply();
  save_ply(dir.file("b.ply"), d, PlyFormat::kBinaryLittleEndian);
  std::string bin = read_text(dir.file("b.ply"));
  write_text(dir.file("short.ply"), bin.substr(0, bin.size() - 10));
  try {
    load_ply(dir.file("short.ply"));
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kParse);
    CHECK(std::string(e.what()).find("element 'face'") != std::string::npos);
  }
  save_ply(dir.file("a.ply"), d, PlyFormat::kAscii);
  std::string txt = read_text(dir.file("a.ply"));
  const auto header_end = txt.find("end_header\n") + 11;
  write_text(dir.file("ashort.ply"), txt.substr(0, txt.find('\n', header_end + 1) + 1));
  try {
    load_ply(dir.file("ashort.ply"));
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kParse);
    CHECK(std::string(e.what()).find("element 'vertex'") != std::string::npos);
    CHECK(std::string(e.what()).find("line") != std::string::npos);
  }
  write_text(dir.file("junk.ply"), "not a ply\n");
  CHECK(test::error_kind([&] { load_ply(dir.file("junk.ply")); }) == ErrorKind::kParse);
  CHECK(test::error_kind([&] { load_ply(dir.file("none.ply")); }) == ErrorKind::kIo);
}

TEST_CASE("mesh ply keeps colors from the color attribute") {
  test::TempDir dir;
  Mesh m;
  m.vertices = test::uniform_points(3, 2);
  m.triangles.resize(1, 3);
  m.triangles << 0, 1, 2;
  m.attributes["color"] = Matrix(3, 3);
  m.attributes["color"] << 0, 0.5, 1, 1.2, -0.1, 0.25, 0.1, 0.2, 0.3;
  save_mesh_ply(dir.file("m.ply"), m, PlyFormat::kBinaryLittleEndian);
  const Mesh back = load_mesh_ply(dir.file("m.ply"));
  CHECK(back.triangles == m.triangles);
  const Colors c = to_colors(m.attributes["color"]);
  CHECK(c(1, 0) == 255);
  CHECK(c(1, 1) == 0);
  CHECK(c(0, 1) == 128);
  CHECK((back.attributes.at("color") - from_colors(c)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("pose files in matrix and trajectory form") {
  test::TempDir dir;
  const Eigen::Quaterniond q = Eigen::Quaterniond(0.9, 0.1, -0.3, 0.2).normalized();
  write_text(dir.file("tum.txt"), "# timestamp tx ty tz qx qy qz qw\n1.0 1 2 3 " +
                                      std::to_string(q.x()) + " " + std::to_string(q.y()) + " " +
                                      std::to_string(q.z()) + " " + std::to_string(q.w()) +
                                      "\n2.0 0 0 0 0 0 0 1\n");
  const auto tum = load_poses(dir.file("tum.txt"));
  REQUIRE(tum.size() == 2);
  CHECK((tum[0].topLeftCorner<3, 3>() - q.toRotationMatrix()).cwiseAbs().maxCoeff() < 1e-5);
  CHECK(tum[0].block<3, 1>(0, 3) == Vec3(1, 2, 3));
  CHECK(tum[1] == Mat4::Identity());
  CHECK((quaternion_to_rotation(0.2, 0.6, -0.4, 1.8) -
         Eigen::Quaterniond(1.8, 0.2, 0.6, -0.4).normalized().toRotationMatrix()).cwiseAbs().maxCoeff() < 1e-12);

  write_text(dir.file("mat.txt"), "1 0 0 5 0 1 0 6 0 0 1 7 0 0 0 1\n");
  const auto mat = load_poses(dir.file("mat.txt"));
  REQUIRE(mat.size() == 1);
  CHECK(mat[0](1, 3) == 6.0);
  write_text(dir.file("bad.txt"), "1 2 3\n");
  CHECK(test::error_kind([&] { load_poses(dir.file("bad.txt")); }) == ErrorKind::kParse);
  Mat4 scaled = Mat4::Identity();
  scaled(0, 0) = 2.0;
  CHECK(test::error_kind([&] { validate_pose(scaled); }) == ErrorKind::kData);
}

TEST_CASE("png and feature image round trips") {
  test::TempDir dir;
  Image<std::uint8_t> rgb(5, 4, 3);
  for (std::size_t i = 0; i < rgb.data.size(); ++i) rgb.data[i] = static_cast<std::uint8_t>(i * 7);
  write_png8(dir.file("c.png"), rgb);
  const auto rgb2 = read_png8(dir.file("c.png"));
  CHECK(rgb2.channels == 3);
  CHECK(rgb2.data == rgb.data);
  CHECK(png_bit_depth(dir.file("c.png")) == 8);

  Image<std::uint16_t> d(6, 3, 1);
  for (std::size_t i = 0; i < d.data.size(); ++i) d.data[i] = static_cast<std::uint16_t>(i * 3001);
  write_png16(dir.file("d.png"), d);
  CHECK(read_png16(dir.file("d.png")).data == d.data);
  CHECK(png_bit_depth(dir.file("d.png")) == 16);
  CHECK(test::error_kind([&] { read_depth_image(dir.file("c.png")); }) == ErrorKind::kData);

  Image<float> f(3, 2, 5);
  for (std::size_t i = 0; i < f.data.size(); ++i) f.data[i] = 0.25f * static_cast<float>(i) - 1.0f;
  write_feature_image(dir.file("f.limf"), f);
  const auto f2 = read_feature_image(dir.file("f.limf"));
  CHECK(f2.channels == 5);
  CHECK(f2.data == f.data);
  std::string bytes = read_text(dir.file("f.limf"));
  write_text(dir.file("t.limf"), bytes.substr(0, bytes.size() - 4));
  CHECK(test::error_kind([&] { read_feature_image(dir.file("t.limf")); }) == ErrorKind::kParse);
  CHECK(test::error_kind([&] { read_png8(dir.file("none.png")); }) == ErrorKind::kIo);
}

TEST_CASE("unprojection inverts the pinhole model") {
  Intrinsics k{100.0, 120.0, 15.5, 11.5, 32, 24};
  Mat4 pose = Mat4::Identity();
  pose.topLeftCorner<3, 3>() = Eigen::AngleAxisd(0.4, Vec3(1, 2, 3).normalized()).toRotationMatrix();
  pose.block<3, 1>(0, 3) = Vec3(0.5, -1.0, 2.0);
  Image<std::uint16_t> depth(32, 24, 1);
  Image<std::uint8_t> color(32, 24, 3);
  for (int v = 0; v < 24; ++v) {
    for (int u = 0; u < 32; ++u) {
      depth.at(u, v) = (u + v) % 5 == 0 ? 0 : static_cast<std::uint16_t>(1000 + 10 * u + v);
      for (int c = 0; c < 3; ++c) color.at(u, v, c) = static_cast<std::uint8_t>(u * 8 + c);
    }
  }
  const Camera cam{k, pose};
  const Frame f = unproject(depth, cam, {{"color", color}});
  REQUIRE(f.properties.at("color").rows() == f.size());
  Eigen::Index i = 0;
  for (int v = 0; v < 24; ++v) {
    for (int u = 0; u < 32; ++u) {
      if (depth.at(u, v) == 0) continue;
      const double z = depth.at(u, v) / 1000.0;
      // Project back into the image.
      const Vec3 pc = pose.topLeftCorner<3, 3>().transpose() * (f.points.row(i).transpose() - pose.block<3, 1>(0, 3));
      CHECK(pc.z() == doctest::Approx(z).epsilon(1e-12));
      CHECK(k.fx * pc.x() / pc.z() + k.cx == doctest::Approx(u).epsilon(1e-9));
      CHECK(k.fy * pc.y() / pc.z() + k.cy == doctest::Approx(v).epsilon(1e-9));
      CHECK(f.properties.at("color")(i, 1) == doctest::Approx((u * 8 + 1) / 255.0));
      ++i;
    }
  }
  CHECK(i == f.size());
  UnprojectOptions near;
  near.max_depth = 1.1;
  CHECK(unproject(depth, cam, {}, near).size() < f.size());
  Image<std::uint16_t> wrong(31, 24, 1);
  CHECK(test::error_kind([&] { unproject(wrong, cam); }) == ErrorKind::kData);
}

TEST_CASE("manifest directives and frame loading") {
  test::TempDir dir;
  std::filesystem::create_directories(dir.path() / "sub");
  Image<std::uint16_t> depth(4, 3, 1, 2000);
  write_png16(dir.file("sub/d0.png"), depth);
  write_text(dir.file("poses.txt"), "0 0 0 0 0 0 0 1\n0 1 0 0 0 0 0 1\n");
  PlyData cloud;
  cloud.vertices = test::uniform_points(6, 3);
  save_ply(dir.file("c0.ply"), cloud, PlyFormat::kBinaryLittleEndian);
  Image<float> feat(6, 1, 2);
  for (std::size_t j = 0; j < feat.data.size(); ++j) feat.data[j] = static_cast<float>(j);
  write_feature_image(dir.file("c0.limf"), feat);
  Image<float> short_feat(5, 1, 2);
  write_feature_image(dir.file("c1.limf"), short_feat);
  write_text(dir.file("frames.txt"),
             "# test\nintrinsics 2 2 1.5 1 4 3\ndepth_scale 500\nposes poses.txt\n"
             "frame depth=sub/d0.png pose=1\n"
             "frame cloud=c0.ply pose=1,0,0,0,0,1,0,2,0,0,1,0,0,0,0,1 feature=c0.limf\n"
             "frame cloud=c0.ply pose=0 feature=c1.limf\n");
  const Manifest m = read_manifest(dir.file("frames.txt"));
  CHECK(m.depth_scale == 500.0);
  CHECK(m.intrinsics.width == 4);
  REQUIRE(m.frames.size() == 3);
  CHECK(m.frames[0].line == 5);
  CHECK(m.frames[0].pose(0, 3) == 1.0);
  CHECK(std::filesystem::path(*m.frames[0].depth) == dir.path() / "sub/d0.png");

  const Frame d0 = load_frame(m, m.frames[0]);
  CHECK(d0.size() == 12);
  CHECK(d0.points.col(2).minCoeff() == doctest::Approx(4.0));  // 2000 / 500

  const Frame c0 = load_frame(m, m.frames[1]);
  REQUIRE(c0.size() == 6);
  CHECK((c0.points.col(1).array() - cloud.vertices.col(1).array() - 2.0).abs().maxCoeff() < 1e-6);
  CHECK(c0.properties.at("feature")(3, 1) == 7.0);
  CHECK(test::error_kind([&] { load_frame(m, m.frames[2]); }) == ErrorKind::kData);

  const auto bad = [&](const std::string& text) {
    write_text(dir.file("bad.txt"), text);
    return test::error_kind([&] { read_manifest(dir.file("bad.txt")); });
  };
  CHECK(bad("frame depth=a.png\n") == ErrorKind::kParse);
  CHECK(bad("frame depth=a.png cloud=b.ply pose=1,0,0,0,0,1,0,0,0,0,1,0,0,0,0,1\n") == ErrorKind::kParse);
  CHECK(bad("frame depth=a.png pose=0\n") == ErrorKind::kParse);
  CHECK(bad("poses poses.txt\nframe depth=a.png pose=2\n") == ErrorKind::kParse);
  CHECK(bad("intrinsics 1 2 3\n") == ErrorKind::kParse);
  CHECK(bad("bogus 1\n") == ErrorKind::kParse);
  CHECK(test::error_kind([&] { read_manifest(dir.file("absent.txt")); }) == ErrorKind::kIo);
}
