#include "lim/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "lim/error.hpp"
#include "lim/parallel.hpp"

namespace lim {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double box_sdf(const Vec3& p, const Vec3& c, const Vec3& h) {
  const Vec3 q = (p - c).cwiseAbs() - h;
  return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
}

Vec3 box_normal(const Vec3& p, const Vec3& c, const Vec3& h) {
  const Vec3 d = p - c;
  const Vec3 q = d.cwiseAbs() - h;
  if (q.maxCoeff() > 0.0) {
    Vec3 n = q.cwiseMax(0.0);
    for (int a = 0; a < 3; ++a) n[a] = std::copysign(n[a], d[a]);
    return n.normalized();
  }
  int axis = 0;
  q.maxCoeff(&axis);
  Vec3 n = Vec3::Zero();
  n[axis] = d[axis] >= 0.0 ? 1.0 : -1.0;
  return n;
}

// Entry and exit parameters of the ray through an axis-aligned box.
std::pair<double, double> slab(const Vec3& o, const Vec3& d, const Vec3& c, const Vec3& h) {
  double t0 = -kInf;
  double t1 = kInf;
  for (int a = 0; a < 3; ++a) {
    const double lo = c[a] - h[a];
    const double hi = c[a] + h[a];
    if (d[a] == 0.0) {
      if (o[a] < lo || o[a] > hi) return {kInf, -kInf};
      continue;
    }
    double n = (lo - o[a]) / d[a];
    double f = (hi - o[a]) / d[a];
    if (n > f) std::swap(n, f);
    t0 = std::max(t0, n);
    t1 = std::min(t1, f);
  }
  return {t0, t1};
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return s;
}

}  // namespace

void SceneSpec::validate() const {
  require(points > 0 || density > 0.0, "scene density must be positive");
  require(noise_std >= 0.0, "scene noise must be non-negative");
  require(frames >= 1, "scene needs at least one frame");
  require(feature_dim >= 0, "feature dimension must be non-negative");
  require(radius > 0.0, "scene radius must be positive");
}

SceneSpec parse_scene_spec(const std::string& text) {
  SceneSpec spec;
  std::istringstream lines(text);
  std::string line;
  int line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) {
      const auto eq = tok.find('=');
      const std::string where = "scene spec line " + std::to_string(line_no);
      if (eq == std::string::npos) fail(ErrorKind::kParse, where + ": expected key=value");
      const std::string key = lower(tok.substr(0, eq));
      const std::string value = tok.substr(eq + 1);
      try {
        if (key == "kind") {
          const std::string v = lower(value);
          if (v == "sphere") {
            spec.kind = SceneKind::kSphere;
          } else if (v == "box") {
            spec.kind = SceneKind::kBox;
          } else if (v == "room") {
            spec.kind = SceneKind::kRoom;
          } else {
            fail(ErrorKind::kParse, where + ": unknown scene kind '" + value + "'");
          }
        } else if (key == "color") {
          const std::string v = lower(value);
          if (v == "smooth") {
            spec.color = ColorFn::kSmooth;
          } else if (v == "two_tone") {
            spec.color = ColorFn::kTwoTone;
          } else if (v == "constant") {
            spec.color = ColorFn::kConstant;
          } else {
            fail(ErrorKind::kParse, where + ": unknown color function '" + value + "'");
          }
        } else if (key == "points") {
          spec.points = std::stoull(value);
        } else if (key == "density") {
          spec.density = std::stod(value);
        } else if (key == "noise") {
          spec.noise_std = std::stod(value);
        } else if (key == "features") {
          spec.feature_dim = std::stoi(value);
        } else if (key == "frames") {
          spec.frames = std::stoi(value);
        } else if (key == "seed") {
          spec.seed = std::stoull(value);
        } else if (key == "radius") {
          spec.radius = std::stod(value);
        } else {
          fail(ErrorKind::kParse, where + ": unknown key '" + key + "'");
        }
      } catch (const std::logic_error&) {
        fail(ErrorKind::kParse, where + ": bad value for '" + key + "'");
      }
    }
  }
  spec.validate();
  return spec;
}

SceneSpec read_scene_spec(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorKind::kIo, "cannot open " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_scene_spec(ss.str());
}

std::string to_string(const SceneSpec& spec) {
  static const char* kinds[] = {"sphere", "box", "room"};
  static const char* colors[] = {"smooth", "two_tone", "constant"};
  std::ostringstream os;
  os.precision(17);
  os << "kind=" << kinds[static_cast<int>(spec.kind)] << "\n"
     << "points=" << spec.points << "\n"
     << "density=" << spec.density << "\n"
     << "noise=" << spec.noise_std << "\n"
     << "color=" << colors[static_cast<int>(spec.color)] << "\n"
     << "features=" << spec.feature_dim << "\n"
     << "frames=" << spec.frames << "\n"
     << "seed=" << spec.seed << "\n"
     << "radius=" << spec.radius << "\n";
  return os.str();
}

Mat4 look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 z = (target - eye).normalized();
  Vec3 x = z.cross(up);
  require(x.norm() > 1e-9, "look_at: view direction is parallel to up");
  x.normalize();
  const Vec3 y = z.cross(x);
  Mat4 pose = Mat4::Identity();
  pose.block<3, 1>(0, 0) = x;
  pose.block<3, 1>(0, 1) = y;
  pose.block<3, 1>(0, 2) = z;
  pose.block<3, 1>(0, 3) = eye;
  return pose;
}

double SyntheticScene::Primitive::area() const {
  if (type == Type::kSphere) return 4.0 * std::numbers::pi * half.x() * half.x();
  return 8.0 * (half.x() * half.y() + half.y() * half.z() + half.x() * half.z());
}

double SyntheticScene::Primitive::sdf(const Vec3& p) const {
  switch (type) {
    case Type::kSphere: return (p - center).norm() - half.x();
    case Type::kBox: return box_sdf(p, center, half);
    case Type::kShell: return -box_sdf(p, center, half);
  }
  return kInf;
}

Vec3 SyntheticScene::Primitive::normal(const Vec3& p) const {
  switch (type) {
    case Type::kSphere: {
      const Vec3 d = p - center;
      return d.norm() > 0.0 ? Vec3(d.normalized()) : Vec3::UnitZ();
    }
    case Type::kBox: return box_normal(p, center, half);
    case Type::kShell: return -box_normal(p, center, half);
  }
  return Vec3::UnitZ();
}

double SyntheticScene::Primitive::intersect(const Vec3& o, const Vec3& d) const {
  switch (type) {
    case Type::kSphere: {
      const Vec3 oc = o - center;
      const double a = d.squaredNorm();
      const double b = oc.dot(d);
      const double c = oc.squaredNorm() - half.x() * half.x();
      const double disc = b * b - a * c;
      if (disc < 0.0) return kInf;
      const double t = (-b - std::sqrt(disc)) / a;
      return t > 0.0 ? t : kInf;
    }
    case Type::kBox: {
      const auto [t0, t1] = slab(o, d, center, half);
      return (t0 <= t1 && t0 > 0.0) ? t0 : kInf;
    }
    case Type::kShell: {
      const auto [t0, t1] = slab(o, d, center, half);
      return (t0 <= 0.0 && t1 > 0.0) ? t1 : kInf;
    }
  }
  return kInf;
}

SyntheticScene::SyntheticScene(const SceneSpec& spec) : spec_(spec) {
  spec_.validate();
  using T = Primitive::Type;
  const double r = spec_.radius;
  switch (spec_.kind) {
    case SceneKind::kSphere:
      prims_.push_back({T::kSphere, Vec3::Zero(), Vec3::Constant(r)});
      break;
    case SceneKind::kBox:
      prims_.push_back({T::kBox, Vec3::Zero(), Vec3::Constant(r)});
      break;
    case SceneKind::kRoom:
      prims_.push_back({T::kShell, Vec3(0.0, 0.0, 1.25), Vec3(2.0, 1.5, 1.25)});
      prims_.push_back({T::kBox, Vec3(0.9, 0.4, 0.3), Vec3(0.3, 0.3, 0.3)});
      prims_.push_back({T::kSphere, Vec3(-0.9, -0.4, 0.9), Vec3::Constant(0.35)});
      prims_.push_back({T::kBox, Vec3(-0.7, 0.8, 0.6), Vec3(0.15, 0.15, 0.6)});
      break;
  }

  if (spec_.feature_dim > 0) {
    std::mt19937_64 rng(spec_.seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> gauss;
    region_features_.resize(2, spec_.feature_dim);
    for (Eigen::Index i = 0; i < region_features_.size(); ++i) region_features_(i) = gauss(rng);
    region_features_.rowwise().normalize();
  }

  const std::size_t total = spec_.points > 0
                                ? spec_.points
                                : static_cast<std::size_t>(std::llround(spec_.density * surface_area()));
  Points points = sample_surface(total, spec_.seed);
  Points normals(points.rows(), 3);
  for (Eigen::Index i = 0; i < points.rows(); ++i) normals.row(i) = normal(points.row(i)).transpose();
  const Points clean = points;
  if (spec_.noise_std > 0.0) {
    std::mt19937_64 rng(spec_.seed + 0x5bd1e995ULL);
    std::normal_distribution<double> gauss(0.0, spec_.noise_std);
    for (Eigen::Index i = 0; i < points.size(); ++i) points(i) += gauss(rng);
  }

  const Camera camera = default_camera();
  frames_.resize(static_cast<std::size_t>(spec_.frames));
  for (int f = 0; f < spec_.frames; ++f) {
    const Eigen::Index n = (points.rows() - f + spec_.frames - 1) / spec_.frames;
    Frame& frame = frames_[static_cast<std::size_t>(f)];
    frame.camera = camera;
    frame.points.resize(std::max<Eigen::Index>(n, 0), 3);
    Points fn(frame.points.rows(), 3);
    Matrix colors(frame.points.rows(), 3);
    Matrix features(frame.points.rows(), std::max(spec_.feature_dim, 0));
    for (Eigen::Index k = 0; k < frame.points.rows(); ++k) {
      const Eigen::Index i = f + k * spec_.frames;
      frame.points.row(k) = points.row(i);
      fn.row(k) = normals.row(i);
      // Ground truth is a function of the noiseless surface position.
      const Vec3 p = clean.row(i).transpose();
      colors.row(k) = color(p).transpose();
      if (spec_.feature_dim > 0) features.row(k) = region_features_.row(region(p));
    }
    frame.normals = std::move(fn);
    frame.properties["color"] = std::move(colors);
    if (spec_.feature_dim > 0) frame.properties["feature"] = std::move(features);
  }
}

Frame SyntheticScene::merged() const {
  Frame out;
  out.camera = frames_.front().camera;
  Eigen::Index n = 0;
  for (const auto& f : frames_) n += f.size();
  out.points.resize(n, 3);
  Points normals(n, 3);
  std::map<std::string, Matrix> props;
  for (const auto& [name, m] : frames_.front().properties) props[name].resize(n, m.cols());
  Eigen::Index at = 0;
  for (const auto& f : frames_) {
    out.points.middleRows(at, f.size()) = f.points;
    normals.middleRows(at, f.size()) = *f.normals;
    for (const auto& [name, m] : f.properties) props[name].middleRows(at, f.size()) = m;
    at += f.size();
  }
  out.normals = std::move(normals);
  out.properties = std::move(props);
  return out;
}

double SyntheticScene::sdf(const Vec3& p) const {
  double d = kInf;
  for (const auto& prim : prims_) d = std::min(d, prim.sdf(p));
  return d;
}

Vec3 SyntheticScene::normal(const Vec3& p) const {
  double d = kInf;
  Vec3 n = Vec3::UnitZ();
  for (const auto& prim : prims_) {
    const double s = prim.sdf(p);
    if (s < d) {
      d = s;
      n = prim.normal(p);
    }
  }
  return n;
}

Vec3 SyntheticScene::center() const {
  return spec_.kind == SceneKind::kRoom ? Vec3(0.0, 0.0, 1.25) : Vec3::Zero();
}

Vec3 SyntheticScene::color(const Vec3& p) const {
  const Vec3 q = p - center();
  switch (spec_.color) {
    case ColorFn::kSmooth:
      return {0.5 + 0.4 * std::sin(1.7 * q.x() + 0.3), 0.5 + 0.4 * std::sin(1.3 * q.y() + 1.1),
              0.5 + 0.4 * std::sin(2.1 * q.z() + 2.0)};
    case ColorFn::kTwoTone:
      return q.z() >= 0.0 ? Vec3(1.0, 0.0, 0.0) : Vec3(0.0, 0.0, 1.0);
    case ColorFn::kConstant:
      return {1.0, 0.0, 0.0};
  }
  return Vec3::Zero();
}

int SyntheticScene::region(const Vec3& p) const {
  return p.x() < center().x() ? 0 : 1;
}

double SyntheticScene::surface_area() const {
  double a = 0.0;
  for (const auto& prim : prims_) a += prim.area();
  return a;
}

bool SyntheticScene::hidden(const Vec3& p, std::size_t self) const {
  for (std::size_t j = 0; j < prims_.size(); ++j) {
    if (j != self && prims_[j].sdf(p) <= 1e-9) return true;
  }
  return false;
}

Points SyntheticScene::sample_primitive(const Primitive& prim, std::size_t n, std::uint64_t seed,
                                        std::size_t self, Points* normals) const {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(self)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<Vec3> pts;
  pts.reserve(n);
  const Vec3& c = prim.center;
  const Vec3& h = prim.half;
  std::array<double, 6> face_area{};
  for (int f = 0; f < 6; ++f) {
    const int a = f / 2;
    face_area[f] = 4.0 * h[(a + 1) % 3] * h[(a + 2) % 3];
  }
  const double box_area = 2.0 * (face_area[0] + face_area[2] + face_area[4]);
  for (std::size_t i = 0; i < n; ++i) {
    Vec3 p;
    if (prim.type == Primitive::Type::kSphere) {
      const double z = 2.0 * uni(rng) - 1.0;
      const double phi = 2.0 * std::numbers::pi * uni(rng);
      const double rxy = std::sqrt(std::max(0.0, 1.0 - z * z));
      p = c + h.x() * Vec3(rxy * std::cos(phi), rxy * std::sin(phi), z);
    } else {
      double pick = uni(rng) * box_area;
      int f = 0;
      while (f < 5 && pick >= face_area[f]) pick -= face_area[f++];
      const int a = f / 2;
      const double s = (f % 2 == 0) ? -1.0 : 1.0;
      p = c;
      p[a] += s * h[a];
      p[(a + 1) % 3] += (2.0 * uni(rng) - 1.0) * h[(a + 1) % 3];
      p[(a + 2) % 3] += (2.0 * uni(rng) - 1.0) * h[(a + 2) % 3];
    }
    if (!hidden(p, self)) pts.push_back(p);
  }
  Points out(static_cast<Eigen::Index>(pts.size()), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
  if (normals) {
    normals->resize(out.rows(), 3);
    for (Eigen::Index i = 0; i < out.rows(); ++i) normals->row(i) = prim.normal(out.row(i)).transpose();
  }
  return out;
}

Points SyntheticScene::sample_surface(std::size_t n, std::uint64_t seed) const {
  const double total = surface_area();
  std::vector<Points> parts;
  Eigen::Index count = 0;
  for (std::size_t i = 0; i < prims_.size(); ++i) {
    const auto k = static_cast<std::size_t>(std::llround(static_cast<double>(n) * prims_[i].area() / total));
    parts.push_back(sample_primitive(prims_[i], k, seed, i, nullptr));
    count += parts.back().rows();
  }
  Points out(count, 3);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p;
    at += p.rows();
  }
  return out;
}

Camera SyntheticScene::default_camera(const Intrinsics& k) const {
  Camera cam;
  cam.intrinsics = k;
  if (spec_.kind == SceneKind::kRoom) {
    cam.pose = look_at(Vec3(1.7, -1.3, 1.9), Vec3(-0.6, 0.4, 0.6));
  } else {
    const double r = spec_.radius;
    cam.pose = look_at(Vec3(2.5 * r, -2.0 * r, 1.5 * r), Vec3::Zero());
  }
  return cam;
}

RenderResult SyntheticScene::render(const Camera& camera) const {
  camera.intrinsics.validate();
  const int w = camera.intrinsics.width;
  const int h = camera.intrinsics.height;
  RenderResult out;
  out.depth = Image<float>(w, h, 1, 0.0f);
  out.property = Image<float>(w, h, 3, 0.0f);
  out.property_valid = Image<std::uint8_t>(w, h, 1, 0);
  const Eigen::Matrix3d rot = camera.pose.topLeftCorner<3, 3>();
  const Vec3 o = camera.origin();
  parallel_for(static_cast<std::size_t>(h), [&](std::size_t row) {
    const int v = static_cast<int>(row);
    for (int u = 0; u < w; ++u) {
      const Vec3 d = rot * pixel_direction(camera.intrinsics, u, v);
      double t = kInf;
      for (const auto& prim : prims_) t = std::min(t, prim.intersect(o, d));
      if (!std::isfinite(t)) continue;
      out.depth.at(u, v) = static_cast<float>(t);
      const Vec3 c = color(o + t * d);
      for (int ch = 0; ch < 3; ++ch) out.property.at(u, v, ch) = static_cast<float>(c[ch]);
      out.property_valid.at(u, v) = 1;
    }
  });
  return out;
}

}  // namespace lim
