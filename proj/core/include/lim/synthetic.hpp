#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lim/geometry.hpp"
#include "lim/render.hpp"

namespace lim {

enum class SceneKind { kSphere, kBox, kRoom };
enum class ColorFn { kSmooth, kTwoTone, kConstant };

/// Scene description, also readable from key=value text:
///   kind=sphere|box|room  points=<n>  density=<per m^2>  noise=<m>
///   color=smooth|two_tone|constant  features=<c>  frames=<n>  seed=<n>  radius=<m>
struct SceneSpec {
  SceneKind kind = SceneKind::kSphere;
  std::size_t points = 0;   // total surface samples; 0 means use density
  double density = 2000.0;  // samples per square meter
  double noise_std = 0.0;   // isotropic position noise, meters
  ColorFn color = ColorFn::kSmooth;
  int feature_dim = 0;  // > 0 adds a two-region "feature" channel
  int frames = 1;       // samples are dealt round-robin into this many frames
  std::uint64_t seed = 1;
  double radius = 1.0;  // sphere radius, box half-extent
  void validate() const;
};

SceneSpec parse_scene_spec(const std::string& text);
SceneSpec read_scene_spec(const std::string& path);
std::string to_string(const SceneSpec& spec);

/// Camera-to-world pose looking from `eye` at `target` (camera x right,
/// y down, z forward).
Mat4 look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitZ());

/// Union of solid primitives, or a room shell with solids inside. The signed
/// distance is positive in free space; normals point into free space.
class SyntheticScene {
 public:
  explicit SyntheticScene(const SceneSpec& spec);

  const SceneSpec& spec() const { return spec_; }
  /// Sampled observations with exact normals and a "color" channel.
  const std::vector<Frame>& frames() const { return frames_; }
  /// All frames concatenated.
  Frame merged() const;

  double sdf(const Vec3& p) const;
  Vec3 normal(const Vec3& p) const;
  Vec3 color(const Vec3& p) const;
  /// 0 or 1 by side of the x = center plane.
  int region(const Vec3& p) const;
  /// Unit feature vector of each region (feature_dim > 0).
  const Matrix& region_features() const { return region_features_; }

  double surface_area() const;
  /// About n uniform surface samples for accuracy/completeness metrics.
  /// Samples landing in hidden (contact) regions are dropped, not redrawn.
  Points sample_surface(std::size_t n, std::uint64_t seed) const;
  /// Exact first-hit render; the property image is the analytic color.
  RenderResult render(const Camera& camera) const;
  /// A camera that sees most of the scene.
  Camera default_camera(const Intrinsics& k = {}) const;
  Vec3 center() const;

  struct Primitive {
    enum class Type { kSphere, kBox, kShell } type;
    Vec3 center;
    Vec3 half;  // radius in half.x() for spheres
    double area() const;
    double sdf(const Vec3& p) const;
    Vec3 normal(const Vec3& p) const;
    /// Smallest t > 0 where the ray reaches the surface from free space.
    double intersect(const Vec3& origin, const Vec3& dir) const;
  };
  const std::vector<Primitive>& primitives() const { return prims_; }

 private:
  bool hidden(const Vec3& p, std::size_t self) const;
  Points sample_primitive(const Primitive& prim, std::size_t n, std::uint64_t seed,
                          std::size_t self, Points* normals) const;

  SceneSpec spec_;
  std::vector<Primitive> prims_;
  std::vector<Frame> frames_;
  Matrix region_features_;
};

}  // namespace lim
