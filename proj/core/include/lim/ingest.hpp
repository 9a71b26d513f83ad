#pragma once

#include <limits>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "lim/geometry.hpp"
#include "lim/image.hpp"

namespace lim {

/// uint16 depth is in millimeters (scaled by depth_scale), float32 in meters.
using DepthImage = std::variant<Image<std::uint16_t>, Image<float>>;
/// uint8 properties are scaled to [0, 1]; float properties pass through.
using PropertyImage = std::variant<Image<std::uint8_t>, Image<float>>;

struct UnprojectOptions {
  double depth_scale = 1000.0;  // raw uint16 units per meter
  double max_depth = std::numeric_limits<double>::infinity();
};

/// Back-projects every pixel with positive depth through the pinhole model
/// and the camera pose. Property images are sampled at the same pixels.
/// Throws kData when image sizes disagree with the intrinsics.
Frame unproject(const DepthImage& depth, const Camera& camera,
                const std::map<std::string, PropertyImage>& properties = {},
                const UnprojectOptions& opts = {});

/// ".png" (16-bit) or ".limf" (float32, one channel). 8-bit PNG depth is
/// rejected as ambiguous.
DepthImage read_depth_image(const std::string& path);
/// ".png" (8-bit) or ".limf" (float32).
PropertyImage read_property_image(const std::string& path);

/// One frame record. Exactly one of depth / cloud is set. Clouds are PLY
/// points in the camera frame.
struct ManifestFrame {
  int line = 0;
  std::optional<std::string> depth;
  std::optional<std::string> cloud;
  Mat4 pose = Mat4::Identity();
  std::map<std::string, std::string> channels;
};

/// Frame list for incremental reconstruction. Text format, one directive per
/// line:
///   intrinsics fx fy cx cy width height
///   depth_scale 1000
///   poses <file>          (pose file for pose=<index> references)
///   frame depth=<png|limf> pose=<index | 16 comma-separated floats> [name=<image>]...
///   frame cloud=<ply> pose=... [name=<limf, one pixel per point>]...
/// Relative paths resolve against the manifest's directory.
struct Manifest {
  Intrinsics intrinsics;
  double depth_scale = 1000.0;
  std::vector<ManifestFrame> frames;
};

Manifest read_manifest(const std::string& path);
/// Loads and unprojects one record. Throws kIo / kData naming the record.
Frame load_frame(const Manifest& manifest, const ManifestFrame& record);

}  // namespace lim
