#include "lim/ingest.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "lim/io.hpp"

namespace lim {
namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

template <typename T>
void check_size(const Image<T>& img, const Intrinsics& k, const std::string& what) {
  if (img.width != k.width || img.height != k.height) {
    fail(ErrorKind::kData, what + " is " + std::to_string(img.width) + "x" +
                               std::to_string(img.height) + ", intrinsics expect " +
                               std::to_string(k.width) + "x" + std::to_string(k.height));
  }
}

std::vector<double> parse_numbers(const std::string& s, char sep, const std::string& where) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, sep)) {
    char* end = nullptr;
    const double x = std::strtod(tok.c_str(), &end);
    if (tok.empty() || end != tok.c_str() + tok.size()) {
      fail(ErrorKind::kParse, where + ": bad number '" + tok + "'");
    }
    out.push_back(x);
  }
  return out;
}

}  // namespace

Frame unproject(const DepthImage& depth, const Camera& camera,
                const std::map<std::string, PropertyImage>& properties,
                const UnprojectOptions& opts) {
  const Intrinsics& k = camera.intrinsics;
  k.validate();
  validate_pose(camera.pose);
  require(opts.depth_scale > 0.0, "depth scale must be positive");
  std::visit([&](const auto& img) { check_size(img, k, "depth image"); }, depth);
  for (const auto& [name, img] : properties) {
    std::visit([&, n = name](const auto& im) { check_size(im, k, "property image '" + n + "'"); },
               img);
  }

  std::vector<std::pair<int, int>> pixels;
  std::vector<double> zs;
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      double z = 0.0;
      if (const auto* mm = std::get_if<Image<std::uint16_t>>(&depth)) {
        z = mm->at(u, v) / opts.depth_scale;
      } else {
        z = std::get<Image<float>>(depth).at(u, v);
      }
      if (!(z > 0.0) || !std::isfinite(z) || z > opts.max_depth) continue;
      pixels.emplace_back(u, v);
      zs.push_back(z);
    }
  }

  Frame frame;
  frame.camera = camera;
  const auto n = static_cast<Eigen::Index>(pixels.size());
  frame.points.resize(n, 3);
  const Eigen::Matrix3d rot = camera.pose.topLeftCorner<3, 3>();
  const Vec3 t = camera.origin();
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto [u, v] = pixels[static_cast<std::size_t>(i)];
    const double z = zs[static_cast<std::size_t>(i)];
    const Vec3 pc((u - k.cx) / k.fx * z, (v - k.cy) / k.fy * z, z);
    frame.points.row(i) = (rot * pc + t).transpose();
  }
  for (const auto& [name, img] : properties) {
    Matrix values;
    if (const auto* u8 = std::get_if<Image<std::uint8_t>>(&img)) {
      values.resize(n, u8->channels);
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto [u, v] = pixels[static_cast<std::size_t>(i)];
        for (int c = 0; c < u8->channels; ++c) values(i, c) = u8->at(u, v, c) / 255.0;
      }
    } else {
      const auto& f = std::get<Image<float>>(img);
      values.resize(n, f.channels);
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto [u, v] = pixels[static_cast<std::size_t>(i)];
        for (int c = 0; c < f.channels; ++c) values(i, c) = f.at(u, v, c);
      }
    }
    frame.properties[name] = std::move(values);
  }
  return frame;
}

DepthImage read_depth_image(const std::string& path) {
  if (ends_with(path, ".limf")) {
    Image<float> img = read_feature_image(path);
    if (img.channels != 1) fail(ErrorKind::kData, path + ": float depth must be single-channel");
    return img;
  }
  if (png_bit_depth(path) != 16) {
    fail(ErrorKind::kData, path + ": depth PNG must be 16-bit millimeters");
  }
  return read_png16(path);
}

PropertyImage read_property_image(const std::string& path) {
  if (ends_with(path, ".limf")) return read_feature_image(path);
  return read_png8(path);
}

Manifest read_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorKind::kIo, "cannot open " + path);
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  auto resolve = [&base](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? p : (base / fp).string();
  };
  Manifest m;
  std::optional<std::vector<Mat4>> poses;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string where = path + ":" + std::to_string(line_no);
    std::istringstream ss(line);
    std::string word;
    if (!(ss >> word) || word[0] == '#') continue;
    if (word == "intrinsics") {
      Intrinsics& k = m.intrinsics;
      if (!(ss >> k.fx >> k.fy >> k.cx >> k.cy >> k.width >> k.height)) {
        fail(ErrorKind::kParse, where + ": intrinsics needs fx fy cx cy width height");
      }
      k.validate();
    } else if (word == "depth_scale") {
      if (!(ss >> m.depth_scale) || !(m.depth_scale > 0.0)) {
        fail(ErrorKind::kParse, where + ": depth_scale must be positive");
      }
    } else if (word == "poses") {
      std::string p;
      if (!(ss >> p)) fail(ErrorKind::kParse, where + ": poses needs a path");
      poses = load_poses(resolve(p));
    } else if (word == "frame") {
      ManifestFrame f;
      f.line = line_no;
      bool have_pose = false;
      std::string tok;
      while (ss >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos || eq == 0) {
          fail(ErrorKind::kParse, where + ": expected key=value, got '" + tok + "'");
        }
        const std::string key = tok.substr(0, eq);
        const std::string value = tok.substr(eq + 1);
        if (key == "depth") {
          f.depth = resolve(value);
        } else if (key == "cloud") {
          f.cloud = resolve(value);
        } else if (key == "pose") {
          const std::vector<double> v = parse_numbers(value, ',', where);
          if (v.size() == 1) {
            if (!poses) fail(ErrorKind::kParse, where + ": pose index without a poses file");
            const auto idx = static_cast<long long>(v[0]);
            if (static_cast<double>(idx) != v[0] || idx < 0 ||
                idx >= static_cast<long long>(poses->size())) {
              fail(ErrorKind::kParse, where + ": pose index out of range");
            }
            f.pose = (*poses)[static_cast<std::size_t>(idx)];
          } else if (v.size() == 16) {
            for (int r = 0; r < 4; ++r) {
              for (int c = 0; c < 4; ++c) f.pose(r, c) = v[static_cast<std::size_t>(4 * r + c)];
            }
            validate_pose(f.pose);
          } else {
            fail(ErrorKind::kParse, where + ": pose must be an index or 16 values");
          }
          have_pose = true;
        } else {
          f.channels[key] = resolve(value);
        }
      }
      if (f.depth.has_value() == f.cloud.has_value()) {
        fail(ErrorKind::kParse, where + ": frame needs exactly one of depth= or cloud=");
      }
      if (!have_pose) fail(ErrorKind::kParse, where + ": frame needs pose=");
      m.frames.push_back(std::move(f));
    } else {
      fail(ErrorKind::kParse, where + ": unknown directive '" + word + "'");
    }
  }
  return m;
}

Frame load_frame(const Manifest& manifest, const ManifestFrame& record) {
  Camera camera{manifest.intrinsics, record.pose};
  if (record.cloud) {
    PlyData ply = load_ply(*record.cloud);
    Frame frame;
    frame.camera = camera;
    const Eigen::Matrix3d rot = record.pose.topLeftCorner<3, 3>();
    const Vec3 t = camera.origin();
    frame.points = (ply.vertices * rot.transpose()).rowwise() + t.transpose();
    if (ply.normals) frame.normals = Points(*ply.normals * rot.transpose());
    if (ply.colors) frame.properties["color"] = from_colors(*ply.colors);
    // Per-point channels: one pixel per point, in vertex order.
    for (const auto& [name, p] : record.channels) {
      const Image<float> img = read_feature_image(p);
      if (static_cast<Eigen::Index>(img.pixel_count()) != frame.size()) {
        fail(ErrorKind::kData, p + ": channel '" + name + "' has " +
                                   std::to_string(img.pixel_count()) + " values, cloud has " +
                                   std::to_string(frame.size()) + " points");
      }
      Matrix values(frame.size(), img.channels);
      for (Eigen::Index i = 0; i < frame.size(); ++i) {
        for (int c = 0; c < img.channels; ++c) {
          values(i, c) = img.data[static_cast<std::size_t>(i) * img.channels + c];
        }
      }
      frame.properties[name] = std::move(values);
    }
    return frame;
  }
  std::map<std::string, PropertyImage> props;
  for (const auto& [name, p] : record.channels) props.emplace(name, read_property_image(p));
  UnprojectOptions opts;
  opts.depth_scale = manifest.depth_scale;
  return unproject(read_depth_image(*record.depth), camera, props, opts);
}

}  // namespace lim
