#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "lim/error.hpp"
#include "lim/ingest.hpp"
#include "lim/io.hpp"
#include "lim/metrics.hpp"
#include "lim/property.hpp"
#include "lim/render.hpp"
#include "lim/surface.hpp"
#include "lim/synthetic.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace lim::cli {
namespace {

void log(const std::string& msg) { std::cerr << "lim: " << msg << '\n'; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> parse_list(const std::string& text, std::size_t expected,
                               const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      while (used < tok.size() && std::isspace(static_cast<unsigned char>(tok[used]))) ++used;
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      fail(ErrorKind::kInvalidArgument, what + ": bad number '" + tok + "'");
    }
  }
  if (out.size() != expected) {
    fail(ErrorKind::kInvalidArgument,
         what + " needs " + std::to_string(expected) + " comma-separated values");
  }
  return out;
}

Camera resolve_camera(const CameraArgs& a) {
  Intrinsics k;
  if (!a.intrinsics.empty()) {
    const auto v = parse_list(a.intrinsics, 6, "--intrinsics");
    k = Intrinsics{v[0], v[1], v[2], v[3], static_cast<int>(v[4]), static_cast<int>(v[5])};
  }
  k.validate();
  Camera cam;
  if (!a.scene.empty()) cam = SyntheticScene(read_scene_spec(a.scene)).default_camera(k);
  cam.intrinsics = k;
  if (!a.pose.empty()) {
    const auto v = parse_list(a.pose, 16, "--pose");
    for (int i = 0; i < 16; ++i) cam.pose(i / 4, i % 4) = v[static_cast<std::size_t>(i)];
    try {
      validate_pose(cam.pose);
    } catch (const Error& e) {
      fail(ErrorKind::kInvalidArgument, std::string("--pose: ") + e.what());
    }
  }
  return cam;
}

PlyFormat format_of(bool ascii) { return ascii ? PlyFormat::kAscii : PlyFormat::kBinaryLittleEndian; }

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create directory " + dir + ": " + ec.message());
}

std::string pose_line(const Mat4& pose) {
  std::string line;
  char buf[32];
  for (int i = 0; i < 16; ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", pose(i / 4, i % 4));
    if (i) line += ' ';
    line += buf;
  }
  return line;
}

std::string indexed(const std::string& stem, std::size_t i, const std::string& ext) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "_%03zu", i);
  return stem + buf + ext;
}

// Orbit of cameras around the scene; room cameras stand inside and look out.
std::vector<Camera> orbit_cameras(const SyntheticScene& scene, int n, const Intrinsics& k) {
  std::vector<Camera> out;
  const Vec3 c = scene.center();
  const double r = scene.spec().radius;
  for (int i = 0; i < n; ++i) {
    const double th = 2.0 * std::numbers::pi * i / n + 0.3;
    const Vec3 dir(std::cos(th), std::sin(th), 0.0);
    Mat4 pose;
    if (scene.spec().kind == SceneKind::kRoom) {
      pose = look_at(c + 0.6 * dir + Vec3(0, 0, 0.4), c - 1.5 * dir - Vec3(0, 0, 0.6));
    } else {
      pose = look_at(c + 2.5 * r * dir + Vec3(0, 0, 1.5 * r), c);
    }
    out.push_back(Camera{k, pose});
  }
  return out;
}

}  // namespace

int build_basis(const BuildBasisArgs& a) {
  BasisConfig cfg;
  cfg.seed = a.seed;
  cfg.n_anchors = a.anchors;
  cfg.rank = a.rank;
  cfg.params.sigma = a.sigma;
  cfg.params.rho = a.rho;
  const auto t0 = std::chrono::steady_clock::now();
  const PositionalEncoder enc = PositionalEncoder::build(cfg);
  enc.save(a.out);
  char fp[32];
  std::snprintf(fp, sizeof fp, "%016llx", static_cast<unsigned long long>(enc.fingerprint()));
  log("basis " + a.out + ": " + std::to_string(enc.n_anchors()) + " anchors, rank " +
      std::to_string(enc.rank()) + ", fingerprint " + fp + ", " +
      std::to_string(seconds_since(t0)) + " s");
  std::printf("index,eigenvalue,relative\n");
  const Vector& ev = enc.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    std::printf("%ld,%.17g,%.17g\n", static_cast<long>(i), ev(i), ev(i) / ev(0));
  }
  return 0;
}

int make_scene(const MakeSceneArgs& a) {
  const SceneSpec spec = read_scene_spec(a.scene);
  require(a.mode == "cloud" || a.mode == "depth", "--mode must be cloud or depth");
  Intrinsics k;
  k.width = a.width;
  k.height = a.height;
  k.cx = (a.width - 1) / 2.0;
  k.cy = (a.height - 1) / 2.0;
  k.validate();
  ensure_dir(a.out_dir);
  const fs::path dir(a.out_dir);
  const SyntheticScene scene(spec);

  {
    std::ofstream os(dir / "scene.txt");
    os << to_string(spec) << '\n';
    if (!os) fail(ErrorKind::kIo, "cannot write scene.txt");
  }
  if (spec.feature_dim > 0) {
    std::ofstream os(dir / "labels.txt");
    const Matrix& f = scene.region_features();
    for (Eigen::Index r = 0; r < f.rows(); ++r) {
      os << "region" << r;
      char buf[32];
      for (Eigen::Index c = 0; c < f.cols(); ++c) {
        std::snprintf(buf, sizeof buf, " %.17g", f(r, c));
        os << buf;
      }
      os << '\n';
    }
    if (!os) fail(ErrorKind::kIo, "cannot write labels.txt");
  }

  std::ofstream manifest(dir / "manifest.txt");
  std::ofstream poses(dir / "poses.txt");
  manifest << "intrinsics " << k.fx << ' ' << k.fy << ' ' << k.cx << ' ' << k.cy << ' '
           << k.width << ' ' << k.height << '\n';
  manifest << "depth_scale 1000\nposes poses.txt\n";

  std::size_t total = 0;
  if (a.mode == "cloud") {
    for (std::size_t i = 0; i < scene.frames().size(); ++i) {
      const Frame& f = scene.frames()[i];
      const Mat4& pose = f.camera.pose;
      const Eigen::Matrix3d rot = pose.topLeftCorner<3, 3>();
      const Vec3 t = pose.block<3, 1>(0, 3);
      PlyData ply;
      ply.vertices = Points((f.points.rowwise() - t.transpose()) * rot);
      if (f.normals) ply.normals = Points(*f.normals * rot);
      ply.colors = to_colors(f.properties.at("color"));
      const std::string cloud = indexed("cloud", i, ".ply");
      save_ply((dir / cloud).string(), ply, PlyFormat::kBinaryLittleEndian);
      manifest << "frame cloud=" << cloud << " pose=" << i;
      if (auto it = f.properties.find("feature"); it != f.properties.end()) {
        Image<float> img(static_cast<int>(f.size()), 1, static_cast<int>(it->second.cols()));
        for (Eigen::Index r = 0; r < f.size(); ++r) {
          for (Eigen::Index c = 0; c < it->second.cols(); ++c) {
            img.data[static_cast<std::size_t>(r * it->second.cols() + c)] =
                static_cast<float>(it->second(r, c));
          }
        }
        const std::string feat = indexed("feature", i, ".limf");
        write_feature_image((dir / feat).string(), img);
        manifest << " feature=" << feat;
      }
      manifest << '\n';
      poses << pose_line(pose) << '\n';
      total += static_cast<std::size_t>(f.size());
    }
  } else {
    if (spec.feature_dim > 0) log("depth mode writes no feature images; use --mode cloud");
    const auto cams = orbit_cameras(scene, spec.frames, k);
    for (std::size_t i = 0; i < cams.size(); ++i) {
      const RenderResult r = scene.render(cams[i]);
      const std::string depth = indexed("depth", i, ".png");
      const std::string color = indexed("color", i, ".png");
      write_png16((dir / depth).string(), depth_to_png16(r.depth));
      write_png8((dir / color).string(), property_to_png8(r.property, r.property_valid));
      manifest << "frame depth=" << depth << " pose=" << i << " color=" << color << '\n';
      poses << pose_line(cams[i].pose) << '\n';
      for (float d : r.depth.data) total += d > 0.0f;
    }
  }
  if (!manifest || !poses) fail(ErrorKind::kIo, "cannot write manifest in " + a.out_dir);
  log("scene written to " + a.out_dir + " (" + std::to_string(total) + " points)");
  json summary{{"frames", a.mode == "cloud" ? scene.frames().size() : std::size_t(spec.frames)},
               {"points", total}};
  std::printf("%s\n", summary.dump().c_str());
  return 0;
}

int reconstruct(const ReconstructArgs& a) {
  require(a.stride >= 1, "--stride must be at least 1");
  require(a.gpis_mode == "sample" || a.gpis_mode == "derivative",
          "--gpis-mode must be sample or derivative");
  const Manifest manifest = read_manifest(a.frames);
  const PositionalEncoder enc = PositionalEncoder::load(a.basis);
  ensure_dir(a.out_dir);

  SurfaceConfig sc;
  sc.voxel_size = a.surface_voxel;
  sc.gpis.mode = a.gpis_mode == "sample" ? GpisMode::kSample : GpisMode::kDerivative;
  sc.gpis.sample_distance = a.gpis_distance;
  if (a.sdf_noise) sc.encoding.noise = *a.sdf_noise;

  LatentImplicitMap surface(MapConfig{FieldKind::kSdf, 1, enc.rank(), a.surface_voxel, 0}, enc);
  std::map<std::string, LatentImplicitMap> fields;

  const auto is_feature = [&](const std::string& name) {
    return std::find(a.feature_channels.begin(), a.feature_channels.end(), name) !=
           a.feature_channels.end();
  };

  std::printf("frame,field,points,voxels,seconds\n");
  std::size_t used = 0;
  const auto t_all = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < manifest.frames.size(); i += static_cast<std::size_t>(a.stride)) {
    const ManifestFrame& rec = manifest.frames[i];
    Frame frame;
    try {
      frame = load_frame(manifest, rec);
    } catch (const Error& e) {
      fail(e.kind(), "frame " + std::to_string(i) + " (manifest line " + std::to_string(rec.line) +
                         "): " + e.what());
    }
    ++used;
    const auto report = [&](const std::string& field, std::size_t voxels, double s) {
      std::printf("%zu,%s,%ld,%zu,%.6f\n", i, field.c_str(), static_cast<long>(frame.size()),
                  voxels, s);
      std::fflush(stdout);
    };
    if (!a.skip_surface) {
      const auto t0 = std::chrono::steady_clock::now();
      const LatentImplicitMap local = build_local_surface_lim(frame, enc, sc);
      integrate(surface, local);
      report("surface", local.size(), seconds_since(t0));
    }
    for (const auto& [name, values] : frame.properties) {
      PropertyConfig pc;
      pc.kind = is_feature(name) ? FieldKind::kFeature : FieldKind::kProperty;
      pc.voxel_size = pc.kind == FieldKind::kFeature ? a.feature_voxel.value_or(a.color_voxel)
                                                      : a.color_voxel;
      pc.encoding = EncodingConfig::defaults_for(pc.kind);
      if (a.property_noise) pc.encoding.noise = *a.property_noise;
      const auto t0 = std::chrono::steady_clock::now();
      const LatentImplicitMap local = build_property_lim(frame, name, enc, pc);
      auto it = fields.find(name);
      if (it == fields.end()) it = fields.emplace(name, LatentImplicitMap(local.config())).first;
      integrate(it->second, local);
      report(name, local.size(), seconds_since(t0));
    }
  }

  const fs::path dir(a.out_dir);
  surface.save((dir / "surface.limm").string());
  log("surface map: " + std::to_string(surface.size()) + " voxels");
  for (const auto& [name, map] : fields) {
    map.save((dir / (name + ".limm")).string());
    log(name + " map: " + std::to_string(map.size()) + " voxels");
  }
  log("integrated " + std::to_string(used) + " of " + std::to_string(manifest.frames.size()) +
      " frames in " + std::to_string(seconds_since(t_all)) + " s");
  return 0;
}

int mesh(const MeshArgs& a) {
  require(a.samples_per_axis >= 2, "--samples-per-axis must be at least 2");
  const PositionalEncoder enc = PositionalEncoder::load(a.basis);
  const LatentImplicitMap map = LatentImplicitMap::load(a.map);
  if (map.config().kind != FieldKind::kSdf) fail(ErrorKind::kData, a.map + " is not an sdf map");
  const auto t0 = std::chrono::steady_clock::now();
  const Mesh m = marching_cubes(extract_sdf_grid(map, enc, a.samples_per_axis));
  save_mesh_ply(a.out, m, format_of(a.ascii));
  log("mesh " + a.out + " in " + std::to_string(seconds_since(t0)) + " s");
  std::printf("%s\n", json{{"vertices", m.vertex_count()}, {"triangles", m.triangle_count()}}
                          .dump()
                          .c_str());
  return 0;
}

int colorize(const ColorizeArgs& a) {
  const PositionalEncoder enc = PositionalEncoder::load(a.basis);
  const LatentImplicitMap map = LatentImplicitMap::load(a.map);
  const int c = map.config().channels;
  if (map.config().kind == FieldKind::kSdf || (c != 1 && c != 3)) {
    fail(ErrorKind::kData, a.map + " is not a 1- or 3-channel property map");
  }
  Mesh m = colorize_mesh(map, enc, load_mesh_ply(a.mesh), "color");
  if (c == 1) m.attributes["color"] = m.attributes["color"].replicate(1, 3).eval();
  save_mesh_ply(a.out, m, format_of(a.ascii), "color");
  const long colored = static_cast<long>(m.attributes["color_valid"].sum());
  std::printf("%s\n",
              json{{"vertices", m.vertex_count()}, {"colored", colored}}.dump().c_str());
  return 0;
}

int render(const RenderArgs& a) {
  const Camera cam = resolve_camera(a.camera);
  const Mesh m = load_mesh_ply(a.mesh);
  RenderResult r;
  if (!a.map.empty()) {
    require(!a.basis.empty(), "--map needs --basis");
    const PositionalEncoder enc = PositionalEncoder::load(a.basis);
    const LatentImplicitMap map = LatentImplicitMap::load(a.map);
    const int c = map.config().channels;
    if (map.config().kind == FieldKind::kSdf || (c != 1 && c != 3)) {
      fail(ErrorKind::kData, a.map + " is not a 1- or 3-channel property map");
    }
    r = raycast_render(m, cam, &map, &enc);
  } else {
    r = raycast_render(m, cam);
  }
  std::size_t hits = 0;
  for (float d : r.depth.data) hits += d > 0.0f;
  if (!a.depth_out.empty()) write_png16(a.depth_out, depth_to_png16(r.depth));
  if (!a.color_out.empty()) {
    if (a.map.empty()) {
      write_png8(a.color_out, Image<std::uint8_t>(r.depth.width, r.depth.height, 3));
    } else {
      write_png8(a.color_out, property_to_png8(r.property, r.property_valid));
    }
  }
  std::printf("%s\n", json{{"width", r.depth.width}, {"height", r.depth.height}, {"hits", hits}}
                          .dump()
                          .c_str());
  return 0;
}

int query_semantic(const QuerySemanticArgs& a) {
  const PositionalEncoder enc = PositionalEncoder::load(a.basis);
  const LatentImplicitMap map = LatentImplicitMap::load(a.map);
  if (map.config().kind != FieldKind::kFeature) {
    fail(ErrorKind::kData, a.map + " is not a feature map");
  }
  const LabelSet labels = read_label_vectors(a.labels);
  if (labels.vectors.cols() != map.config().channels) {
    fail(ErrorKind::kData, a.labels + ": label vectors have " +
                               std::to_string(labels.vectors.cols()) + " channels, map has " +
                               std::to_string(map.config().channels));
  }
  const Mesh m = load_mesh_ply(a.mesh);
  const Classification cls = classify_points(map, enc, m.vertices, labels.vectors, a.threshold);

  static const std::uint8_t palette[][3] = {{230, 25, 75},  {60, 180, 75},  {0, 130, 200},
                                            {245, 130, 48}, {145, 30, 180}, {70, 240, 240},
                                            {240, 50, 230}, {210, 245, 60}, {250, 190, 212},
                                            {0, 128, 128}};
  constexpr std::size_t kPalette = sizeof palette / sizeof palette[0];
  PlyData ply;
  ply.vertices = m.vertices;
  ply.faces = m.triangles;
  ply.colors = Colors::Zero(m.vertex_count(), 3);
  ply.labels = std::vector<std::int32_t>(cls.labels.begin(), cls.labels.end());
  std::vector<std::size_t> counts(labels.names.size() + 1, 0);
  for (Eigen::Index v = 0; v < m.vertex_count(); ++v) {
    const int l = cls.labels[static_cast<std::size_t>(v)];
    ++counts[static_cast<std::size_t>(l + 1)];
    if (l < 0) continue;
    for (int c = 0; c < 3; ++c) (*ply.colors)(v, c) = palette[static_cast<std::size_t>(l) % kPalette][c];
  }
  save_ply(a.out, ply, format_of(a.ascii));
  std::printf("label,name,vertices\n-1,unlabeled,%zu\n", counts[0]);
  for (std::size_t k = 0; k < labels.names.size(); ++k) {
    std::printf("%zu,%s,%zu\n", k, labels.names[k].c_str(), counts[k + 1]);
  }
  return 0;
}

int eval_synthetic(const EvalSyntheticArgs& a) {
  require(a.threshold > 0.0, "--threshold must be positive");
  require(a.samples >= 1, "--samples must be positive");
  const SyntheticScene scene(read_scene_spec(a.scene));
  const Mesh m = load_mesh_ply(a.mesh);

  const Points ref = scene.sample_surface(a.samples, a.seed);
  const Points rec = sample_mesh_surface(m, a.samples, a.seed + 1);
  const SurfaceMetrics sm = compare_surfaces(rec, ref, a.threshold);

  CameraArgs ca = a.camera;
  if (ca.scene.empty()) ca.scene = a.scene;
  const Camera cam = resolve_camera(ca);
  const RenderResult truth = scene.render(cam);
  RenderResult r;
  std::optional<LatentImplicitMap> map;
  std::optional<PositionalEncoder> enc;
  if (!a.map.empty()) {
    require(!a.basis.empty(), "--map needs --basis");
    enc = PositionalEncoder::load(a.basis);
    map = LatentImplicitMap::load(a.map);
    if (map->config().kind == FieldKind::kSdf || map->config().channels != 3) {
      fail(ErrorKind::kData, a.map + " is not a 3-channel color map");
    }
    r = raycast_render(m, cam, &*map, &*enc);
  } else {
    r = raycast_render(m, cam);
    r.property = Image<float>(truth.property.width, truth.property.height, truth.property.channels);
    r.property_valid = Image<std::uint8_t>(truth.property.width, truth.property.height, 1);
  }
  const RenderMetrics rm =
      compare_renders(r.depth, r.property, r.property_valid, truth.depth, truth.property,
                      truth.property_valid);

  const auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json out{{"threshold", a.threshold},
           {"accuracy", num(sm.accuracy)},
           {"completeness", num(sm.completeness)},
           {"precision", sm.precision},
           {"recall", sm.recall},
           {"f1", sm.f1},
           {"depth_l1", rm.depth_pixels ? num(rm.depth_l1) : json(nullptr)},
           {"depth_pixels", rm.depth_pixels},
           {"psnr", map && rm.color_pixels ? num(rm.psnr) : json(nullptr)},
           {"color_pixels", rm.color_pixels}};
  std::printf("%s\n", out.dump().c_str());
  return 0;
}

}  // namespace lim::cli
