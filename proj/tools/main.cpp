#include <algorithm>
#include <fstream>
#include <iostream>
#include <new>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "commands.hpp"
#include "lim/error.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

int exit_code(lim::ErrorKind kind) {
  switch (kind) {
    case lim::ErrorKind::kInvalidArgument:
      return kExitUsage;
    case lim::ErrorKind::kNumeric:
      return kExitNumeric;
    default:
      return kExitData;
  }
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

// "--config FILE" anywhere after the subcommand becomes one "--key=value"
// token per line of FILE, placed before the remaining flags so that the
// flags win.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  std::vector<std::string> rest;
  std::vector<std::string> injected;
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string path;
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw CLI::ArgumentMismatch("--config needs a file");
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
      continue;
    }
    std::ifstream is(path);
    if (!is) throw CLI::FileError::Missing(path);
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
      ++line_no;
      line = trim(line.substr(0, line.find('#')));
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos || trim(line.substr(0, eq)).empty()) {
        throw CLI::ParseError(path + ":" + std::to_string(line_no) + ": expected key=value",
                              CLI::ExitCodes::ConfigError);
      }
      injected.push_back("--" + trim(line.substr(0, eq)) + "=" + trim(line.substr(eq + 1)));
    }
  }
  // rest[0] is the subcommand name.
  if (!rest.empty()) out.push_back(rest.front());
  out.insert(out.end(), injected.begin(), injected.end());
  if (rest.size() > 1) out.insert(out.end(), rest.begin() + 1, rest.end());
  return out;
}

CLI::App* add_command(CLI::App& app, const std::string& name, const std::string& help) {
  CLI::App* sub = app.add_subcommand(name, help);
  sub->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  sub->add_option("--config", "key=value file; flags given on the command line take precedence");
  return sub;
}

void add_camera(CLI::App* sub, lim::cli::CameraArgs& c) {
  sub->add_option("--intrinsics", c.intrinsics, "fx,fy,cx,cy,width,height");
  sub->add_option("--pose", c.pose, "16 comma-separated floats, row-major camera-to-world");
  sub->add_option("--camera-scene", c.scene, "scene spec whose default camera is used");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace lim::cli;
  CLI::App app{"Latent implicit maps: build, fuse, mesh, render and query"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  BuildBasisArgs bb;
  auto* c_bb = add_command(app, "build-basis", "Build a positional-encoding basis");
  c_bb->add_option("--seed", bb.seed, "anchor seed");
  c_bb->add_option("--anchors", bb.anchors, "anchor count")->check(CLI::PositiveNumber);
  c_bb->add_option("--rank", bb.rank, "retained eigenpairs")->check(CLI::PositiveNumber);
  c_bb->add_option("--sigma", bb.sigma, "kernel amplitude")->check(CLI::PositiveNumber);
  c_bb->add_option("--rho", bb.rho, "kernel length scale")->check(CLI::PositiveNumber);
  c_bb->add_option("--out", bb.out, "basis file")->required();

  MakeSceneArgs ms;
  auto* c_ms = add_command(app, "make-scene", "Write a synthetic scene as posed frames");
  c_ms->add_option("--scene", ms.scene, "scene spec (key=value)")->required();
  c_ms->add_option("--out-dir", ms.out_dir)->required();
  c_ms->add_option("--mode", ms.mode, "cloud or depth")->check(CLI::IsMember({"cloud", "depth"}));
  c_ms->add_option("--width", ms.width)->check(CLI::PositiveNumber);
  c_ms->add_option("--height", ms.height)->check(CLI::PositiveNumber);

  ReconstructArgs rc;
  auto* c_rc = add_command(app, "reconstruct", "Fuse manifest frames into latent maps");
  c_rc->add_option("--frames", rc.frames, "frame manifest")->required();
  c_rc->add_option("--basis", rc.basis)->required();
  c_rc->add_option("--out-dir", rc.out_dir)->required();
  c_rc->add_option("--surface-voxel", rc.surface_voxel)->check(CLI::PositiveNumber);
  c_rc->add_option("--color-voxel", rc.color_voxel)->check(CLI::PositiveNumber);
  c_rc->add_option("--feature-voxel", rc.feature_voxel, "defaults to --color-voxel")
      ->check(CLI::PositiveNumber);
  c_rc->add_option("--stride", rc.stride, "use every n-th frame")->check(CLI::PositiveNumber);
  c_rc->add_option("--gpis-mode", rc.gpis_mode, "sample or derivative")
      ->check(CLI::IsMember({"sample", "derivative"}));
  c_rc->add_option("--gpis-distance", rc.gpis_distance, "normal offset, normalized units")
      ->check(CLI::PositiveNumber);
  c_rc->add_option("--sdf-noise", rc.sdf_noise)->check(CLI::PositiveNumber);
  c_rc->add_option("--property-noise", rc.property_noise)->check(CLI::PositiveNumber);
  c_rc->add_option("--feature-channel", rc.feature_channels, "channels encoded as feature maps")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll)
      ->delimiter(',');
  c_rc->add_flag("--skip-surface", rc.skip_surface, "only build property maps");

  MeshArgs me;
  auto* c_me = add_command(app, "mesh", "Extract the zero level set of an sdf map");
  c_me->add_option("--map", me.map)->required();
  c_me->add_option("--basis", me.basis)->required();
  c_me->add_option("--out", me.out)->required();
  c_me->add_option("--samples-per-axis", me.samples_per_axis)->check(CLI::Range(2, 64));
  c_me->add_flag("--ascii", me.ascii);

  ColorizeArgs co;
  auto* c_co = add_command(app, "colorize", "Color mesh vertices from a property map");
  c_co->add_option("--map", co.map)->required();
  c_co->add_option("--basis", co.basis)->required();
  c_co->add_option("--mesh", co.mesh)->required();
  c_co->add_option("--out", co.out)->required();
  c_co->add_flag("--ascii", co.ascii);

  RenderArgs re;
  auto* c_re = add_command(app, "render", "Raycast a mesh into depth and color images");
  c_re->add_option("--mesh", re.mesh)->required();
  c_re->add_option("--map", re.map, "property map for color");
  c_re->add_option("--basis", re.basis);
  c_re->add_option("--depth-out", re.depth_out, "16-bit PNG, millimeters");
  c_re->add_option("--color-out", re.color_out, "8-bit PNG");
  add_camera(c_re, re.camera);

  QuerySemanticArgs qs;
  auto* c_qs = add_command(app, "query-semantic", "Label mesh vertices from a feature map");
  c_qs->add_option("--map", qs.map)->required();
  c_qs->add_option("--basis", qs.basis)->required();
  c_qs->add_option("--mesh", qs.mesh)->required();
  c_qs->add_option("--labels", qs.labels, "lines of: name v1 ... vc")->required();
  c_qs->add_option("--out", qs.out)->required();
  c_qs->add_option("--threshold", qs.threshold, "minimum cosine for a label");
  c_qs->add_flag("--ascii", qs.ascii);

  EvalSyntheticArgs ev;
  auto* c_ev = add_command(app, "eval-synthetic", "Score a reconstruction against its scene");
  c_ev->add_option("--scene", ev.scene)->required();
  c_ev->add_option("--mesh", ev.mesh)->required();
  c_ev->add_option("--map", ev.map, "color map for render PSNR");
  c_ev->add_option("--basis", ev.basis);
  c_ev->add_option("--threshold", ev.threshold, "distance threshold, meters")
      ->check(CLI::PositiveNumber);
  c_ev->add_option("--samples", ev.samples, "surface samples each way")->check(CLI::PositiveNumber);
  c_ev->add_option("--seed", ev.seed);
  add_camera(c_ev, ev.camera);

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = expand_config(args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*c_bb) return build_basis(bb);
    if (*c_ms) return make_scene(ms);
    if (*c_rc) return reconstruct(rc);
    if (*c_me) return mesh(me);
    if (*c_co) return colorize(co);
    if (*c_re) return render(re);
    if (*c_qs) return query_semantic(qs);
    if (*c_ev) return eval_synthetic(ev);
  } catch (const lim::Error& e) {
    std::cerr << "lim: error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::bad_alloc&) {
    std::cerr << "lim: error: out of memory\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "lim: error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
