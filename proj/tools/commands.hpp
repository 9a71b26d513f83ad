#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lim::cli {

struct BuildBasisArgs {
  std::uint64_t seed = 1;
  int anchors = 256;
  int rank = 20;
  double sigma = 1.0;
  double rho = 0.5;
  std::string out;
};

struct MakeSceneArgs {
  std::string scene;
  std::string out_dir;
  std::string mode = "cloud";  // cloud | depth
  int width = 640;
  int height = 480;
};

struct ReconstructArgs {
  std::string frames;
  std::string basis;
  std::string out_dir;
  double surface_voxel = 0.05;
  double color_voxel = 0.02;
  std::optional<double> feature_voxel;  // defaults to color_voxel
  int stride = 1;
  std::string gpis_mode = "sample";
  double gpis_distance = 0.1;
  std::optional<double> sdf_noise;
  std::optional<double> property_noise;
  std::vector<std::string> feature_channels{"feature"};
  bool skip_surface = false;
};

struct MeshArgs {
  std::string map;
  std::string basis;
  std::string out;
  int samples_per_axis = 8;
  bool ascii = false;
};

struct ColorizeArgs {
  std::string map;
  std::string basis;
  std::string mesh;
  std::string out;
  bool ascii = false;
};

struct CameraArgs {
  std::string intrinsics;  // "fx,fy,cx,cy,width,height"
  std::string pose;        // 16 comma-separated floats, row-major camera-to-world
  std::string scene;       // scene spec whose default camera is used
};

struct RenderArgs {
  std::string mesh;
  std::string map;
  std::string basis;
  std::string depth_out;
  std::string color_out;
  CameraArgs camera;
};

struct QuerySemanticArgs {
  std::string map;
  std::string basis;
  std::string mesh;
  std::string labels;
  std::string out;
  std::optional<double> threshold;
  bool ascii = false;
};

struct EvalSyntheticArgs {
  std::string scene;
  std::string mesh;
  std::string map;
  std::string basis;
  double threshold = 0.025;
  std::size_t samples = 100000;
  std::uint64_t seed = 1;
  CameraArgs camera;
};

int build_basis(const BuildBasisArgs& a);
int make_scene(const MakeSceneArgs& a);
int reconstruct(const ReconstructArgs& a);
int mesh(const MeshArgs& a);
int colorize(const ColorizeArgs& a);
int render(const RenderArgs& a);
int query_semantic(const QuerySemanticArgs& a);
int eval_synthetic(const EvalSyntheticArgs& a);

}  // namespace lim::cli
