#pragma once

#include <vector>

#include "lim/encoder.hpp"

namespace lim {

/// How zero-level surface points become an SDF regression problem.
enum class GpisMode {
  kSample,      // add +/- offset samples along the normal
  kDerivative,  // regress the gradient against the normal directly
};

struct GpisConfig {
  GpisMode mode = GpisMode::kSample;
  double sample_distance = 0.1;  // normalized voxel units
  int samples_per_point = 2;

  void validate() const;
};

/// Surface points with unit normals. Normals point into free space.
struct OrientedPoints {
  Points points;
  Points normals;

  Eigen::Index size() const { return points.rows(); }
  void validate() const;
};

struct NormalEstimate {
  Points normals;
  /// true where the neighborhood was degenerate and the normal fell back to
  /// the viewpoint direction.
  std::vector<bool> degenerate;
};

/// PCA normals over k nearest neighbors, oriented toward `viewpoint`.
NormalEstimate estimate_normals(const Points& points, int k, const Vec3& viewpoint);

struct ExtendedSamples {
  Points points;  // 3N × 3
  Vector values;  // 3N signed distances
};

/// For each (x, s) emits (x, 0), (x + d s, +d), (x - d s, -d), in that order.
/// Positive distance is free space.
ExtendedSamples extend_samples(const OrientedPoints& op, double distance);

/// Sample-based GPIS: extend along normals, then encode the signed distances.
/// `cfg.min_points` applies to the original point count.
LatentFeature encode_surface_sample(const PositionalEncoder& enc, const OrientedPoints& op,
                                    double distance, const EncodingConfig& cfg);

struct GpisDesign {
  Matrix design;  // rank × 4N: [f(X), df/dx1, df/dx2, df/dx3]
  Vector targets;  // 4N: [0..., s_1..., s_2..., s_3...]
};

GpisDesign derivative_design(const PositionalEncoder& enc, const OrientedPoints& op);

/// Derivative-based GPIS: zero values plus normals as gradient observations.
LatentFeature encode_surface_derivative(const PositionalEncoder& enc, const OrientedPoints& op,
                                        const EncodingConfig& cfg);

/// Dispatches on `gpis.mode`.
LatentFeature encode_surface(const PositionalEncoder& enc, const OrientedPoints& op,
                             const GpisConfig& gpis, const EncodingConfig& cfg);

}  // namespace lim
