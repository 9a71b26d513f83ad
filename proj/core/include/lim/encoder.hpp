#pragma once

#include "lim/kernel.hpp"
#include "lim/types.hpp"

namespace lim {

/// rank × channels latent matrix summarizing one region's field.
struct LatentFeature {
  Matrix matrix;
  FieldKind kind = FieldKind::kProperty;

  int rank() const { return static_cast<int>(matrix.rows()); }
  int channels() const { return static_cast<int>(matrix.cols()); }
};

struct EncodingConfig {
  double noise = 0.05;  // regression noise std, value units
  int min_points = 4;

  void validate() const;

  /// SDF voxels: 8 observations, noise 0.1. Property and feature voxels:
  /// 4 observations, noise 0.05.
  static EncodingConfig defaults_for(FieldKind kind);
};

/// Solves F = (Phi Phi^T + noise^2 I)^{-1} Phi Y for a precomputed design
/// Phi (rank × M) and targets Y (M × c). Shared by the GPIS encoders.
Matrix solve_latent(const Matrix& design, const Matrix& targets, double noise);

/// Encodes values Y (N × c) observed at normalized coordinates X.
///
/// Equal to f(X) (f(X)^T f(X) + noise^2 I)^{-1} Y, computed in the rank × rank
/// feature space. Throws kEmptyVoxel below `cfg.min_points` and kData on
/// non-finite input.
LatentFeature encode(const PositionalEncoder& enc, const Points& x, const Matrix& y,
                     const EncodingConfig& cfg, FieldKind kind = FieldKind::kProperty);

/// f(x)^T F, a c-vector.
Vector decode(const PositionalEncoder& enc, const LatentFeature& feature, const Vec3& x);

/// Row i is decode(x.row(i)). One encoding-matrix build for all rows.
Matrix decode_batch(const PositionalEncoder& enc, const LatentFeature& feature, const Points& x);

/// Spatial gradient of a single-channel field: row i is d/dx decode(x_i).
Points decode_gradient_batch(const PositionalEncoder& enc, const LatentFeature& feature,
                             const Points& x);

}  // namespace lim
