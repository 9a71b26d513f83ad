#include "lim/encoder.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <string>

#include "lim/error.hpp"

namespace lim {

void EncodingConfig::validate() const {
  require(std::isfinite(noise) && noise > 0.0, "encoding noise must be positive");
  require(min_points >= 1, "min_points must be at least 1");
}

EncodingConfig EncodingConfig::defaults_for(FieldKind kind) {
  EncodingConfig cfg;
  if (kind == FieldKind::kSdf) {
    cfg.min_points = 8;
    cfg.noise = 0.1;
  }
  return cfg;
}

Matrix solve_latent(const Matrix& design, const Matrix& targets, double noise) {
  const Eigen::Index rank = design.rows();
  Matrix gram = Matrix::Identity(rank, rank) * (noise * noise);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(design);
  Eigen::LLT<Matrix> llt(gram.selfadjointView<Eigen::Lower>());
  if (llt.info() != Eigen::Success) {
    fail(ErrorKind::kNumeric, "latent system is not positive definite");
  }
  return llt.solve(design * targets);
}

LatentFeature encode(const PositionalEncoder& enc, const Points& x, const Matrix& y,
                     const EncodingConfig& cfg, FieldKind kind) {
  cfg.validate();
  if (x.rows() != y.rows()) {
    fail(ErrorKind::kData, "point and value row counts differ (" + std::to_string(x.rows()) +
                               " vs " + std::to_string(y.rows()) + ")");
  }
  if (x.rows() < cfg.min_points) {
    fail(ErrorKind::kEmptyVoxel, "voxel has " + std::to_string(x.rows()) +
                                     " observations, fewer than " +
                                     std::to_string(cfg.min_points));
  }
  if (y.cols() < 1) fail(ErrorKind::kData, "values need at least one channel");
  if (!x.allFinite() || !y.allFinite()) fail(ErrorKind::kData, "non-finite encoder input");
  if (kind == FieldKind::kSdf && y.cols() != 1) {
    fail(ErrorKind::kData, "sdf latents carry exactly one channel");
  }
  return {solve_latent(enc.encode_batch(x), y, cfg.noise), kind};
}

Vector decode(const PositionalEncoder& enc, const LatentFeature& feature, const Vec3& x) {
  if (feature.rank() != enc.rank()) fail(ErrorKind::kData, "latent rank does not match encoder");
  return feature.matrix.transpose() * enc.encode(x);
}

Matrix decode_batch(const PositionalEncoder& enc, const LatentFeature& feature, const Points& x) {
  if (feature.rank() != enc.rank()) fail(ErrorKind::kData, "latent rank does not match encoder");
  return enc.encode_batch(x).transpose() * feature.matrix;
}

Points decode_gradient_batch(const PositionalEncoder& enc, const LatentFeature& feature,
                             const Points& x) {
  if (feature.rank() != enc.rank()) fail(ErrorKind::kData, "latent rank does not match encoder");
  if (feature.channels() != 1) fail(ErrorKind::kData, "gradient needs a single-channel latent");
  Points grad(x.rows(), 3);
  for (int axis = 1; axis <= 3; ++axis) {
    grad.col(axis - 1) = enc.encode_deriv_batch(x, axis).transpose() * feature.matrix.col(0);
  }
  return grad;
}

}  // namespace lim
