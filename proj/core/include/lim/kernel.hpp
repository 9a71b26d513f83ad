#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "lim/types.hpp"

namespace lim {

/// Matérn covariance hyperparameters. Smoothness is fixed at nu = 7/2; the
/// closed form used below is only valid for that value.
struct KernelParams {
  double sigma = 1.0;  // amplitude, field units
  double rho = 0.5;    // length scale, normalized voxel units
  static constexpr double kNu = 3.5;

  void validate() const;
};

/// Matérn-7/2 covariance at distance d:
///   sigma^2 (1 + a + 2/5 a^2 + 1/15 a^3) exp(-a),  a = sqrt(7) d / rho.
double matern72(double d, const KernelParams& params);

/// d k / d d. Zero at d = 0 and non-positive everywhere.
double matern72_ddist(double d, const KernelParams& params);

/// Parameters for drawing the anchor set and truncating its eigenbasis.
struct BasisConfig {
  std::uint64_t seed = 1;
  int n_anchors = 256;
  Cube domain{};
  KernelParams params{};
  int rank = 20;
};

/// Nyström feature map f(x) = diag(sqrt(1/lambda)) U^T k(x, anchors).
///
/// Inner products f(x1)^T f(x2) approximate k(x1, x2); with rank equal to
/// the anchor count the approximation is exact on the anchors themselves.
/// Immutable after construction, so every method is safe to call
/// concurrently.
class PositionalEncoder {
 public:
  /// Samples anchors, eigendecomposes their Gram matrix, keeps the top
  /// `rank` eigenpairs. Throws kNumeric if a retained eigenvalue falls
  /// below 1e-9 of the largest.
  static PositionalEncoder build(const BasisConfig& cfg);

  int rank() const { return static_cast<int>(eigenvalues_.size()); }
  int n_anchors() const { return static_cast<int>(anchors_.rows()); }
  const KernelParams& params() const { return params_; }
  const Cube& domain() const { return domain_; }
  std::uint64_t seed() const { return seed_; }
  const Points& anchors() const { return anchors_; }
  const Vector& eigenvalues() const { return eigenvalues_; }
  /// rank × n_anchors; row i is sqrt(1/lambda_i) u_i^T.
  const Matrix& weights() const { return weights_; }

  Vector encode(const Vec3& x) const;
  /// Returns rank × N; column j encodes row j of `x`.
  Matrix encode_batch(const Points& x) const;

  /// Partial derivative of the encoding along axis 1, 2 or 3.
  Vector encode_deriv(const Vec3& x, int axis) const;
  /// rank × N derivatives along `axis` (1-based).
  Matrix encode_deriv_batch(const Points& x, int axis) const;

  /// Kernel row k(x, anchors) for each point: N × n_anchors.
  Matrix anchor_kernel(const Points& x) const;

  void save(std::ostream& os) const;
  static PositionalEncoder load(std::istream& is);
  void save(const std::string& path) const;
  static PositionalEncoder load(const std::string& path);

  /// Hash of the serialized basis. Maps record it to refuse decoding with a
  /// different encoder.
  std::uint64_t fingerprint() const { return fingerprint_; }

 private:
  PositionalEncoder() = default;
  void check_invariants() const;
  void seal();
  /// Columns [0, x.rows()) of `out` (n_anchors × x.rows()) get the kernel
  /// row of each point, or its derivative along `axis` (0-based) if >= 0.
  void kernel_columns(const Points& x, Eigen::Index start, Eigen::Index rows, int axis,
                      Matrix& out) const;

  Points anchors_;
  // Anchor coordinates by axis, one contiguous row per axis.
  Eigen::Matrix<double, 3, Eigen::Dynamic, Eigen::RowMajor> anchor_axes_;
  KernelParams params_;
  Cube domain_;
  std::uint64_t seed_ = 0;
  Vector eigenvalues_;
  Matrix weights_;
  std::uint64_t fingerprint_ = 0;
};

/// Uniform [0, 1) double from a counter-based generator: the value depends
/// only on (seed, counter).
double counter_uniform(std::uint64_t seed, std::uint64_t counter);

}  // namespace lim
