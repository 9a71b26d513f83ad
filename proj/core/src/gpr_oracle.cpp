#include "lim/gpr_oracle.hpp"

#include <Eigen/Cholesky>
#include <string>

#include "lim/error.hpp"

namespace lim {

Matrix exact_gpr_oracle(const Points& x, const Matrix& y, const Points& x_star,
                        const KernelFn& kernel, double noise) {
  const auto n = static_cast<std::size_t>(x.rows());
  require(n <= kOracleMaxPoints,
          "exact GPR oracle is capped at " + std::to_string(kOracleMaxPoints) + " points");
  require(y.rows() == x.rows(), "oracle targets must match the training points");
  require(noise >= 0.0, "oracle noise must be non-negative");
  Matrix k(x.rows(), x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      k(i, j) = k(j, i) = kernel(x.row(i).transpose(), x.row(j).transpose());
    }
  }
  k.diagonal().array() += noise * noise;
  Matrix ks(x_star.rows(), x.rows());
  for (Eigen::Index i = 0; i < x_star.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.rows(); ++j) {
      ks(i, j) = kernel(x_star.row(i).transpose(), x.row(j).transpose());
    }
  }
  const Eigen::LDLT<Matrix> ldlt(k);
  if (ldlt.info() != Eigen::Success) fail(ErrorKind::kNumeric, "oracle factorization failed");
  return ks * ldlt.solve(y);
}

Matrix exact_gpr_oracle(const Points& x, const Matrix& y, const Points& x_star,
                        const KernelParams& params, double noise) {
  params.validate();
  return exact_gpr_oracle(
      x, y, x_star,
      [&params](const Vec3& a, const Vec3& b) { return matern72((a - b).norm(), params); }, noise);
}

}  // namespace lim
