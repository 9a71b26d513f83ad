#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string_view>

namespace lim {

using Vec3 = Eigen::Vector3d;
using Mat4 = Eigen::Matrix4d;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// N×3 point set, one point per row.
using Points = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// What a latent map encodes. Determines defaults, not arithmetic.
enum class FieldKind : std::uint32_t {
  kSdf = 0,
  kProperty = 1,
  kFeature = 2,
};

std::string_view to_string(FieldKind kind);

/// Axis-aligned cube [lo, hi]^3.
struct Cube {
  double lo = -0.5;
  double hi = 0.5;

  double edge() const { return hi - lo; }
};

}  // namespace lim
