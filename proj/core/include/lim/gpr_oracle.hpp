#pragma once

#include <cstddef>
#include <functional>

#include "lim/kernel.hpp"

namespace lim {

using KernelFn = std::function<double(const Vec3&, const Vec3&)>;

inline constexpr std::size_t kOracleMaxPoints = 5000;

/// Dense GP posterior mean K(X*, X) (K(X, X) + noise^2 I)^{-1} Y with the
/// exact Matérn-7/2 kernel. O(N^3); throws kInvalidArgument above
/// kOracleMaxPoints training points.
Matrix exact_gpr_oracle(const Points& x, const Matrix& y, const Points& x_star,
                        const KernelParams& params, double noise);
/// Same, for an arbitrary kernel.
Matrix exact_gpr_oracle(const Points& x, const Matrix& y, const Points& x_star,
                        const KernelFn& kernel, double noise);

}  // namespace lim
