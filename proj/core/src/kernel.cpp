#include "lim/kernel.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "lim/binary_io.hpp"
#include "lim/error.hpp"

namespace lim {
namespace {

constexpr std::uint32_t kBasisVersion = 1;
constexpr double kEigenFloor = 1e-9;
constexpr Eigen::Index kChunkRows = 256;
const double kSqrt7 = std::sqrt(7.0);

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Elementwise kernel on a block of scaled distances.
template <typename Derived>
auto kernel_of_scaled(const Eigen::ArrayBase<Derived>& a, double sigma2) {
  return sigma2 * (1.0 + a * (1.0 + a * (0.4 + a * (1.0 / 15.0)))) * (-a).exp();
}

}  // namespace

void KernelParams::validate() const {
  require(std::isfinite(sigma) && sigma > 0.0, "kernel sigma must be positive");
  require(std::isfinite(rho) && rho > 0.0, "kernel rho must be positive");
}

double matern72(double d, const KernelParams& params) {
  const double a = kSqrt7 * d / params.rho;
  return params.sigma * params.sigma * (1.0 + a + 0.4 * a * a + a * a * a / 15.0) * std::exp(-a);
}

double matern72_ddist(double d, const KernelParams& params) {
  // dk/da = -sigma^2 a (3 + 3a + a^2) / 15 exp(-a)
  const double a = kSqrt7 * d / params.rho;
  const double dk_da =
      -params.sigma * params.sigma * a * (3.0 + 3.0 * a + a * a) / 15.0 * std::exp(-a);
  return dk_da * kSqrt7 / params.rho;
}

double counter_uniform(std::uint64_t seed, std::uint64_t counter) {
  const std::uint64_t h = mix64(mix64(seed) ^ mix64(counter ^ 0xa0761d6478bd642fULL));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

PositionalEncoder PositionalEncoder::build(const BasisConfig& cfg) {
  cfg.params.validate();
  require(cfg.rank >= 1, "rank must be at least 1");
  require(cfg.n_anchors >= cfg.rank, "anchor count must be at least the rank");
  require(std::isfinite(cfg.domain.lo) && std::isfinite(cfg.domain.hi) &&
              cfg.domain.hi > cfg.domain.lo,
          "anchor domain must be a non-degenerate cube");

  PositionalEncoder enc;
  enc.params_ = cfg.params;
  enc.domain_ = cfg.domain;
  enc.seed_ = cfg.seed;
  enc.anchors_.resize(cfg.n_anchors, 3);
  for (int i = 0; i < cfg.n_anchors; ++i) {
    for (int j = 0; j < 3; ++j) {
      const auto counter = static_cast<std::uint64_t>(3 * i + j);
      enc.anchors_(i, j) = cfg.domain.lo + cfg.domain.edge() * counter_uniform(cfg.seed, counter);
    }
  }

  enc.anchor_axes_ = enc.anchors_.transpose();
  Matrix gram = enc.anchor_kernel(enc.anchors_);
  gram = 0.5 * (gram + gram.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  if (eig.info() != Eigen::Success) {
    fail(ErrorKind::kNumeric, "eigendecomposition of the anchor kernel matrix failed");
  }

  // Eigen returns ascending order; keep the top `rank` in descending order.
  const int n = cfg.n_anchors;
  const double largest = eig.eigenvalues()(n - 1);
  enc.eigenvalues_.resize(cfg.rank);
  enc.weights_.resize(cfg.rank, n);
  for (int i = 0; i < cfg.rank; ++i) {
    const double lambda = eig.eigenvalues()(n - 1 - i);
    if (!(lambda > kEigenFloor * largest)) {
      std::ostringstream msg;
      msg << "eigenvalue " << i << " (" << lambda << ") is below the floor "
          << kEigenFloor * largest << "; the anchor set is numerically rank-deficient";
      fail(ErrorKind::kNumeric, msg.str());
    }
    Vector u = eig.eigenvectors().col(n - 1 - i);
    // Fix the sign so that the largest-magnitude component is positive.
    Eigen::Index arg = 0;
    u.cwiseAbs().maxCoeff(&arg);
    if (u(arg) < 0.0) u = -u;
    enc.eigenvalues_(i) = lambda;
    enc.weights_.row(i) = u.transpose() / std::sqrt(lambda);
  }
  enc.seal();
  return enc;
}

void PositionalEncoder::kernel_columns(const Points& x, Eigen::Index start, Eigen::Index rows,
                                       int axis, Matrix& out) const {
  const double scale = kSqrt7 / params_.rho;
  const double sigma2 = params_.sigma * params_.sigma;
  // dk/dx = -sigma^2 (7 / rho^2) (3 + 3a + a^2) / 15 exp(-a) (x - anchor)
  const double coeff = -sigma2 * 7.0 / (params_.rho * params_.rho) / 15.0;
  out.resize(n_anchors(), rows);
  Eigen::ArrayXd a(n_anchors());
  for (Eigen::Index j = 0; j < rows; ++j) {
    const auto p = x.row(start + j);
    a = ((anchor_axes_.row(0).array() - p(0)).square() +
         (anchor_axes_.row(1).array() - p(1)).square() +
         (anchor_axes_.row(2).array() - p(2)).square())
            .transpose()
            .sqrt() *
        scale;
    if (axis < 0) {
      out.col(j) = kernel_of_scaled(a, sigma2).matrix();
    } else {
      out.col(j) = (coeff * (3.0 + a * (3.0 + a)) * (-a).exp() *
                    (p(axis) - anchor_axes_.row(axis).array().transpose()))
                       .matrix();
    }
  }
}

Matrix PositionalEncoder::anchor_kernel(const Points& x) const {
  Matrix cols;
  kernel_columns(x, 0, x.rows(), -1, cols);
  return cols.transpose();
}

Vector PositionalEncoder::encode(const Vec3& x) const {
  Points p(1, 3);
  p.row(0) = x.transpose();
  return encode_batch(p).col(0);
}

Matrix PositionalEncoder::encode_batch(const Points& x) const {
  const Eigen::Index n = x.rows();
  Matrix out(rank(), n);
  Matrix cols;
  for (Eigen::Index start = 0; start < n; start += kChunkRows) {
    const Eigen::Index rows = std::min(kChunkRows, n - start);
    kernel_columns(x, start, rows, -1, cols);
    out.middleCols(start, rows).noalias() = weights_ * cols;
  }
  return out;
}

Vector PositionalEncoder::encode_deriv(const Vec3& x, int axis) const {
  Points p(1, 3);
  p.row(0) = x.transpose();
  return encode_deriv_batch(p, axis).col(0);
}

Matrix PositionalEncoder::encode_deriv_batch(const Points& x, int axis) const {
  require(axis >= 1 && axis <= 3, "derivative axis must be 1, 2 or 3");
  const Eigen::Index n = x.rows();
  Matrix out(rank(), n);
  Matrix cols;
  for (Eigen::Index start = 0; start < n; start += kChunkRows) {
    const Eigen::Index rows = std::min(kChunkRows, n - start);
    kernel_columns(x, start, rows, axis - 1, cols);
    out.middleCols(start, rows).noalias() = weights_ * cols;
  }
  return out;
}

void PositionalEncoder::check_invariants() const {
  if (rank() < 1 || rank() > n_anchors()) fail(ErrorKind::kParse, "basis rank out of range");
  if (weights_.rows() != rank() || weights_.cols() != n_anchors()) {
    fail(ErrorKind::kParse, "basis weight matrix has the wrong shape");
  }
  for (int i = 0; i < rank(); ++i) {
    if (!(eigenvalues_(i) > 0.0) || (i > 0 && eigenvalues_(i) > eigenvalues_(i - 1))) {
      fail(ErrorKind::kParse, "basis eigenvalues must be positive and non-increasing");
    }
  }
}

void PositionalEncoder::save(std::ostream& os) const {
  binary::write_magic(os, "LIMB");
  binary::write<std::uint32_t>(os, kBasisVersion);
  binary::write<std::uint32_t>(os, static_cast<std::uint32_t>(n_anchors()));
  binary::write<std::uint32_t>(os, static_cast<std::uint32_t>(rank()));
  binary::write(os, domain_.lo);
  binary::write(os, domain_.hi);
  binary::write(os, params_.sigma);
  binary::write(os, params_.rho);
  binary::write(os, KernelParams::kNu);
  binary::write<std::uint64_t>(os, seed_);
  for (Eigen::Index i = 0; i < anchors_.rows(); ++i) {
    for (int j = 0; j < 3; ++j) binary::write(os, anchors_(i, j));
  }
  for (Eigen::Index i = 0; i < eigenvalues_.size(); ++i) binary::write(os, eigenvalues_(i));
  for (Eigen::Index i = 0; i < weights_.rows(); ++i) {
    for (Eigen::Index j = 0; j < weights_.cols(); ++j) binary::write(os, weights_(i, j));
  }
}

PositionalEncoder PositionalEncoder::load(std::istream& is) {
  binary::expect_magic(is, "LIMB");
  const auto version = binary::read<std::uint32_t>(is, "basis version");
  if (version != kBasisVersion) {
    fail(ErrorKind::kParse, "unsupported basis version " + std::to_string(version));
  }
  PositionalEncoder enc;
  const auto n = binary::read<std::uint32_t>(is, "anchor count");
  const auto rank = binary::read<std::uint32_t>(is, "rank");
  if (n == 0 || rank == 0 || rank > n || n > (1u << 20)) {
    fail(ErrorKind::kParse, "basis header has invalid anchor count or rank");
  }
  enc.domain_.lo = binary::read<double>(is, "domain");
  enc.domain_.hi = binary::read<double>(is, "domain");
  enc.params_.sigma = binary::read<double>(is, "sigma");
  enc.params_.rho = binary::read<double>(is, "rho");
  if (binary::read<double>(is, "nu") != KernelParams::kNu) {
    fail(ErrorKind::kParse, "basis smoothness must be 7/2");
  }
  enc.seed_ = binary::read<std::uint64_t>(is, "seed");
  enc.anchors_.resize(n, 3);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) enc.anchors_(i, j) = binary::read<double>(is, "anchors");
  }
  enc.eigenvalues_.resize(rank);
  for (std::uint32_t i = 0; i < rank; ++i) enc.eigenvalues_(i) = binary::read<double>(is, "eigenvalues");
  enc.weights_.resize(rank, n);
  for (std::uint32_t i = 0; i < rank; ++i) {
    for (std::uint32_t j = 0; j < n; ++j) enc.weights_(i, j) = binary::read<double>(is, "weights");
  }
  try {
    enc.params_.validate();
  } catch (const Error& e) {
    fail(ErrorKind::kParse, e.what());
  }
  enc.check_invariants();
  enc.seal();
  return enc;
}

void PositionalEncoder::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorKind::kIo, "cannot open " + path + " for writing");
  save(os);
  if (!os) fail(ErrorKind::kIo, "failed writing " + path);
}

PositionalEncoder PositionalEncoder::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorKind::kIo, "cannot open basis " + path);
  return load(is);
}

void PositionalEncoder::seal() {
  anchor_axes_ = anchors_.transpose();
  std::ostringstream os(std::ios::binary);
  save(os);
  const std::string bytes = os.str();
  fingerprint_ = binary::fnv1a(bytes.data(), bytes.size());
}

}  // namespace lim
