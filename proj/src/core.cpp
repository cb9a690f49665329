#include "lrsense/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace lrsense {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidDimension: return "invalid-dimension";
    case ErrorCode::DimensionMismatch: return "dimension-mismatch";
    case ErrorCode::ConvergenceFailure: return "convergence-failure";
    case ErrorCode::AllocationFailure: return "allocation-failure";
    case ErrorCode::TooManySamples: return "too-many-samples";
    case ErrorCode::InvalidConfig: return "invalid-config";
    case ErrorCode::Divergence: return "divergence";
    case ErrorCode::NonFiniteValue: return "non-finite-value";
    case ErrorCode::InvalidSplitSize: return "invalid-split-size";
    case ErrorCode::EmptyTrajectory: return "empty-trajectory";
    case ErrorCode::InsufficientPoints: return "insufficient-points";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

SymMatrix SymMatrix::symmetrize(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() < 1) {
    throw Error(ErrorCode::InvalidDimension, "symmetric matrix must be square with n >= 1");
  }
  SymMatrix s;
  s.data_ = 0.5 * (m + m.transpose());
  return s;
}

SymMatrix SymMatrix::identity(int n) {
  return symmetrize(Eigen::MatrixXd::Identity(n, n));
}

SymMatrix SymMatrix::diagonal(const Eigen::VectorXd& d) {
  return symmetrize(d.asDiagonal().toDenseMatrix());
}

SymMatrix SymMatrix::gram(const Eigen::MatrixXd& u) {
  return symmetrize(u * u.transpose());
}

Factor::Factor(Eigen::MatrixXd u) : data_(std::move(u)) {
  if (data_.rows() < 1 || data_.cols() < 1) {
    throw Error(ErrorCode::InvalidDimension, "factor must have n >= 1 and r >= 1");
  }
}

// SplitMix64 finalizer (Steele, Lea, Flood). Stable across versions: seeds
// written to reports depend on it.
std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// 64-bit FNV-1a.
std::uint64_t hash_label(std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t value) {
  return splitmix64(seed ^ splitmix64(value));
}

std::mt19937_64 RngSpec::engine() const {
  return std::mt19937_64(mix_seed(seed, hash_label(label)));
}

RngSpec RngSpec::child(std::string_view sublabel, std::uint64_t index) const {
  std::string label_out = label;
  label_out += '/';
  label_out += sublabel;
  return RngSpec{mix_seed(seed, index), std::move(label_out)};
}

Eigen::MatrixXd standard_normal(int rows, int cols, std::mt19937_64& gen) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd out(rows, cols);
  // Fill in row-major order so draw order matches the documented layout.
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) out(i, j) = normal(gen);
  }
  return out;
}

GroundTruth generate_ground_truth(int n, int r_star, const RngSpec& rng) {
  if (n < 1 || r_star < 1 || r_star > n) {
    throw Error(ErrorCode::InvalidDimension, "ground truth requires 1 <= r* <= n");
  }
  auto gen = rng.engine();
  Eigen::MatrixXd u = standard_normal(n, r_star, gen);
  // ||(cU)(cU)^T||_F = c^2 ||U U^T||_F, so a scalar rescale of the factor hits
  // unit Frobenius norm without changing singular vectors.
  const double fro = (u * u.transpose()).norm();
  u *= 1.0 / std::sqrt(fro);

  GroundTruth gt;
  gt.u_nat = Factor(u);
  gt.x_nat = SymMatrix::gram(u);
  gt.true_rank = r_star;

  const SymSvd svd = sym_svd(gt.x_nat);
  if (svd.rank != r_star) {
    throw Error(ErrorCode::ConvergenceFailure, "generated ground truth is numerically rank deficient");
  }
  gt.sigma_max = svd.singular_values(0);
  gt.sigma_min = svd.singular_values(r_star - 1);
  gt.kappa = gt.sigma_max / gt.sigma_min;
  gt.col_basis = svd.basis();
  gt.perp_basis = svd.complement();
  return gt;
}

Eigen::VectorXd gaussian_noise(int m, double sigma, const RngSpec& rng) {
  if (m < 0 || sigma < 0.0) {
    throw Error(ErrorCode::InvalidDimension, "noise requires m >= 0 and sigma >= 0");
  }
  Eigen::VectorXd e = Eigen::VectorXd::Zero(m);
  if (sigma == 0.0) return e;
  auto gen = rng.engine();
  std::normal_distribution<double> normal(0.0, sigma);
  for (int i = 0; i < m; ++i) e(i) = normal(gen);
  return e;
}

Eigen::MatrixXd SymSvd::reconstruct() const {
  return vectors * eigenvalues.asDiagonal() * vectors.transpose();
}

SymSvd sym_svd(const SymMatrix& x, double rank_cutoff) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(x.mat());
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::ConvergenceFailure, "symmetric eigensolver did not converge");
  }
  const Eigen::VectorXd& lambda = solver.eigenvalues();
  const int n = static_cast<int>(lambda.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  // Eigen returns ascending eigenvalues; sort by magnitude, stable so equal
  // magnitudes keep the solver's deterministic order.
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return std::abs(lambda(a)) > std::abs(lambda(b)); });

  SymSvd out;
  out.singular_values.resize(n);
  out.eigenvalues.resize(n);
  out.vectors.resize(n, n);
  for (int i = 0; i < n; ++i) {
    out.eigenvalues(i) = lambda(order[i]);
    out.singular_values(i) = std::abs(lambda(order[i]));
    out.vectors.col(i) = solver.eigenvectors().col(order[i]);
  }
  out.rank = static_cast<int>((out.singular_values.array() > rank_cutoff).count());
  return out;
}

double spectral_norm(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0);
}

double nuclear_norm(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues().sum();
}

}  // namespace lrsense
