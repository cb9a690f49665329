#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "lrsense/error.hpp"

namespace lrsense {

/// Square symmetric matrix. Symmetry is exact: every constructor path
/// averages (M + M^T) / 2, which is bitwise symmetric in IEEE arithmetic.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(int n) : data_(Eigen::MatrixXd::Zero(n, n)) {}

  static SymMatrix symmetrize(const Eigen::MatrixXd& m);
  static SymMatrix identity(int n);
  static SymMatrix diagonal(const Eigen::VectorXd& d);
  /// U U^T for a tall factor.
  static SymMatrix gram(const Eigen::MatrixXd& u);

  int n() const { return static_cast<int>(data_.rows()); }
  const Eigen::MatrixXd& mat() const { return data_; }
  double operator()(int i, int j) const { return data_(i, j); }
  double fro_norm() const { return data_.norm(); }

 private:
  Eigen::MatrixXd data_;
};

/// n x r factor U of the Burer-Monteiro parameterization X = U U^T.
class Factor {
 public:
  Factor() = default;
  explicit Factor(Eigen::MatrixXd u);
  static Factor zeros(int n, int r) { return Factor(Eigen::MatrixXd::Zero(n, r)); }

  int n() const { return static_cast<int>(data_.rows()); }
  int r() const { return static_cast<int>(data_.cols()); }
  const Eigen::MatrixXd& mat() const { return data_; }
  Eigen::MatrixXd& mat() { return data_; }
  SymMatrix gram() const { return SymMatrix::gram(data_); }

 private:
  Eigen::MatrixXd data_;
};

/// Seed plus stream label. Equal (seed, label) pairs yield identical draws.
struct RngSpec {
  std::uint64_t seed = 0;
  std::string label;

  std::mt19937_64 engine() const;
  /// Independent sub-stream, e.g. one per Monte-Carlo trial.
  RngSpec child(std::string_view sublabel, std::uint64_t index = 0) const;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t hash_label(std::string_view label);
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t value);

Eigen::MatrixXd standard_normal(int rows, int cols, std::mt19937_64& gen);

struct GroundTruth {
  SymMatrix x_nat;
  Factor u_nat;
  int true_rank = 0;
  double sigma_min = 0.0;
  double sigma_max = 0.0;
  double kappa = 1.0;
  /// Orthonormal bases of col(X) (n x r*) and its complement (n x (n - r*)).
  Eigen::MatrixXd col_basis;
  Eigen::MatrixXd perp_basis;

  int n() const { return x_nat.n(); }
};

/// Planted rank-r* PSD matrix X = U U^T, U Gaussian, rescaled to ||X||_F = 1.
GroundTruth generate_ground_truth(int n, int r_star, const RngSpec& rng);

Eigen::VectorXd gaussian_noise(int m, double sigma, const RngSpec& rng);

struct SymSvd {
  Eigen::VectorXd singular_values;  // descending
  Eigen::VectorXd eigenvalues;      // signed, same order as singular_values
  Eigen::MatrixXd vectors;          // n x n, column i pairs with value i
  int rank = 0;                     // count of singular values above the cutoff

  Eigen::MatrixXd basis() const { return vectors.leftCols(rank); }
  Eigen::MatrixXd complement() const { return vectors.rightCols(vectors.cols() - rank); }
  Eigen::MatrixXd reconstruct() const;
};

inline constexpr double kRankCutoff = 1e-10;

/// Symmetric eigendecomposition reported as singular values. Throws
/// ConvergenceFailure if the eigensolver does not converge.
SymSvd sym_svd(const SymMatrix& x, double rank_cutoff = kRankCutoff);

double spectral_norm(const Eigen::MatrixXd& m);
double nuclear_norm(const Eigen::MatrixXd& m);

}  // namespace lrsense
