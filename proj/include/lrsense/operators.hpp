#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "lrsense/core.hpp"

namespace lrsense {

enum class OperatorKind : std::uint32_t { DenseGaussian = 0, CompletionMask = 1 };

struct MaskEntry {
  int row = 0;
  int col = 0;
  friend bool operator==(const MaskEntry&, const MaskEntry&) = default;
};

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Linear measurement map A : R^{n x n} -> R^m.
//
// Dense operators store every sensing matrix explicitly, one per row of an
// m x n^2 matrix with A_i laid out row-major. Sensing matrices are not
// symmetrized; adjoint() symmetrizes its output once. Completion operators
// store m distinct (row, col) pairs and measure the raw entries Z[row][col].
//
// normalization() is the constant c with E[c A*A] = I: 1/m for Gaussian
// ensembles, n^2/m for uniformly sampled masks. Losses, gradients and RIP
// ratios apply it at the use site; apply() and adjoint() are always raw.
class SensingOperator {
 public:
  static SensingOperator dense(int n, RowMajorMatrix matrices, std::uint64_t seed = 0);
  static SensingOperator mask(int n, std::vector<MaskEntry> entries, std::uint64_t seed = 0);

  OperatorKind kind() const { return kind_; }
  int n() const { return n_; }
  int m() const { return m_; }
  std::uint64_t seed() const { return seed_; }
  const RowMajorMatrix& matrices() const { return matrices_; }
  std::span<const MaskEntry> entries() const { return entries_; }

  double normalization() const;
  /// Mean of E[<A_i, D>^2] / ||D||_F^2 per measurement: 1 for Gaussian, 1/n^2 for masks.
  double measurement_energy() const;

  Eigen::VectorXd apply(const Eigen::MatrixXd& z) const;
  Eigen::VectorXd apply(const SymMatrix& z) const;
  /// A(U U^T) without forming U U^T for masks.
  Eigen::VectorXd apply_gram(const Eigen::MatrixXd& u) const;

  /// sum_i v_i A_i, unsymmetrized.
  Eigen::MatrixXd adjoint_raw(const Eigen::VectorXd& v) const;
  /// Symmetric part of sum_i v_i A_i.
  SymMatrix adjoint(const Eigen::VectorXd& v) const;

  /// Sub-operator keeping only the listed measurement indices, in order.
  SensingOperator subset(std::span<const int> indices) const;

  void save(const std::filesystem::path& path) const;
  static SensingOperator load(const std::filesystem::path& path);

 private:
  OperatorKind kind_ = OperatorKind::DenseGaussian;
  int n_ = 0;
  int m_ = 0;
  std::uint64_t seed_ = 0;
  RowMajorMatrix matrices_;
  std::vector<MaskEntry> entries_;
};

SensingOperator build_gaussian_operator(int n, int m, const RngSpec& rng);
SensingOperator build_completion_operator(int n, int m, const RngSpec& rng);

struct RipEstimate {
  int k = 0;
  int trials = 0;
  double delta_hat = 0.0;
  std::vector<double> ratios;  // c ||A(X)||^2 / ||X||_F^2 per trial

  double median_deviation() const;
};

/// Monte-Carlo lower bound on the (k, delta) RIP constant from random
/// rank-k unit-Frobenius PSD matrices. Not a certificate.
RipEstimate estimate_rip(const SensingOperator& op, int k, int trials, const RngSpec& rng);

struct PerturbationBounds {
  double spec_x = 0.0;  // ||(I - c A*A)(X)||_2
  double fro_x = 0.0;   // ||X||_F
  double spec_z = 0.0;  // ||(I - c A*A)(Z)||_2
  double nuc_z = 0.0;   // ||Z||_*
};

/// Both sides of the spectral-to-Frobenius and spectral-to-nuclear
/// perturbation bounds, for empirical inspection.
PerturbationBounds check_perturbation_bounds(const SensingOperator& op, const Eigen::MatrixXd& x,
                                             const Eigen::MatrixXd& z, int k);

}  // namespace lrsense
