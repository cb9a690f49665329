#pragma once

#include <Eigen/Dense>

#include "lrsense/core.hpp"

namespace lrsense {

// Trajectory instrumentation: split U_t into a component aligned with the
// ground truth's column space (signal) and its complement (error).

struct SignalErrorSplit {
  Eigen::MatrixXd signal;  // U W W^T
  Eigen::MatrixXd error;   // U W_perp W_perp^T
  Eigen::MatrixXd w;       // r x r*, orthonormal columns
  Eigen::MatrixXd w_perp;  // r x (r - r*), orthonormal columns
  /// V_X^T U has fewer than r* singular values above the rank cutoff, so W
  /// is the solver's top-r* block rather than a uniquely defined basis.
  bool rank_deficient = false;
};

struct PhaseQuantities {
  double sigma_min_signal = 0.0;  // sigma_{r*}(U W)
  double err_norm = 0.0;          // ||U W_perp||_2
  double alignment = 0.0;         // ||V_{X perp}^T V_{U W}||_2
  double fro_error = 0.0;         // ||U U^T - X||_F
  bool degenerate = false;
};

/// Throws InvalidDimension when r < r*, DimensionMismatch when n differs.
SignalErrorSplit signal_error_decompose(const Factor& u, const GroundTruth& gt);

PhaseQuantities phase_quantities(const Factor& u, const GroundTruth& gt);

/// ||U U^T - X||_F^2.
double recovery_error(const Factor& u, const GroundTruth& gt);

}  // namespace lrsense
