#include "lrsense/diagnostics.hpp"

#include <algorithm>

namespace lrsense {

namespace {

void check_dims(const Factor& u, const GroundTruth& gt) {
  if (u.n() != gt.n()) throw Error(ErrorCode::DimensionMismatch, "factor and ground truth differ in n");
}

}  // namespace

SignalErrorSplit signal_error_decompose(const Factor& u, const GroundTruth& gt) {
  check_dims(u, gt);
  const int r = u.r();
  const int rs = gt.true_rank;
  if (r < rs) {
    throw Error(ErrorCode::InvalidDimension,
                "signal/error split needs r >= r* (r = " + std::to_string(r) + ", r* = " + std::to_string(rs) + ")");
  }
  // V_X^T U = V Sigma W^T; the full right basis gives W and its complement.
  const Eigen::MatrixXd projected = gt.col_basis.transpose() * u.mat();  // r* x r
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(projected, Eigen::ComputeFullV);
  const Eigen::MatrixXd& v_full = svd.matrixV();  // r x r

  SignalErrorSplit out;
  out.w = v_full.leftCols(rs);
  out.w_perp = v_full.rightCols(r - rs);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double scale = std::max(sv.size() > 0 ? sv(0) : 0.0, 1e-300);
  out.rank_deficient = sv.size() < rs || sv(rs - 1) <= kRankCutoff * scale;
  out.signal = u.mat() * out.w * out.w.transpose();
  out.error = u.mat() * out.w_perp * out.w_perp.transpose();
  return out;
}

PhaseQuantities phase_quantities(const Factor& u, const GroundTruth& gt) {
  const SignalErrorSplit split = signal_error_decompose(u, gt);
  const int rs = gt.true_rank;

  PhaseQuantities q;
  q.degenerate = split.rank_deficient;
  const Eigen::MatrixXd uw = u.mat() * split.w;  // n x r*
  Eigen::JacobiSVD<Eigen::MatrixXd> svd_uw(uw, Eigen::ComputeThinU);
  q.sigma_min_signal = svd_uw.singularValues()(rs - 1);
  q.err_norm = split.w_perp.cols() == 0 ? 0.0 : spectral_norm(u.mat() * split.w_perp);
  if (gt.perp_basis.cols() > 0) {
    const Eigen::MatrixXd v_uw = svd_uw.matrixU().leftCols(rs);
    q.alignment = std::min(1.0, spectral_norm(gt.perp_basis.transpose() * v_uw));
  }
  q.fro_error = (u.gram().mat() - gt.x_nat.mat()).norm();
  return q;
}

double recovery_error(const Factor& u, const GroundTruth& gt) {
  check_dims(u, gt);
  return (u.gram().mat() - gt.x_nat.mat()).squaredNorm();
}

}  // namespace lrsense
