#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lrsense/core.hpp"
#include "lrsense/operators.hpp"
#include "lrsense/recovery.hpp"

namespace lrsense {

struct SplitSpec {
  int m_train = 0;
  int m_val = 0;
  RngSpec rng;
  std::vector<int> train_indices;  // ascending
  std::vector<int> val_indices;    // ascending
};

struct MeasurementSplit {
  SensingOperator train_op;
  Eigen::VectorXd y_train;
  SensingOperator val_op;
  Eigen::VectorXd y_val;
  SplitSpec spec;
};

/// Uniformly random hold-out partition. Requires 1 <= m_val < m.
MeasurementSplit split_measurements(const SensingOperator& op, const Eigen::VectorXd& y, int m_val,
                                    const RngSpec& rng);

/// Picks the entries of a full-length vector (e.g. the noise draw) that landed
/// in one side of a split.
Eigen::VectorXd gather(const Eigen::VectorXd& v, std::span<const int> indices);

/// 1/2 ||A_val(U U^T) - y_val||^2, unnormalized.
double validation_loss(const SensingOperator& val_op, const Eigen::VectorXd& y_val, const Factor& u);

/// Hook filling IterateRecord::val_loss. Both arguments must outlive the hook.
IterateHook validation_hook(const SensingOperator& val_op, const Eigen::VectorXd& y_val);

struct SelectionResult {
  int t_hat = 0;
  std::optional<int> t_tilde;
  std::vector<std::pair<int, double>> val_curve;
  std::optional<double> error_at_t_hat;
  std::optional<double> error_at_t_tilde;
  std::optional<double> gap;  // error_at_t_hat - error_at_t_tilde
};

/// Earliest argmin of the validation loss over recorded iterates, plus the
/// oracle argmin of recovery error when every record carries one. Throws
/// EmptyTrajectory for no records and InvalidConfig if a val loss is missing.
SelectionResult select_iterate(const Trajectory& trajectory);

/// Relative deviation |‖r_t‖² − m_val (q ‖D_t‖_F² + σ²)| / (m_val (q ‖D_t‖_F² + σ²))
/// with r_t = A_val(D_t) − e_val and q = val_op.measurement_energy() (1 for
/// Gaussian ensembles). With D_t = U_t U_t^T − X this r_t is exactly the
/// validation residual A_val(U_t U_t^T) − y_val.
std::vector<double> check_val_concentration(const SensingOperator& val_op, const Eigen::VectorXd& e_val,
                                            std::span<const Eigen::MatrixXd> d, double sigma);

struct SelectionBound {
  double delta_val = 0.0;
  double lhs = 0.0;  // ||D_{t_hat}||_F^2
  double rhs = 0.0;  // (1+d)/(1-d) ||D_{t_tilde}||_F^2 + 2d/(1-d) sigma^2
  bool vacuous = false;  // delta_val >= 1: the bound says nothing
  bool holds = false;
};

/// Evaluates the hold-out selection guarantee for a measured delta_val.
/// rel_slack absorbs floating-point rounding in the comparison.
SelectionBound check_selection_bound(double error_at_t_hat, double error_at_t_tilde, double delta_val,
                                     double sigma2, double rel_slack = 1e-9);

/// kappa^2 n r* / m_train: the delta_val the analysis prescribes.
double theoretical_delta_val(double kappa, int n, int r_star, int m_train);

}  // namespace lrsense
