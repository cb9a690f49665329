#pragma once

#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "lrsense/core.hpp"
#include "lrsense/diagnostics.hpp"
#include "lrsense/operators.hpp"

namespace lrsense {

struct GdConfig {
  int r = 1;              // columns of U (over-specified rank)
  double eta = 0.5;       // step size
  double alpha = 1e-6;    // initialization scale
  int iterations = 500;   // T
  RngSpec init_rng{0, "init"};
  int record_every = 1;
  /// Extra iterations whose factor is kept in Trajectory::checkpoints.
  std::vector<int> checkpoint_at;

  /// Throws InvalidConfig unless eta > 0, alpha > 0, T >= 1, 1 <= r <= n, record_every >= 1.
  void validate(int n) const;
};

struct IterateRecord {
  int t = 0;
  double train_loss = 0.0;
  std::optional<double> val_loss;
  std::optional<double> recovery_error;
  std::optional<PhaseQuantities> phase;
};

/// Called at every recorded iterate. Hooks fill optional record fields and
/// must not retain or modify the factor.
using IterateHook = std::function<void(const Factor& u, IterateRecord& record)>;

struct Trajectory {
  GdConfig config;
  double initial_train_loss = 0.0;
  std::vector<IterateRecord> records;  // strictly increasing t, t >= 1
  /// Always holds the final iterate, the running val-loss argmin when a
  /// validation hook ran, and any GdConfig::checkpoint_at iterations.
  std::map<int, Factor> checkpoints;
  std::optional<int> best_val_t;

  const Factor& final_factor() const { return checkpoints.at(config.iterations); }
};

/// U_0 = alpha * G with G_ij ~ N(0, 1/sqrt(r)) i.i.d.
Factor init_factor(int n, const GdConfig& config);

/// f(U) = (c / 2) ||A(U U^T) - y||^2 with c = op.normalization() (1/m for Gaussian ensembles).
double train_loss(const SensingOperator& op, const Eigen::VectorXd& y, const Factor& u);

/// c * sym(A*(A(U U^T) - y)) * U.
///
/// This is the update direction as written for the factored iteration; the
/// calculus gradient of train_loss is exactly twice this value, so a step
/// size eta here equals a step of eta / 2 on the true gradient.
Eigen::MatrixXd gradient(const SensingOperator& op, const Eigen::VectorXd& y, const Factor& u);

inline constexpr double kDivergenceFactor = 1e6;

/// Runs all T iterations of U <- U - eta * gradient(U). Throws Divergence if
/// the training loss exceeds kDivergenceFactor times its initial value and
/// NonFiniteValue if any entry of U becomes NaN or infinite.
Trajectory run_gd(const SensingOperator& op, const Eigen::VectorXd& y, const GdConfig& config,
                  std::span<const IterateHook> hooks = {});

/// Hook that fills IterateRecord::recovery_error (and phase quantities when
/// with_phase is set). The ground truth must outlive the hook.
IterateHook ground_truth_hook(const GroundTruth& gt, bool with_phase);

/// Columns: t,train_loss,val_loss,recovery_error,sigma_min_signal,err_norm,alignment.
/// Missing values are written as empty fields.
void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory);

}  // namespace lrsense
