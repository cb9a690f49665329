#include "lrsense/recovery.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>

namespace lrsense {

void GdConfig::validate(int n) const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidConfig, why); };
  if (!(eta > 0.0) || !std::isfinite(eta)) fail("eta must be positive");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) fail("alpha must be positive");
  if (iterations < 1) fail("iteration budget T must be >= 1");
  if (r < 1 || r > n) fail("factor rank r must satisfy 1 <= r <= n");
  if (record_every < 1) fail("record_every must be >= 1");
}

Factor init_factor(int n, const GdConfig& config) {
  config.validate(n);
  auto gen = config.init_rng.engine();
  // Variance 1/sqrt(r) means standard deviation r^{-1/4}.
  const double scale = config.alpha * std::pow(static_cast<double>(config.r), -0.25);
  return Factor(scale * standard_normal(n, config.r, gen));
}

namespace {

void check_measurements(const SensingOperator& op, const Eigen::VectorXd& y, const Factor& u) {
  if (y.size() != op.m()) throw Error(ErrorCode::DimensionMismatch, "measurement vector length differs from m");
  if (u.n() != op.n()) throw Error(ErrorCode::DimensionMismatch, "factor row count differs from n");
}

}  // namespace

double train_loss(const SensingOperator& op, const Eigen::VectorXd& y, const Factor& u) {
  check_measurements(op, y, u);
  return 0.5 * op.normalization() * (op.apply_gram(u.mat()) - y).squaredNorm();
}

Eigen::MatrixXd gradient(const SensingOperator& op, const Eigen::VectorXd& y, const Factor& u) {
  check_measurements(op, y, u);
  const Eigen::VectorXd residual = op.apply_gram(u.mat()) - y;
  return op.normalization() * (op.adjoint(residual).mat() * u.mat());
}

Trajectory run_gd(const SensingOperator& op, const Eigen::VectorXd& y, const GdConfig& config,
                  std::span<const IterateHook> hooks) {
  config.validate(op.n());
  if (y.size() != op.m()) throw Error(ErrorCode::DimensionMismatch, "measurement vector length differs from m");

  Trajectory traj;
  traj.config = config;
  Factor u = init_factor(op.n(), config);
  const double c = op.normalization();

  Eigen::VectorXd residual = op.apply_gram(u.mat()) - y;
  traj.initial_train_loss = 0.5 * c * residual.squaredNorm();
  const double loss_ceiling = kDivergenceFactor * std::max(traj.initial_train_loss, 1e-300);

  std::optional<double> best_val;
  for (int t = 1; t <= config.iterations; ++t) {
    const Eigen::MatrixXd step = c * (op.adjoint(residual).mat() * u.mat());
    u.mat() -= config.eta * step;
    if (!u.mat().allFinite()) {
      throw Error(ErrorCode::NonFiniteValue, "non-finite factor entry at iteration " + std::to_string(t));
    }
    residual = op.apply_gram(u.mat()) - y;
    const double loss = 0.5 * c * residual.squaredNorm();
    if (!std::isfinite(loss) || loss > loss_ceiling) {
      throw Error(ErrorCode::Divergence, "training loss " + std::to_string(loss) + " at iteration " +
                                             std::to_string(t) + " exceeds the divergence threshold");
    }

    const bool record = t % config.record_every == 0 || t == config.iterations;
    if (record) {
      IterateRecord rec;
      rec.t = t;
      rec.train_loss = loss;
      for (const auto& hook : hooks) hook(u, rec);
      // Strict improvement keeps the earliest argmin.
      if (rec.val_loss && (!best_val || *rec.val_loss < *best_val)) {
        if (traj.best_val_t) {
          const bool requested = std::find(config.checkpoint_at.begin(), config.checkpoint_at.end(),
                                           *traj.best_val_t) != config.checkpoint_at.end();
          if (!requested) traj.checkpoints.erase(*traj.best_val_t);
        }
        best_val = rec.val_loss;
        traj.best_val_t = t;
        traj.checkpoints.insert_or_assign(t, u);
      }
      traj.records.push_back(std::move(rec));
    }
    if (t == config.iterations ||
        std::find(config.checkpoint_at.begin(), config.checkpoint_at.end(), t) != config.checkpoint_at.end()) {
      traj.checkpoints.insert_or_assign(t, u);
    }
  }
  return traj;
}

IterateHook ground_truth_hook(const GroundTruth& gt, bool with_phase) {
  return [&gt, with_phase](const Factor& u, IterateRecord& rec) {
    rec.recovery_error = recovery_error(u, gt);
    if (with_phase) rec.phase = phase_quantities(u, gt);
  };
}

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory) {
  out << "t,train_loss,val_loss,recovery_error,sigma_min_signal,err_norm,alignment\n";
  out << std::setprecision(17);
  auto opt = [&out](const std::optional<double>& v) {
    out << ',';
    if (v) out << *v;
  };
  for (const auto& rec : trajectory.records) {
    out << rec.t << ',' << rec.train_loss;
    opt(rec.val_loss);
    opt(rec.recovery_error);
    if (rec.phase) {
      out << ',' << rec.phase->sigma_min_signal << ',' << rec.phase->err_norm << ',' << rec.phase->alignment;
    } else {
      out << ",,,";
    }
    out << '\n';
  }
}

}  // namespace lrsense
