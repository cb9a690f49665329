#include "lrsense/validation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lrsense {

MeasurementSplit split_measurements(const SensingOperator& op, const Eigen::VectorXd& y, int m_val,
                                    const RngSpec& rng) {
  const int m = op.m();
  if (y.size() != m) throw Error(ErrorCode::DimensionMismatch, "measurement vector length differs from m");
  if (m_val < 1 || m_val >= m) {
    throw Error(ErrorCode::InvalidSplitSize,
                "need 1 <= m_val < m (m_val = " + std::to_string(m_val) + ", m = " + std::to_string(m) + ")");
  }
  std::vector<int> perm(m);
  std::iota(perm.begin(), perm.end(), 0);
  auto gen = rng.engine();
  for (int i = m - 1; i > 0; --i) {
    std::uniform_int_distribution<int> pick(0, i);
    std::swap(perm[i], perm[pick(gen)]);
  }

  SplitSpec spec;
  spec.m_val = m_val;
  spec.m_train = m - m_val;
  spec.rng = rng;
  spec.val_indices.assign(perm.begin(), perm.begin() + m_val);
  spec.train_indices.assign(perm.begin() + m_val, perm.end());
  std::sort(spec.val_indices.begin(), spec.val_indices.end());
  std::sort(spec.train_indices.begin(), spec.train_indices.end());

  MeasurementSplit out{op.subset(spec.train_indices), gather(y, spec.train_indices),
                       op.subset(spec.val_indices), gather(y, spec.val_indices), std::move(spec)};
  return out;
}

Eigen::VectorXd gather(const Eigen::VectorXd& v, std::span<const int> indices) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(indices.size()));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= v.size()) throw Error(ErrorCode::DimensionMismatch, "index out of range");
    out(static_cast<Eigen::Index>(i)) = v(indices[i]);
  }
  return out;
}

double validation_loss(const SensingOperator& val_op, const Eigen::VectorXd& y_val, const Factor& u) {
  if (y_val.size() != val_op.m()) throw Error(ErrorCode::DimensionMismatch, "y_val length differs from m_val");
  if (u.n() != val_op.n()) throw Error(ErrorCode::DimensionMismatch, "factor row count differs from n");
  return 0.5 * (val_op.apply_gram(u.mat()) - y_val).squaredNorm();
}

IterateHook validation_hook(const SensingOperator& val_op, const Eigen::VectorXd& y_val) {
  return [&val_op, &y_val](const Factor& u, IterateRecord& rec) { rec.val_loss = validation_loss(val_op, y_val, u); };
}

SelectionResult select_iterate(const Trajectory& trajectory) {
  if (trajectory.records.empty()) throw Error(ErrorCode::EmptyTrajectory, "no recorded iterates");
  SelectionResult out;
  out.val_curve.reserve(trajectory.records.size());
  const IterateRecord* best_val = nullptr;
  const IterateRecord* best_err = nullptr;
  bool all_errors = true;
  for (const auto& rec : trajectory.records) {
    if (!rec.val_loss) {
      throw Error(ErrorCode::InvalidConfig, "record at t = " + std::to_string(rec.t) + " has no validation loss");
    }
    out.val_curve.emplace_back(rec.t, *rec.val_loss);
    if (!best_val || *rec.val_loss < *best_val->val_loss) best_val = &rec;
    if (!rec.recovery_error) {
      all_errors = false;
    } else if (!best_err || *rec.recovery_error < *best_err->recovery_error) {
      best_err = &rec;
    }
  }
  out.t_hat = best_val->t;
  if (all_errors) {
    out.t_tilde = best_err->t;
    out.error_at_t_hat = best_val->recovery_error;
    out.error_at_t_tilde = best_err->recovery_error;
    out.gap = *out.error_at_t_hat - *out.error_at_t_tilde;
  }
  return out;
}

std::vector<double> check_val_concentration(const SensingOperator& val_op, const Eigen::VectorXd& e_val,
                                            std::span<const Eigen::MatrixXd> d, double sigma) {
  if (e_val.size() != val_op.m()) throw Error(ErrorCode::DimensionMismatch, "noise length differs from m_val");
  const double m_val = val_op.m();
  const double q = val_op.measurement_energy();
  const double sigma2 = sigma * sigma;
  std::vector<double> out;
  out.reserve(d.size());
  for (const auto& dt : d) {
    const double observed = (val_op.apply(dt) - e_val).squaredNorm();
    const double expected = m_val * (q * dt.squaredNorm() + sigma2);
    out.push_back(expected > 0.0 ? std::abs(observed - expected) / expected : (observed > 0.0 ? INFINITY : 0.0));
  }
  return out;
}

SelectionBound check_selection_bound(double error_at_t_hat, double error_at_t_tilde, double delta_val,
                                     double sigma2, double rel_slack) {
  SelectionBound b;
  b.delta_val = delta_val;
  b.lhs = error_at_t_hat;
  if (!(delta_val < 1.0)) {
    b.vacuous = true;
    b.rhs = INFINITY;
    b.holds = true;
    return b;
  }
  b.rhs = (1.0 + delta_val) / (1.0 - delta_val) * error_at_t_tilde + 2.0 * delta_val / (1.0 - delta_val) * sigma2;
  b.holds = b.lhs <= b.rhs * (1.0 + rel_slack) + rel_slack * sigma2;
  return b;
}

double theoretical_delta_val(double kappa, int n, int r_star, int m_train) {
  return kappa * kappa * n * r_star / static_cast<double>(m_train);
}

}  // namespace lrsense
