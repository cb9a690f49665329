#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <utility>

#include <gtest/gtest.h>

#include "lrsense/operators.hpp"
#include "support/oracles.hpp"

using namespace lrsense;

namespace {

SensingOperator random_operator(oracle::Gen& gen, int n) {
  if (gen.uniform_int(0, 1) == 0) return build_gaussian_operator(n, gen.uniform_int(1, 40), RngSpec{gen.next_seed(), "op"});
  return build_completion_operator(n, gen.uniform_int(1, n * n), RngSpec{gen.next_seed(), "op"});
}

}  // namespace

TEST(GaussianOperator, FullScaleStorage) {
  const SensingOperator op = build_gaussian_operator(50, 1000, RngSpec{1, "op"});
  EXPECT_EQ(op.kind(), OperatorKind::DenseGaussian);
  EXPECT_EQ(op.m(), 1000);
  EXPECT_EQ(op.matrices().rows(), 1000);
  EXPECT_EQ(op.matrices().cols(), 2500);
}

TEST(GaussianOperator, ScalarCase) {
  const SensingOperator op = build_gaussian_operator(1, 1, RngSpec{2, "op"});
  EXPECT_EQ(op.matrices().size(), 1);
  Eigen::MatrixXd z(1, 1);
  z(0, 0) = 3.0;
  EXPECT_DOUBLE_EQ(op.apply(z)(0), 3.0 * op.matrices()(0, 0));
}

TEST(GaussianOperator, EntriesHaveZeroMean) {
  const SensingOperator op = build_gaussian_operator(10, 200, RngSpec{3, "op"});
  EXPECT_NEAR(op.matrices().mean(), 0.0, 0.02);
}

TEST(CompletionOperator, FullScaleDistinctPairs) {
  const SensingOperator op = build_completion_operator(50, 1000, RngSpec{1, "op"});
  std::set<std::pair<int, int>> seen;
  for (const auto& e : op.entries()) seen.insert({e.row, e.col});
  EXPECT_EQ(seen.size(), 1000u);
}

TEST(CompletionOperator, FullObservation) {
  const SensingOperator op = build_completion_operator(2, 4, RngSpec{4, "op"});
  std::set<std::pair<int, int>> seen;
  for (const auto& e : op.entries()) seen.insert({e.row, e.col});
  EXPECT_EQ(seen.size(), 4u);
}

TEST(CompletionOperator, NoDuplicatesAcrossReseeds) {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const SensingOperator op = build_completion_operator(5, 10, RngSpec{seed, "op"});
    std::set<std::pair<int, int>> seen;
    for (const auto& e : op.entries()) {
      ASSERT_TRUE(e.row >= 0 && e.row < 5 && e.col >= 0 && e.col < 5);
      seen.insert({e.row, e.col});
    }
    ASSERT_EQ(seen.size(), 10u) << "seed " << seed;
  }
}

TEST(CompletionOperator, TooManySamples) {
  try {
    build_completion_operator(3, 10, RngSpec{});
    FAIL() << "expected TooManySamples";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooManySamples);
  }
}

TEST(CompletionOperator, RejectsDuplicateEntries) {
  EXPECT_THROW(SensingOperator::mask(3, {{0, 1}, {0, 1}}), Error);
}

TEST(Apply, MaskExtractsCoordinates) {
  const SensingOperator op = SensingOperator::mask(3, {{0, 0}, {2, 2}});
  const Eigen::VectorXd y = op.apply(SymMatrix::diagonal(Eigen::Vector3d(1, 2, 3)));
  ASSERT_EQ(y.size(), 2);
  EXPECT_EQ(y(0), 1.0);
  EXPECT_EQ(y(1), 3.0);
}

TEST(Apply, IdentitySensingMatrixGivesTrace) {
  const int n = 4;
  RowMajorMatrix a = RowMajorMatrix::Zero(1, n * n);
  for (int i = 0; i < n; ++i) a(0, i * n + i) = 1.0;
  const SensingOperator op = SensingOperator::dense(n, a);
  oracle::Gen gen(20);
  const Eigen::MatrixXd z = gen.symmetric(n);
  EXPECT_NEAR(op.apply(z)(0), z.trace(), 1e-14);
}

TEST(Apply, MatchesNaiveLoopOracle) {
  oracle::Gen gen(21);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = gen.uniform_int(1, 8);
    const SensingOperator op = random_operator(gen, n);
    const Eigen::MatrixXd z = gen.gaussian(n, n);
    const Eigen::VectorXd expect = oracle::naive_apply(op, z);
    EXPECT_LE((op.apply(z) - expect).norm(), 1e-12 * std::max(1.0, expect.norm()));
    const Eigen::MatrixXd zs = 0.5 * (z + z.transpose());
    const Eigen::VectorXd expect_s = oracle::naive_apply(op, zs);
    EXPECT_LE((op.apply(SymMatrix::symmetrize(z)) - expect_s).norm(), 1e-12 * std::max(1.0, expect_s.norm()));
  }
}

TEST(Apply, GramMatchesExplicitProduct) {
  oracle::Gen gen(22);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = gen.uniform_int(1, 8);
    const SensingOperator op = random_operator(gen, n);
    const Eigen::MatrixXd u = gen.gaussian(n, gen.uniform_int(1, n));
    const Eigen::VectorXd expect = oracle::naive_apply(op, oracle::naive_gram(u));
    EXPECT_LE((op.apply_gram(u) - expect).norm(), 1e-12 * std::max(1.0, expect.norm()));
  }
}

TEST(Adjoint, MaskUnitVectorSplitsSymmetrically) {
  const SensingOperator op = SensingOperator::mask(3, {{0, 0}, {0, 2}, {1, 1}});
  Eigen::VectorXd v = Eigen::VectorXd::Zero(3);
  v(1) = 1.0;
  const Eigen::MatrixXd a = op.adjoint(v).mat();
  Eigen::MatrixXd expect = Eigen::MatrixXd::Zero(3, 3);
  expect(0, 2) = 0.5;
  expect(2, 0) = 0.5;
  EXPECT_EQ(a, expect);
}

TEST(Adjoint, ZeroVectorGivesZeroMatrix) {
  oracle::Gen gen(23);
  for (int trial = 0; trial < 10; ++trial) {
    const SensingOperator op = random_operator(gen, gen.uniform_int(1, 6));
    EXPECT_EQ(op.adjoint(Eigen::VectorXd::Zero(op.m())).mat().cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(Adjoint, RawMatchesNaiveOracle) {
  oracle::Gen gen(24);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = gen.uniform_int(1, 7);
    const SensingOperator op = random_operator(gen, n);
    const Eigen::VectorXd v = gen.gaussian_vec(op.m());
    EXPECT_LE((op.adjoint_raw(v) - oracle::naive_adjoint_raw(op, v)).norm(), 1e-12 * std::max(1.0, v.norm()));
  }
}

TEST(Adjoint, LengthMismatchThrows) {
  const SensingOperator op = build_gaussian_operator(3, 5, RngSpec{});
  EXPECT_THROW(op.adjoint(Eigen::VectorXd::Zero(4)), Error);
}

TEST(Properties, AdjointIdentity) {
  oracle::Gen gen(25);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = gen.uniform_int(1, 8);
    const SensingOperator op = random_operator(gen, n);
    const Eigen::VectorXd v = gen.gaussian_vec(op.m());
    const Eigen::MatrixXd z = gen.gaussian(n, n);
    const double lhs = op.apply(z).dot(v);
    const double rhs = oracle::frobenius_inner(z, op.adjoint_raw(v));
    ASSERT_LE(std::abs(lhs - rhs), 1e-10 * z.norm() * v.norm());
    const Eigen::MatrixXd zs = 0.5 * (z + z.transpose());
    const double lhs_s = op.apply(SymMatrix::symmetrize(zs)).dot(v);
    const double rhs_s = oracle::frobenius_inner(zs, op.adjoint(v).mat());
    ASSERT_LE(std::abs(lhs_s - rhs_s), 1e-10 * zs.norm() * v.norm());
  }
}

TEST(Properties, Linearity) {
  oracle::Gen gen(26);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = gen.uniform_int(1, 8);
    const SensingOperator op = random_operator(gen, n);
    const Eigen::MatrixXd z1 = gen.gaussian(n, n), z2 = gen.gaussian(n, n);
    const double a = gen.uniform(-3, 3), b = gen.uniform(-3, 3);
    const Eigen::VectorXd lhs = op.apply(Eigen::MatrixXd(a * z1 + b * z2));
    const Eigen::VectorXd rhs = a * op.apply(z1) + b * op.apply(z2);
    ASSERT_LE((lhs - rhs).norm(), 1e-12 * std::max(1.0, rhs.norm()));
  }
}

TEST(Properties, MaskIsometryOnObservedEntries) {
  oracle::Gen gen(27);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = gen.uniform_int(1, 9);
    const SensingOperator op = build_completion_operator(n, gen.uniform_int(1, n * n), RngSpec{gen.next_seed(), "op"});
    const Eigen::MatrixXd z = gen.gaussian(n, n);
    const Eigen::VectorXd y = op.apply(z);
    double expect = 0.0;
    for (int i = 0; i < op.m(); ++i) {
      const auto e = op.entries()[static_cast<std::size_t>(i)];
      ASSERT_EQ(y(i), z(e.row, e.col));
      expect += z(e.row, e.col) * z(e.row, e.col);
    }
    // Same terms; only the summation order can differ.
    ASSERT_NEAR(y.squaredNorm(), expect, 1e-14 * expect);
  }
}

TEST(Normalization, GaussianAndMask) {
  EXPECT_DOUBLE_EQ(build_gaussian_operator(4, 20, RngSpec{}).normalization(), 1.0 / 20);
  EXPECT_DOUBLE_EQ(build_completion_operator(4, 8, RngSpec{}).normalization(), 16.0 / 8);
  EXPECT_DOUBLE_EQ(build_completion_operator(4, 8, RngSpec{}).measurement_energy(), 1.0 / 16);
}

TEST(Rip, GaussianFullScaleIsInformative) {
  const SensingOperator op = build_gaussian_operator(50, 1000, RngSpec{5, "op"});
  const RipEstimate est = estimate_rip(op, 2, 500, RngSpec{5, "rip"});
  EXPECT_EQ(static_cast<int>(est.ratios.size()), 500);
  EXPECT_LT(est.delta_hat, 1.0);
  EXPECT_GE(est.delta_hat, 0.0);
  double max_dev = 0.0;
  for (double r : est.ratios) max_dev = std::max(max_dev, std::abs(r - 1.0));
  EXPECT_DOUBLE_EQ(est.delta_hat, max_dev);
}

TEST(Rip, FullObservationMaskIsIsometry) {
  const int n = 6;
  const SensingOperator op = build_completion_operator(n, n * n, RngSpec{6, "op"});
  const RipEstimate est = estimate_rip(op, n, 50, RngSpec{6, "rip"});
  EXPECT_LT(est.delta_hat, 1e-12);
}

TEST(Rip, MoreMeasurementsConcentrate) {
  const SensingOperator small = build_gaussian_operator(20, 200, RngSpec{7, "op"});
  const SensingOperator large = build_gaussian_operator(20, 800, RngSpec{8, "op"});
  const RipEstimate a = estimate_rip(small, 2, 200, RngSpec{7, "rip"});
  const RipEstimate b = estimate_rip(large, 2, 200, RngSpec{7, "rip"});
  EXPECT_LT(b.median_deviation(), a.median_deviation());
}

TEST(Rip, NonDecreasingInTrials) {
  const SensingOperator op = build_gaussian_operator(10, 60, RngSpec{9, "op"});
  double prev = 0.0;
  for (int trials : {1, 2, 5, 10, 40, 100}) {
    const RipEstimate est = estimate_rip(op, 3, trials, RngSpec{9, "rip"});
    EXPECT_GE(est.delta_hat, prev);
    prev = est.delta_hat;
  }
}

TEST(Rip, RejectsBadRank) {
  const SensingOperator op = build_gaussian_operator(4, 10, RngSpec{});
  EXPECT_THROW(estimate_rip(op, 0, 5, RngSpec{}), Error);
  EXPECT_THROW(estimate_rip(op, 5, 5, RngSpec{}), Error);
}

TEST(Perturbation, ZeroInputs) {
  const SensingOperator op = build_gaussian_operator(5, 30, RngSpec{10, "op"});
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(5, 5);
  const PerturbationBounds b = check_perturbation_bounds(op, zero, zero, 1);
  EXPECT_EQ(b.spec_x, 0.0);
  EXPECT_EQ(b.spec_z, 0.0);
}

TEST(Perturbation, RankTwoSpectralWellBelowFrobenius) {
  const SensingOperator op = build_gaussian_operator(30, 2000, RngSpec{11, "op"});
  oracle::Gen gen(28);
  const Eigen::MatrixXd u = gen.gaussian(30, 2);
  const Eigen::MatrixXd x = u * u.transpose();
  const PerturbationBounds b = check_perturbation_bounds(op, x, gen.gaussian(30, 30), 2);
  EXPECT_LT(b.spec_x / b.fro_x, 0.5);
}

TEST(Perturbation, RankOneSameMatrixAgrees) {
  const SensingOperator op = build_gaussian_operator(8, 100, RngSpec{12, "op"});
  oracle::Gen gen(29);
  const Eigen::VectorXd w = gen.gaussian_vec(8);
  const Eigen::MatrixXd x = w * w.transpose();
  const PerturbationBounds b = check_perturbation_bounds(op, x, x, 1);
  EXPECT_EQ(b.spec_x, b.spec_z);
  EXPECT_NEAR(b.fro_x, b.nuc_z, 1e-12 * b.fro_x);
}

TEST(Perturbation, MatchesDirectEvaluation) {
  const SensingOperator op = build_gaussian_operator(6, 50, RngSpec{13, "op"});
  oracle::Gen gen(30);
  const Eigen::MatrixXd u = gen.gaussian(6, 2);
  const Eigen::MatrixXd x = u * u.transpose();
  const Eigen::MatrixXd z = gen.gaussian(6, 6);
  const PerturbationBounds b = check_perturbation_bounds(op, x, z, 2);
  const Eigen::MatrixXd px = x - oracle::naive_adjoint_raw(op, oracle::naive_apply(op, x)) / 50.0;
  const Eigen::MatrixXd pz = z - oracle::naive_adjoint_raw(op, oracle::naive_apply(op, z)) / 50.0;
  EXPECT_NEAR(b.spec_x, Eigen::JacobiSVD<Eigen::MatrixXd>(px).singularValues()(0), 1e-10);
  EXPECT_NEAR(b.spec_z, Eigen::JacobiSVD<Eigen::MatrixXd>(pz).singularValues()(0), 1e-10);
  EXPECT_NEAR(b.nuc_z, Eigen::JacobiSVD<Eigen::MatrixXd>(z).singularValues().sum(), 1e-10);
}

TEST(Perturbation, RejectsRankAboveK) {
  const SensingOperator op = build_gaussian_operator(5, 30, RngSpec{14, "op"});
  oracle::Gen gen(31);
  const Eigen::MatrixXd u = gen.gaussian(5, 3);
  EXPECT_THROW(check_perturbation_bounds(op, u * u.transpose(), u * u.transpose(), 2), Error);
}

TEST(Serialization, RoundTripBothKinds) {
  const auto dir = std::filesystem::temp_directory_path() / "lrsense_op_roundtrip";
  std::filesystem::create_directories(dir);
  for (const SensingOperator& op :
       {build_gaussian_operator(4, 9, RngSpec{15, "op"}), build_completion_operator(4, 9, RngSpec{16, "op"})}) {
    const auto path = dir / "op.bin";
    op.save(path);
    const SensingOperator back = SensingOperator::load(path);
    EXPECT_EQ(back.kind(), op.kind());
    EXPECT_EQ(back.n(), op.n());
    EXPECT_EQ(back.m(), op.m());
    EXPECT_EQ(back.seed(), op.seed());
    EXPECT_TRUE(back.matrices() == op.matrices());
    EXPECT_TRUE(std::equal(back.entries().begin(), back.entries().end(), op.entries().begin(), op.entries().end()));
  }
  std::filesystem::remove_all(dir);
}

TEST(Serialization, RejectsForeignFile) {
  const auto path = std::filesystem::temp_directory_path() / "lrsense_not_an_op.bin";
  {
    std::ofstream out(path, std::ios::binary);
    out << "definitely not an operator";
  }
  try {
    SensingOperator::load(path);
    FAIL() << "expected Io error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Io);
  }
  std::filesystem::remove(path);
}

TEST(Subset, KeepsListedMeasurementsInOrder) {
  const SensingOperator op = build_gaussian_operator(3, 6, RngSpec{17, "op"});
  const std::vector<int> idx{4, 1};
  const SensingOperator sub = op.subset(idx);
  oracle::Gen gen(32);
  const Eigen::MatrixXd z = gen.gaussian(3, 3);
  const Eigen::VectorXd full = op.apply(z);
  const Eigen::VectorXd part = sub.apply(z);
  EXPECT_EQ(part(0), full(4));
  EXPECT_EQ(part(1), full(1));
}
