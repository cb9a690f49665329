#include "lrsense/operators.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <new>
#include <numeric>

namespace lrsense {

namespace {

void require_same_n(int expected, Eigen::Index rows, Eigen::Index cols) {
  if (rows != expected || cols != expected) {
    throw Error(ErrorCode::DimensionMismatch, "matrix is " + std::to_string(rows) + "x" +
                                                  std::to_string(cols) + ", operator expects " +
                                                  std::to_string(expected));
  }
}

}  // namespace

SensingOperator SensingOperator::dense(int n, RowMajorMatrix matrices, std::uint64_t seed) {
  if (n < 1 || matrices.rows() < 1) {
    throw Error(ErrorCode::InvalidDimension, "dense operator requires n >= 1 and m >= 1");
  }
  if (matrices.cols() != static_cast<Eigen::Index>(n) * n) {
    throw Error(ErrorCode::DimensionMismatch, "each sensing matrix must hold n^2 entries");
  }
  SensingOperator op;
  op.kind_ = OperatorKind::DenseGaussian;
  op.n_ = n;
  op.m_ = static_cast<int>(matrices.rows());
  op.seed_ = seed;
  op.matrices_ = std::move(matrices);
  return op;
}

SensingOperator SensingOperator::mask(int n, std::vector<MaskEntry> entries, std::uint64_t seed) {
  if (n < 1 || entries.empty()) {
    throw Error(ErrorCode::InvalidDimension, "mask operator requires n >= 1 and m >= 1");
  }
  if (entries.size() > static_cast<std::size_t>(n) * n) {
    throw Error(ErrorCode::TooManySamples, "mask cannot observe more than n^2 entries");
  }
  std::vector<char> seen(static_cast<std::size_t>(n) * n, 0);
  for (const auto& e : entries) {
    if (e.row < 0 || e.row >= n || e.col < 0 || e.col >= n) {
      throw Error(ErrorCode::DimensionMismatch, "mask entry out of range");
    }
    char& flag = seen[static_cast<std::size_t>(e.row) * n + e.col];
    if (flag) throw Error(ErrorCode::InvalidConfig, "mask entries must be distinct");
    flag = 1;
  }
  SensingOperator op;
  op.kind_ = OperatorKind::CompletionMask;
  op.n_ = n;
  op.m_ = static_cast<int>(entries.size());
  op.seed_ = seed;
  op.entries_ = std::move(entries);
  return op;
}

double SensingOperator::normalization() const {
  if (kind_ == OperatorKind::DenseGaussian) return 1.0 / m_;
  return static_cast<double>(n_) * n_ / m_;
}

double SensingOperator::measurement_energy() const {
  if (kind_ == OperatorKind::DenseGaussian) return 1.0;
  return 1.0 / (static_cast<double>(n_) * n_);
}

Eigen::VectorXd SensingOperator::apply(const Eigen::MatrixXd& z) const {
  require_same_n(n_, z.rows(), z.cols());
  if (kind_ == OperatorKind::CompletionMask) {
    Eigen::VectorXd out(m_);
    for (int i = 0; i < m_; ++i) out(i) = z(entries_[i].row, entries_[i].col);
    return out;
  }
  // Row-major vec(Z) is the column-major storage of Z^T.
  const Eigen::MatrixXd zt = z.transpose();
  return matrices_ * Eigen::Map<const Eigen::VectorXd>(zt.data(), zt.size());
}

Eigen::VectorXd SensingOperator::apply(const SymMatrix& z) const {
  require_same_n(n_, z.n(), z.n());
  if (kind_ == OperatorKind::CompletionMask) return apply(z.mat());
  // Symmetric: row-major and column-major storage coincide.
  return matrices_ * Eigen::Map<const Eigen::VectorXd>(z.mat().data(), z.mat().size());
}

Eigen::VectorXd SensingOperator::apply_gram(const Eigen::MatrixXd& u) const {
  if (u.rows() != n_) throw Error(ErrorCode::DimensionMismatch, "factor row count differs from n");
  if (kind_ == OperatorKind::CompletionMask) {
    Eigen::VectorXd out(m_);
    for (int i = 0; i < m_; ++i) out(i) = u.row(entries_[i].row).dot(u.row(entries_[i].col));
    return out;
  }
  return apply(SymMatrix::gram(u));
}

Eigen::MatrixXd SensingOperator::adjoint_raw(const Eigen::VectorXd& v) const {
  if (v.size() != m_) {
    throw Error(ErrorCode::DimensionMismatch, "adjoint input has length " + std::to_string(v.size()) +
                                                  ", operator has m = " + std::to_string(m_));
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n_, n_);
  if (kind_ == OperatorKind::CompletionMask) {
    for (int i = 0; i < m_; ++i) out(entries_[i].row, entries_[i].col) += v(i);
    return out;
  }
  const Eigen::VectorXd flat = matrices_.transpose() * v;
  // flat is vec(M) row-major, i.e. the column-major storage of M^T.
  return Eigen::Map<const Eigen::MatrixXd>(flat.data(), n_, n_).transpose();
}

SymMatrix SensingOperator::adjoint(const Eigen::VectorXd& v) const {
  return SymMatrix::symmetrize(adjoint_raw(v));
}

SensingOperator SensingOperator::subset(std::span<const int> indices) const {
  for (int idx : indices) {
    if (idx < 0 || idx >= m_) throw Error(ErrorCode::DimensionMismatch, "subset index out of range");
  }
  if (kind_ == OperatorKind::CompletionMask) {
    std::vector<MaskEntry> sub;
    sub.reserve(indices.size());
    for (int idx : indices) sub.push_back(entries_[idx]);
    return mask(n_, std::move(sub), seed_);
  }
  RowMajorMatrix sub(static_cast<Eigen::Index>(indices.size()), matrices_.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) sub.row(i) = matrices_.row(indices[i]);
  return dense(n_, std::move(sub), seed_);
}

// On-disk layout, little-endian:
//   char[8]  magic "LRSENSOP"
//   u32      format version (1)
//   u32      kind (0 dense-gaussian, 1 completion-mask)
//   u64      n, m, seed
//   payload  dense: m * n * n f64, A_i row-major, i ascending
//            mask:  m pairs of (u32 row, u32 col)
namespace {

constexpr char kMagic[8] = {'L', 'R', 'S', 'E', 'N', 'S', 'O', 'P'};
constexpr std::uint32_t kFormatVersion = 1;

static_assert(std::endian::native == std::endian::little, "binary operator format assumes little-endian");

template <typename T>
void write_pod(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw Error(ErrorCode::Io, "truncated operator file");
  return value;
}

}  // namespace

void SensingOperator::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  out.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(out, kFormatVersion);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(kind_));
  write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(n_));
  write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m_));
  write_pod<std::uint64_t>(out, seed_);
  if (kind_ == OperatorKind::DenseGaussian) {
    out.write(reinterpret_cast<const char*>(matrices_.data()),
              static_cast<std::streamsize>(matrices_.size() * sizeof(double)));
  } else {
    for (const auto& e : entries_) {
      write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(e.row));
      write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(e.col));
    }
  }
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

SensingOperator SensingOperator::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorCode::Io, path.string() + " is not an operator file");
  }
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kFormatVersion) {
    throw Error(ErrorCode::Io, "unsupported operator format version " + std::to_string(version));
  }
  const auto kind = read_pod<std::uint32_t>(in);
  const auto n = read_pod<std::uint64_t>(in);
  const auto m = read_pod<std::uint64_t>(in);
  const auto seed = read_pod<std::uint64_t>(in);
  if (n == 0 || m == 0 || n > 1u << 16 || m > std::numeric_limits<int>::max()) {
    throw Error(ErrorCode::Io, "operator header has invalid dimensions");
  }
  if (kind == static_cast<std::uint32_t>(OperatorKind::DenseGaussian)) {
    RowMajorMatrix mats(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n * n));
    in.read(reinterpret_cast<char*>(mats.data()), static_cast<std::streamsize>(mats.size() * sizeof(double)));
    if (!in) throw Error(ErrorCode::Io, "truncated operator payload");
    return dense(static_cast<int>(n), std::move(mats), seed);
  }
  if (kind == static_cast<std::uint32_t>(OperatorKind::CompletionMask)) {
    std::vector<MaskEntry> entries(m);
    for (auto& e : entries) {
      e.row = static_cast<int>(read_pod<std::uint32_t>(in));
      e.col = static_cast<int>(read_pod<std::uint32_t>(in));
    }
    return mask(static_cast<int>(n), std::move(entries), seed);
  }
  throw Error(ErrorCode::Io, "unknown operator kind " + std::to_string(kind));
}

SensingOperator build_gaussian_operator(int n, int m, const RngSpec& rng) {
  if (n < 1 || m < 1) throw Error(ErrorCode::InvalidDimension, "gaussian operator requires n >= 1, m >= 1");
  const auto entries = static_cast<std::uint64_t>(m) * n * n;
  if (entries > static_cast<std::uint64_t>(std::numeric_limits<Eigen::Index>::max() / 8)) {
    throw Error(ErrorCode::AllocationFailure, "m * n^2 overflows addressable storage");
  }
  RowMajorMatrix mats;
  try {
    mats.resize(m, static_cast<Eigen::Index>(n) * n);
  } catch (const std::bad_alloc&) {
    throw Error(ErrorCode::AllocationFailure,
                "cannot allocate " + std::to_string(entries * sizeof(double)) + " bytes of sensing matrices");
  }
  auto gen = rng.engine();
  std::normal_distribution<double> normal(0.0, 1.0);
  double* data = mats.data();
  for (std::uint64_t i = 0; i < entries; ++i) data[i] = normal(gen);
  return SensingOperator::dense(n, std::move(mats), rng.seed);
}

SensingOperator build_completion_operator(int n, int m, const RngSpec& rng) {
  if (n < 1 || m < 1) throw Error(ErrorCode::InvalidDimension, "completion operator requires n >= 1, m >= 1");
  const int total = n * n;
  if (m > total) {
    throw Error(ErrorCode::TooManySamples,
                "requested " + std::to_string(m) + " samples from " + std::to_string(total) + " entries");
  }
  // Partial Fisher-Yates: the first m slots are a uniform sample without replacement.
  std::vector<int> cells(total);
  std::iota(cells.begin(), cells.end(), 0);
  auto gen = rng.engine();
  std::vector<MaskEntry> entries;
  entries.reserve(m);
  for (int i = 0; i < m; ++i) {
    std::uniform_int_distribution<int> pick(i, total - 1);
    std::swap(cells[i], cells[pick(gen)]);
    entries.push_back({cells[i] / n, cells[i] % n});
  }
  return SensingOperator::mask(n, std::move(entries), rng.seed);
}

double RipEstimate::median_deviation() const {
  if (ratios.empty()) return 0.0;
  std::vector<double> dev(ratios.size());
  std::transform(ratios.begin(), ratios.end(), dev.begin(), [](double r) { return std::abs(r - 1.0); });
  const auto mid = dev.begin() + static_cast<std::ptrdiff_t>(dev.size() / 2);
  std::nth_element(dev.begin(), mid, dev.end());
  if (dev.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(dev.begin(), mid);
  return 0.5 * (lower + upper);
}

RipEstimate estimate_rip(const SensingOperator& op, int k, int trials, const RngSpec& rng) {
  if (k < 1 || k > op.n()) throw Error(ErrorCode::InvalidDimension, "rip rank must satisfy 1 <= k <= n");
  if (trials < 1) throw Error(ErrorCode::InvalidDimension, "rip estimate needs at least one trial");
  RipEstimate est;
  est.k = k;
  est.trials = trials;
  est.ratios.reserve(trials);
  const double c = op.normalization();
  for (int t = 0; t < trials; ++t) {
    auto gen = rng.child("rip-trial", static_cast<std::uint64_t>(t)).engine();
    const Eigen::MatrixXd g = standard_normal(op.n(), k, gen);
    SymMatrix x = SymMatrix::gram(g);
    x = SymMatrix::symmetrize(x.mat() / x.fro_norm());
    const double ratio = c * op.apply(x).squaredNorm() / x.mat().squaredNorm();
    est.ratios.push_back(ratio);
    est.delta_hat = std::max(est.delta_hat, std::abs(ratio - 1.0));
  }
  return est;
}

PerturbationBounds check_perturbation_bounds(const SensingOperator& op, const Eigen::MatrixXd& x,
                                             const Eigen::MatrixXd& z, int k) {
  require_same_n(op.n(), x.rows(), x.cols());
  require_same_n(op.n(), z.rows(), z.cols());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd_x(x);
  const double fro_x = x.norm();
  const int rank_x = static_cast<int>((svd_x.singularValues().array() > kRankCutoff * std::max(fro_x, 1.0)).count());
  if (rank_x > k) {
    throw Error(ErrorCode::InvalidDimension,
                "x has numerical rank " + std::to_string(rank_x) + " > k = " + std::to_string(k));
  }
  const double c = op.normalization();
  PerturbationBounds out;
  out.fro_x = fro_x;
  out.spec_x = spectral_norm(x - c * op.adjoint_raw(op.apply(x)));
  out.nuc_z = nuclear_norm(z);
  out.spec_z = spectral_norm(z - c * op.adjoint_raw(op.apply(z)));
  return out;
}

}  // namespace lrsense
