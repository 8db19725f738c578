#pragma once

// Seeded generation of every random object used in the library: designs,
// sparse signals, noisy linear observations and planted-clique graphs.
// All functions are pure in their arguments (seed included).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "hdstat/errors.hpp"
#include "hdstat/rng.hpp"
#include "hdstat/types.hpp"

namespace hdstat {

using IndexSet = std::vector<std::size_t>;

enum class DesignKind { gaussian_iid, orthogonal, fourier, custom };

inline const char* to_string(DesignKind kind) {
  switch (kind) {
    case DesignKind::gaussian_iid: return "gaussian_iid";
    case DesignKind::orthogonal: return "orthogonal";
    case DesignKind::fourier: return "fourier";
    case DesignKind::custom: return "custom";
  }
  return "unknown";
}

/// Dense n x p design with a provenance tag. Entries are immutable and shared
/// between copies, so passing designs by value is cheap.
class DesignMatrix {
 public:
  DesignMatrix(Matrix entries, DesignKind kind)
      : entries_(std::make_shared<const Matrix>(std::move(entries))), kind_(kind) {
    detail::require(entries_->rows() >= 1 && entries_->cols() >= 1,
                    "design matrix must have at least one row and one column");
    detail::require(entries_->allFinite(), "design matrix entries must be finite");
  }

  /// Wraps an arbitrary user matrix.
  static DesignMatrix custom(Matrix entries) {
    return DesignMatrix(std::move(entries), DesignKind::custom);
  }

  const Matrix& entries() const noexcept { return *entries_; }
  Eigen::Index n() const noexcept { return entries_->rows(); }
  Eigen::Index p() const noexcept { return entries_->cols(); }
  DesignKind kind() const noexcept { return kind_; }

 private:
  std::shared_ptr<const Matrix> entries_;
  DesignKind kind_;
};

struct SparseSignal {
  Vector values;
  IndexSet support;  // sorted
  std::size_t s0 = 0;
  double eps = 0.0;
};

struct ObservationVector {
  Vector y;
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

/// Symmetric n x n matrix with entries in {-1, +1}, stored one byte per entry.
class SignMatrix {
 public:
  SignMatrix() = default;

  /// All entries -1 except the diagonal, which is +1.
  explicit SignMatrix(std::size_t n)
      : n_(n), data_(std::make_shared<std::vector<std::int8_t>>(n * n, std::int8_t{-1})) {
    for (std::size_t i = 0; i < n_; ++i) (*data_)[i * n_ + i] = 1;
  }

  std::size_t size() const noexcept { return n_; }

  std::int8_t operator()(std::size_t i, std::size_t j) const noexcept {
    return (*data_)[i * n_ + j];
  }

  const std::int8_t* row(std::size_t i) const noexcept { return data_->data() + i * n_; }

  /// Sets W(i,j) and W(j,i). Copies made earlier stay untouched.
  void set(std::size_t i, std::size_t j, std::int8_t value) {
    detach();
    (*data_)[i * n_ + j] = value;
    (*data_)[j * n_ + i] = value;
  }

  /// out = scale * W * x. Each row is reduced with eight interleaved partial
  /// sums combined in a fixed order, so results do not depend on threading.
  void multiply(const Vector& x, Vector& out, double scale = 1.0) const {
    out.resize(static_cast<Eigen::Index>(n_));
    const double* xv = x.data();
    for (std::size_t i = 0; i < n_; ++i) {
      const std::int8_t* w = row(i);
      double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
      std::size_t j = 0;
      for (; j + 8 <= n_; j += 8) {
        for (int l = 0; l < 8; ++l) acc[l] += static_cast<double>(w[j + l]) * xv[j + l];
      }
      double tail = 0.0;
      for (; j < n_; ++j) tail += static_cast<double>(w[j]) * xv[j];
      const double sum =
          ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
      out[static_cast<Eigen::Index>(i)] = scale * sum;
    }
  }

  Vector multiply(const Vector& x, double scale = 1.0) const {
    Vector out;
    multiply(x, out, scale);
    return out;
  }

  bool operator==(const SignMatrix& other) const {
    return n_ == other.n_ && (data_ == other.data_ || *data_ == *other.data_);
  }

 private:
  void detach() {
    if (data_.use_count() > 1) data_ = std::make_shared<std::vector<std::int8_t>>(*data_);
  }

  std::size_t n_ = 0;
  std::shared_ptr<std::vector<std::int8_t>> data_;
};

struct PlantedCliqueInstance {
  SignMatrix W;
  IndexSet S;  // sorted, |S| = k
  std::size_t n = 0;
  std::size_t k = 0;
  double kappa = 0.0;  // k / sqrt(n)
};

namespace detail {

// Uniformly random k-subset of {0..n-1} by partial Fisher-Yates, returned sorted.
inline IndexSet random_subset(std::size_t n, std::size_t k, SplitMix64& rng) {
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(pool[i], pool[j]);
  }
  IndexSet subset(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(subset.begin(), subset.end());
  return subset;
}

}  // namespace detail

/// i.i.d. N(0,1) entries, filled column by column.
inline DesignMatrix gaussian_design(std::size_t n, std::size_t p, std::uint64_t seed) {
  detail::require(n >= 1 && p >= 1, "gaussian_design: dimensions must be positive");
  GaussianSampler normal(seed);
  Matrix X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  for (Eigen::Index j = 0; j < X.cols(); ++j)
    for (Eigen::Index i = 0; i < X.rows(); ++i) X(i, j) = normal();
  return DesignMatrix(std::move(X), DesignKind::gaussian_iid);
}

/// sqrt(n) * Q with Q Haar-distributed on O(n): Householder QR of a Gaussian
/// matrix, with Q's columns multiplied by sign(R_jj).
inline DesignMatrix orthogonal_design(std::size_t n, std::uint64_t seed) {
  detail::require(n >= 1, "orthogonal_design: n must be positive");
  const Matrix G = gaussian_design(n, n, seed).entries();
  Eigen::HouseholderQR<Matrix> qr(G);
  Matrix Q = qr.householderQ();
  const Matrix& R = qr.matrixQR();
  for (Eigen::Index j = 0; j < Q.cols(); ++j)
    if (R(j, j) < 0) Q.col(j) = -Q.col(j);
  Q *= std::sqrt(static_cast<double>(n));
  return DesignMatrix(std::move(Q), DesignKind::orthogonal);
}

/// sqrt(n) times the orthonormal DCT-II basis, columns randomly signed and
/// permuted. Exactly orthogonal like orthogonal_design but O(n^2) to build,
/// which makes n = 10^4 practical. Angles are reduced in integer arithmetic.
inline DesignMatrix dct_orthogonal_design(std::size_t n, std::uint64_t seed) {
  detail::require(n >= 1, "dct_orthogonal_design: n must be positive");
  SplitMix64 rng(seed);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  std::vector<double> sign(n);
  for (auto& s : sign) s = rng.coin() ? 1.0 : -1.0;

  const auto N = static_cast<Eigen::Index>(n);
  Matrix X(N, N);
  const double period = 4.0 * static_cast<double>(n);
  for (std::size_t c = 0; c < n; ++c) {
    const std::size_t freq = perm[c];
    const double scale = sign[c] * (freq == 0 ? 1.0 : std::sqrt(2.0));
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint64_t m = (static_cast<std::uint64_t>(2 * i + 1) * freq) % (4 * n);
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          scale * std::cos(2.0 * std::numbers::pi * static_cast<double>(m) / period);
    }
  }
  return DesignMatrix(std::move(X), DesignKind::orthogonal);
}

/// s0 distinct coordinates set to +-amplitude (Rademacher signs), rest zero.
inline SparseSignal sparse_signal(std::size_t p, std::size_t s0, double amplitude,
                                  std::uint64_t placement_seed) {
  detail::require(p >= 1, "sparse_signal: p must be positive");
  detail::require(s0 <= p, "sparse_signal: s0 = " + std::to_string(s0) + " exceeds p = " +
                               std::to_string(p));
  detail::require(std::isfinite(amplitude) && (s0 == 0 || amplitude != 0.0),
                  "sparse_signal: amplitude must be finite and nonzero");
  SplitMix64 rng(placement_seed);
  SparseSignal signal;
  signal.support = detail::random_subset(p, s0, rng);
  signal.values = Vector::Zero(static_cast<Eigen::Index>(p));
  for (std::size_t i : signal.support)
    signal.values[static_cast<Eigen::Index>(i)] = rng.coin() ? amplitude : -amplitude;
  signal.s0 = s0;
  signal.eps = static_cast<double>(s0) / static_cast<double>(p);
  return signal;
}

/// y = X theta + sigma z. With sigma = 0 no noise is drawn and y = X theta exactly.
inline ObservationVector linear_observe(const DesignMatrix& X, const Vector& theta, double sigma,
                                        std::uint64_t seed) {
  detail::require(theta.size() == X.p(), "linear_observe: theta has length " +
                                             std::to_string(theta.size()) + ", design has p = " +
                                             std::to_string(X.p()));
  detail::require(sigma >= 0.0 && std::isfinite(sigma), "linear_observe: sigma must be >= 0");
  ObservationVector obs;
  obs.y = X.entries() * theta;
  obs.sigma = sigma;
  obs.seed = seed;
  if (sigma > 0.0) {
    GaussianSampler normal(seed);
    for (Eigen::Index a = 0; a < obs.y.size(); ++a) obs.y[a] += sigma * normal();
  }
  return obs;
}

inline ObservationVector linear_observe(const DesignMatrix& X, const SparseSignal& theta,
                                        double sigma, std::uint64_t seed) {
  return linear_observe(X, theta.values, sigma, seed);
}

/// Erdos-Renyi(n, 1/2) graph in +-1 form with a clique planted on a uniform
/// k-subset S. Diagonal entries are +1. The subset is drawn first, then the
/// upper triangle row by row, 64 coin flips per generator call.
inline PlantedCliqueInstance planted_clique_instance(std::size_t n, std::size_t k,
                                                     std::uint64_t seed) {
  detail::require(k >= 1 && k <= n, "planted_clique_instance: need 1 <= k <= n (k = " +
                                        std::to_string(k) + ", n = " + std::to_string(n) + ")");
  SplitMix64 rng(seed);
  PlantedCliqueInstance inst;
  inst.n = n;
  inst.k = k;
  inst.kappa = static_cast<double>(k) / std::sqrt(static_cast<double>(n));
  inst.S = detail::random_subset(n, k, rng);

  SignMatrix W(n);
  std::uint64_t word = 0;
  int bits_left = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (bits_left == 0) {
        word = rng();
        bits_left = 64;
      }
      const std::int8_t v = (word & 1U) ? std::int8_t{1} : std::int8_t{-1};
      word >>= 1;
      --bits_left;
      if (v == 1) W.set(i, j, v);
    }
  }
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a + 1; b < k; ++b) W.set(inst.S[a], inst.S[b], 1);
  inst.W = std::move(W);
  return inst;
}

}  // namespace hdstat
