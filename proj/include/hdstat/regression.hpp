#pragma once

// Classical regression: least squares and its risk, the cosine (Fourier)
// design with its bias-variance curve, the Haar transform, and thresholding
// denoisers on orthogonal designs.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "hdstat/errors.hpp"
#include "hdstat/model_gen.hpp"
#include "hdstat/rng.hpp"
#include "hdstat/shrinkage.hpp"

namespace hdstat {

// ---------------------------------------------------------------------------
// Least squares
// ---------------------------------------------------------------------------

namespace detail {

inline Eigen::ColPivHouseholderQR<Matrix> full_rank_qr(const Matrix& X, const char* who) {
  Eigen::ColPivHouseholderQR<Matrix> qr(X);
  const auto rank = qr.rank();
  if (rank < X.cols()) {
    const long deficient = static_cast<long>(X.cols() - rank);
    throw SingularDesign(std::string(who) + ": design is rank deficient (" +
                             std::to_string(deficient) + " of " + std::to_string(X.cols()) +
                             " columns linearly dependent)",
                         deficient);
  }
  return qr;
}

}  // namespace detail

/// argmin ||y - X theta||^2 via column-pivoted Householder QR.
inline Vector least_squares(const DesignMatrix& X, const Vector& y) {
  detail::require(y.size() == X.n(), "least_squares: y has length " + std::to_string(y.size()) +
                                         ", design has n = " + std::to_string(X.n()));
  return detail::full_rank_qr(X.entries(), "least_squares").solve(y);
}

/// E||theta_hat - theta||^2 = sigma^2 tr((X^T X)^{-1}).
inline double ls_risk_formula(const DesignMatrix& X, double sigma) {
  detail::require(sigma >= 0.0, "ls_risk_formula: sigma must be >= 0");
  auto qr = detail::full_rank_qr(X.entries(), "ls_risk_formula");
  // X P = Q R  =>  (X^T X)^{-1} = P R^{-1} R^{-T} P^T, trace = ||R^{-1}||_F^2.
  const auto p = X.p();
  const Matrix R = qr.matrixR().topLeftCorner(p, p).template triangularView<Eigen::Upper>();
  const Matrix Rinv = R.triangularView<Eigen::Upper>().solve(Matrix::Identity(p, p));
  return sigma * sigma * Rinv.squaredNorm();
}

// ---------------------------------------------------------------------------
// Cosine design and the bias-variance tradeoff
// ---------------------------------------------------------------------------

/// X_ij = phi_j(i/n), i = 1..n, with phi_j(t) = sqrt(2) cos((j-1) pi t) for
/// j >= 2 and phi_1 = 1, so that X^T X / n is close to the identity.
inline DesignMatrix fourier_design(std::size_t n, std::size_t J) {
  detail::require(J >= 1 && J <= n, "fourier_design: need 1 <= J <= n");
  Matrix X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(J));
  for (std::size_t i = 1; i <= n; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n);
    const auto row = static_cast<Eigen::Index>(i - 1);
    X(row, 0) = 1.0;
    for (std::size_t j = 2; j <= J; ++j)
      X(row, static_cast<Eigen::Index>(j - 1)) =
          std::numbers::sqrt2 * std::cos(static_cast<double>(j - 1) * std::numbers::pi * t);
  }
  return DesignMatrix(std::move(X), DesignKind::fourier);
}

struct RiskCurve {
  std::vector<std::pair<std::size_t, double>> grid;  // (J, risk)
  std::size_t argmin_J = 0;

  double min_risk() const {
    for (const auto& [J, r] : grid)
      if (J == argmin_J) return r;
    return std::numeric_limits<double>::quiet_NaN();
  }
};

/// Monte Carlo prediction risk (1/n) E||f_hat - f||^2 of the least-squares
/// fit on the first J cosine columns, for J = 1..J_max. All J share the same
/// noise draws; replicate r uses seed + r.
///
/// One thin QR of the J_max-column design serves every J: the span of the
/// first J columns equals the span of the first J columns of Q, so the fit is
/// Q_J Q_J^T y and its error follows from c = Q^T y and d = Q^T f.
inline RiskCurve bias_variance_curve(const std::function<double(double)>& f, std::size_t n,
                                     double sigma, std::size_t J_max, std::size_t replicates,
                                     std::uint64_t seed) {
  detail::require(J_max >= 1 && J_max <= n, "bias_variance_curve: need 1 <= J_max <= n");
  detail::require(replicates >= 1, "bias_variance_curve: replicates must be >= 1");
  detail::require(sigma >= 0.0, "bias_variance_curve: sigma must be >= 0");
  const auto N = static_cast<Eigen::Index>(n);
  const auto Jm = static_cast<Eigen::Index>(J_max);
  const DesignMatrix X = fourier_design(n, J_max);

  Eigen::HouseholderQR<Matrix> qr(X.entries());
  const Matrix& packed = qr.matrixQR();
  const double scale = packed.diagonal().cwiseAbs().maxCoeff();
  for (Eigen::Index j = 0; j < Jm; ++j) {
    if (std::abs(packed(j, j)) <= 1e-12 * scale)
      throw SingularDesign("bias_variance_curve: cosine design is rank deficient",
                           static_cast<long>(Jm - j));
  }
  const Matrix Q = qr.householderQ() * Matrix::Identity(N, Jm);

  Vector fv(N);
  for (Eigen::Index i = 0; i < N; ++i) {
    fv[i] = f(static_cast<double>(i + 1) / static_cast<double>(n));
    detail::require(std::isfinite(fv[i]), "bias_variance_curve: f must be finite on the grid");
  }
  const Vector d = Q.transpose() * fv;
  const double f_norm2 = fv.squaredNorm();

  std::vector<double> risk(J_max, 0.0);
  for (std::size_t r = 0; r < replicates; ++r) {
    GaussianSampler normal(seed + r);
    Vector y = fv;
    if (sigma > 0.0)
      for (Eigen::Index i = 0; i < N; ++i) y[i] += sigma * normal();
    const Vector c = Q.transpose() * y;
    double c2 = 0.0;
    double cd = 0.0;
    for (Eigen::Index j = 0; j < Jm; ++j) {
      c2 += c[j] * c[j];
      cd += c[j] * d[j];
      // ||Q_J c_J - f||^2 = ||c_J||^2 - 2 c_J.d_J + ||f||^2
      risk[static_cast<std::size_t>(j)] += std::max(0.0, c2 - 2.0 * cd + f_norm2) / static_cast<double>(n);
    }
  }

  RiskCurve curve;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t J = 1; J <= J_max; ++J) {
    const double value = risk[J - 1] / static_cast<double>(replicates);
    curve.grid.emplace_back(J, value);
    if (value < best) {
      best = value;
      curve.argmin_J = J;
    }
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Haar wavelets
// ---------------------------------------------------------------------------

/// Orthonormal Haar pyramid of a length-2^m signal. details[j] holds the 2^j
/// coefficients of level j, coarsest first.
struct WaveletCoeffs {
  double scaling = 0.0;
  std::vector<std::vector<double>> details;
  std::size_t n = 0;

  double squared_norm() const {
    double total = scaling * scaling;
    for (const auto& level : details)
      for (double c : level) total += c * c;
    return total;
  }
};

namespace detail {

inline bool is_power_of_two(std::size_t n) { return n >= 1 && (n & (n - 1)) == 0; }

}  // namespace detail

/// Mother wavelet convention: psi = -1 on [0, 1/2), +1 on [1/2, 1), so each
/// detail coefficient is (right - left) / sqrt(2).
inline WaveletCoeffs haar_forward(const Vector& v) {
  const auto n = static_cast<std::size_t>(v.size());
  detail::require(detail::is_power_of_two(n),
                  "haar_forward: length " + std::to_string(n) + " is not a power of two");
  std::vector<double> approx(v.data(), v.data() + v.size());
  std::vector<std::vector<double>> finest_first;
  while (approx.size() > 1) {
    const std::size_t half = approx.size() / 2;
    std::vector<double> next(half);
    std::vector<double> detail_level(half);
    for (std::size_t k = 0; k < half; ++k) {
      const double left = approx[2 * k];
      const double right = approx[2 * k + 1];
      next[k] = (left + right) / std::numbers::sqrt2;
      detail_level[k] = (right - left) / std::numbers::sqrt2;
    }
    finest_first.push_back(std::move(detail_level));
    approx = std::move(next);
  }
  WaveletCoeffs coeffs;
  coeffs.n = n;
  coeffs.scaling = approx[0];
  coeffs.details.assign(finest_first.rbegin(), finest_first.rend());
  return coeffs;
}

inline Vector haar_inverse(const WaveletCoeffs& c) {
  detail::require(detail::is_power_of_two(c.n), "haar_inverse: n must be a power of two");
  std::size_t expected_levels = 0;
  while ((std::size_t{1} << expected_levels) < c.n) ++expected_levels;
  detail::require(c.details.size() == expected_levels,
                  "haar_inverse: expected " + std::to_string(expected_levels) + " detail levels");
  for (std::size_t j = 0; j < c.details.size(); ++j)
    detail::require(c.details[j].size() == (std::size_t{1} << j),
                    "haar_inverse: level " + std::to_string(j) + " must hold " +
                        std::to_string(std::size_t{1} << j) + " coefficients");
  std::vector<double> approx{c.scaling};
  for (const auto& level : c.details) {
    std::vector<double> finer(2 * approx.size());
    for (std::size_t k = 0; k < approx.size(); ++k) {
      finer[2 * k] = (approx[k] - level[k]) / std::numbers::sqrt2;
      finer[2 * k + 1] = (approx[k] + level[k]) / std::numbers::sqrt2;
    }
    approx = std::move(finer);
  }
  return Eigen::Map<const Vector>(approx.data(), static_cast<Eigen::Index>(approx.size()));
}

// ---------------------------------------------------------------------------
// Thresholding on orthogonal designs
// ---------------------------------------------------------------------------

/// sigma sqrt(2 log p / n).
inline double universal_threshold(double sigma, std::size_t n, std::size_t p) {
  detail::require(p >= 2, "universal_threshold: p must be >= 2");
  detail::require(n >= 1, "universal_threshold: n must be >= 1");
  detail::require(sigma >= 0.0, "universal_threshold: sigma must be >= 0");
  return sigma * std::sqrt(2.0 * std::log(static_cast<double>(p)) / static_cast<double>(n));
}

/// rule applied componentwise to X^T y / n. Requires X^T X = n I.
inline Vector ortho_denoise(const DesignMatrix& X, const Vector& y, const ShrinkageRule& rule) {
  detail::require(X.kind() == DesignKind::orthogonal,
                  std::string("ortho_denoise: design must be orthogonal, got ") +
                      to_string(X.kind()));
  detail::require(y.size() == X.n(), "ortho_denoise: y length does not match design");
  const Vector y_tilde = X.entries().transpose() * y / static_cast<double>(X.n());
  return rule(y_tilde);
}

}  // namespace hdstat
