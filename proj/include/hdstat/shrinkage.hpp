#pragma once

// Scalar shrinkage: soft/hard thresholding, Gaussian expectations, and the
// minimax risk of soft thresholding over the sparse class
//   F_eps = { distributions with mass at least 1 - eps at zero }.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "hdstat/errors.hpp"
#include "hdstat/types.hpp"

namespace hdstat {

// ---------------------------------------------------------------------------
// Thresholding
// ---------------------------------------------------------------------------

inline double soft_threshold(double x, double lambda) {
  detail::require(lambda >= 0.0, "soft_threshold: lambda must be >= 0");
  if (x > lambda) return x - lambda;
  if (x < -lambda) return x + lambda;
  return 0.0;
}

/// Keeps x when |x| >= lambda (boundary kept).
inline double hard_threshold(double x, double lambda) {
  detail::require(lambda >= 0.0, "hard_threshold: lambda must be >= 0");
  return std::abs(x) >= lambda ? x : 0.0;
}

/// d/dx soft_threshold(x, lambda); 0 at the kinks |x| = lambda.
inline double soft_threshold_derivative(double x, double lambda) {
  return std::abs(x) > lambda ? 1.0 : 0.0;
}

template <typename Derived>
Eigen::VectorXd soft_threshold(const Eigen::MatrixBase<Derived>& x, double lambda) {
  detail::require(lambda >= 0.0, "soft_threshold: lambda must be >= 0");
  Eigen::VectorXd out = x;  // evaluate product expressions once, not per coefficient
  for (double& v : out) v = v > lambda ? v - lambda : (v < -lambda ? v + lambda : 0.0);
  return out;
}

template <typename Derived>
Eigen::VectorXd hard_threshold(const Eigen::MatrixBase<Derived>& x, double lambda) {
  detail::require(lambda >= 0.0, "hard_threshold: lambda must be >= 0");
  Eigen::VectorXd out = x;
  for (double& v : out) v = std::abs(v) >= lambda ? v : 0.0;
  return out;
}

enum class ShrinkageKind { soft, hard };

struct ShrinkageRule {
  ShrinkageKind kind = ShrinkageKind::soft;
  double lambda = 0.0;

  ShrinkageRule() = default;
  ShrinkageRule(ShrinkageKind k, double l) : kind(k), lambda(l) {
    detail::require(std::isfinite(l) && l >= 0.0, "ShrinkageRule: lambda must be finite and >= 0");
  }

  double operator()(double x) const {
    return kind == ShrinkageKind::soft ? soft_threshold(x, lambda) : hard_threshold(x, lambda);
  }

  template <typename Derived>
  Eigen::VectorXd operator()(const Eigen::MatrixBase<Derived>& x) const {
    return kind == ShrinkageKind::soft ? soft_threshold(x, lambda) : hard_threshold(x, lambda);
  }
};

// ---------------------------------------------------------------------------
// Standard normal helpers
// ---------------------------------------------------------------------------

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// P(lo <= Z <= hi), evaluated on whichever tail keeps full relative precision.
inline double normal_mass(double lo, double hi) {
  if (hi <= lo) return 0.0;
  if (lo >= 0.0) return normal_cdf(-lo) - normal_cdf(-hi);
  if (hi <= 0.0) return normal_cdf(hi) - normal_cdf(lo);
  return 1.0 - normal_cdf(lo) - normal_cdf(-hi);
}

// ---------------------------------------------------------------------------
// Gauss-Hermite quadrature for E f(Z), Z ~ N(0,1)
// ---------------------------------------------------------------------------

/// Nodes and weights of the N-point rule for the standard normal weight,
/// computed by the Golub-Welsch eigenvalue method on the Jacobi matrix of the
/// probabilists' Hermite polynomials. Exact for polynomials of degree <= 2N-1.
class GaussHermiteRule {
 public:
  explicit GaussHermiteRule(int nodes) {
    detail::require(nodes >= 2, "GaussHermiteRule: need at least 2 nodes");
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(nodes, nodes);
    for (int k = 1; k < nodes; ++k) {
      jacobi(k, k - 1) = std::sqrt(static_cast<double>(k));
      jacobi(k - 1, k) = jacobi(k, k - 1);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
    nodes_.resize(static_cast<std::size_t>(nodes));
    weights_.resize(static_cast<std::size_t>(nodes));
    double total = 0.0;
    for (int i = 0; i < nodes; ++i) {
      nodes_[static_cast<std::size_t>(i)] = eig.eigenvalues()[i];
      const double v0 = eig.eigenvectors()(0, i);
      weights_[static_cast<std::size_t>(i)] = v0 * v0;
      total += v0 * v0;
    }
    for (double& w : weights_) w /= total;
  }

  const std::vector<double>& nodes() const noexcept { return nodes_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  template <typename F>
  double expect(F&& f) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const double value = f(nodes_[i]);
      if (!std::isfinite(value)) {
        std::ostringstream msg;
        msg << "gauss_expect: non-finite integrand value at node " << i << " (z = "
            << nodes_[i] << ")";
        throw NumericFailure(msg.str());
      }
      sum += weights_[i] * value;
    }
    return sum;
  }

 private:
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

inline constexpr int kDefaultQuadratureNodes = 61;

/// E f(Z) for Z ~ N(0,1) by Gauss-Hermite quadrature.
/// Exact (up to rounding) when f is a polynomial of degree <= 2*nodes - 1.
/// Integrands with kinks, such as thresholding errors, converge only
/// algebraically in the node count; use the closed forms below for those.
template <typename F>
double gauss_expect(F&& f, int nodes = kDefaultQuadratureNodes) {
  return GaussHermiteRule(nodes).expect(std::forward<F>(f));
}

// ---------------------------------------------------------------------------
// Closed-form soft-thresholding risks
// ---------------------------------------------------------------------------

/// E{(eta(theta + tau Z; lambda) - theta)^2} in closed form.
/// Splitting Z at a = (lambda - theta)/tau and b = (-lambda - theta)/tau:
///   Z > a : error tau Z - lambda
///   Z < b : error tau Z + lambda
///   else  : error -theta
inline double soft_threshold_mse(double theta, double tau, double lambda) {
  detail::require(tau >= 0.0 && lambda >= 0.0, "soft_threshold_mse: tau and lambda must be >= 0");
  if (tau == 0.0) {
    const double err = soft_threshold(theta, lambda) - theta;
    return err * err;
  }
  const double a = (lambda - theta) / tau;
  const double b = (-lambda - theta) / tau;
  const double upper_tail = normal_cdf(-a);
  const double lower_tail = normal_cdf(b);
  const double pa = normal_pdf(a);
  const double pb = normal_pdf(b);
  const double upper = tau * tau * (upper_tail + a * pa) - 2.0 * lambda * tau * pa +
                       lambda * lambda * upper_tail;
  const double lower = tau * tau * (lower_tail - b * pb) - 2.0 * lambda * tau * pb +
                       lambda * lambda * lower_tail;
  const double middle = theta * theta * normal_mass(b, a);
  return upper + lower + middle;
}

/// sup over F_eps of the Bayes risk of eta(.; lambda) at unit noise. The
/// supremum is attained by (1-eps) delta_0 + eps delta_inf; the delta_inf atom
/// contributes its limiting risk 1 + lambda^2 (variance 1 plus squared bias).
inline double worstcase_soft_risk(double eps, double lambda) {
  detail::require(eps > 0.0 && eps < 1.0, "worstcase_soft_risk: eps must lie in (0,1)");
  detail::require(lambda >= 0.0, "worstcase_soft_risk: lambda must be >= 0");
  return (1.0 - eps) * soft_threshold_mse(0.0, 1.0, lambda) + eps * (1.0 + lambda * lambda);
}

struct MinimaxResult {
  double eps = 0.0;
  double M = 0.0;    // minimax risk at unit noise
  double ell = 0.0;  // minimax threshold at unit noise
  // Spread of the risk over the final golden-section bracket: an upper bound on
  // how far M can sit above the true minimum.
  double quadrature_error_bound = 0.0;
  int iterations = 0;
};

/// M(eps) = min_lambda worstcase_soft_risk(eps, lambda) by golden-section
/// search on [0, 10 + sqrt(2 log(1/eps))] until the bracket is narrower than tol.
inline MinimaxResult minimax_soft(double eps, double tol = 1e-10) {
  detail::require(eps > 0.0 && eps < 1.0, "minimax_soft: eps must lie in (0,1)");
  detail::require(tol > 0.0, "minimax_soft: tol must be positive");
  constexpr int kMaxIterations = 500;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = 0.0;
  double hi = 10.0 + std::sqrt(2.0 * std::log(1.0 / eps));
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = worstcase_soft_risk(eps, x1);
  double f2 = worstcase_soft_risk(eps, x2);
  int it = 0;
  while (hi - lo > tol) {
    if (++it > kMaxIterations)
      throw NumericFailure("minimax_soft: golden-section search did not converge");
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = worstcase_soft_risk(eps, x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = worstcase_soft_risk(eps, x2);
    }
  }
  MinimaxResult result;
  result.eps = eps;
  result.ell = 0.5 * (lo + hi);
  result.M = worstcase_soft_risk(eps, result.ell);
  const double edge = std::max(worstcase_soft_risk(eps, lo), worstcase_soft_risk(eps, hi));
  result.quadrature_error_bound = std::max(0.0, edge - result.M);
  result.iterations = it;
  return result;
}

}  // namespace hdstat
