#pragma once

// LASSO:  F(theta) = (1/2n) ||y - X theta||^2 + lambda ||theta||_1
// solved by iterative soft thresholding (ISTA) and by approximate message
// passing (AMP), plus optimality and restricted-isometry checks.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "hdstat/errors.hpp"
#include "hdstat/model_gen.hpp"
#include "hdstat/rng.hpp"
#include "hdstat/shrinkage.hpp"

namespace hdstat {

struct LassoProblem {
  DesignMatrix X;
  Vector y;
  double lambda = 0.0;

  LassoProblem(DesignMatrix design, Vector observations, double regularization)
      : X(std::move(design)), y(std::move(observations)), lambda(regularization) {
    detail::require(y.size() == X.n(), "LassoProblem: y has length " + std::to_string(y.size()) +
                                           ", design has n = " + std::to_string(X.n()));
    detail::require(std::isfinite(lambda) && lambda >= 0.0,
                    "LassoProblem: lambda must be finite and >= 0");
  }

  Eigen::Index n() const { return X.n(); }
  Eigen::Index p() const { return X.p(); }
};

/// Per-iteration record of a solver run. Iterates are kept for t <= 50 and
/// every 10th iteration afterwards; `iterate_steps[i]` is the t of
/// `iterates[i]`. costs[t] = F(theta^(t)) for every t, starting at theta^(0) = 0.
struct IterateTrace {
  std::vector<Vector> iterates;
  std::vector<std::size_t> iterate_steps;
  std::vector<double> costs;
  Vector final;
  std::size_t iterations = 0;
  bool converged = false;

  // AMP only.
  std::vector<double> tau_hat;     // sqrt(||r^(t)||^2 / n), the state-evolution scale
  std::vector<double> thresholds;  // gamma_t applied to theta^(t) + X^T r^(t) / n
  bool diverged = false;
  double kappa = 0.0;
  double induced_lambda = std::numeric_limits<double>::quiet_NaN();

  /// Stored iterate for step t, or nullptr if it was thinned away.
  const Vector* iterate_at(std::size_t t) const {
    const auto it = std::lower_bound(iterate_steps.begin(), iterate_steps.end(), t);
    if (it == iterate_steps.end() || *it != t) return nullptr;
    return &iterates[static_cast<std::size_t>(it - iterate_steps.begin())];
  }
};

namespace detail {

inline bool keep_iterate(std::size_t t) { return t <= 50 || t % 10 == 0; }

inline void check_theta(const LassoProblem& prob, const Vector& theta, const char* who) {
  require(theta.size() == prob.p(), std::string(who) + ": theta has length " +
                                        std::to_string(theta.size()) + ", expected p = " +
                                        std::to_string(prob.p()));
}

inline std::size_t count_nonzero(const Vector& v) {
  return static_cast<std::size_t>((v.array() != 0.0).count());
}

}  // namespace detail

inline double lasso_cost(const LassoProblem& prob, const Vector& theta) {
  detail::check_theta(prob, theta, "lasso_cost");
  const double n = static_cast<double>(prob.n());
  return (prob.y - prob.X.entries() * theta).squaredNorm() / (2.0 * n) +
         prob.lambda * theta.lpNorm<1>();
}

/// Largest distance between (1/n) x_j^T (y - X theta) and the subdifferential
/// of lambda |theta_j|. Zero exactly at minimizers of F.
inline double kkt_residual(const LassoProblem& prob, const Vector& theta) {
  detail::check_theta(prob, theta, "kkt_residual");
  const Vector g = prob.X.entries().transpose() * (prob.y - prob.X.entries() * theta) /
                   static_cast<double>(prob.n());
  double worst = 0.0;
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    const double r = theta[j] != 0.0
                         ? std::abs(g[j] - prob.lambda * (theta[j] > 0 ? 1.0 : -1.0))
                         : std::max(std::abs(g[j]) - prob.lambda, 0.0);
    worst = std::max(worst, r);
  }
  return worst;
}

/// Power iteration on X^T X / n, stopped when the Rayleigh quotient changes
/// by less than tol (relative). Returns (1 + tol) times the estimate.
inline double lipschitz_bound(const DesignMatrix& X, double tol = 1e-10) {
  detail::require(tol > 0.0, "lipschitz_bound: tol must be positive");
  const Matrix& A = X.entries();
  detail::require(A.cwiseAbs().maxCoeff() > 0.0, "lipschitz_bound: design is identically zero");
  constexpr int kMaxIterations = 200000;
  const double n = static_cast<double>(X.n());

  SplitMix64 rng(0x5EEDULL);
  Vector v(X.p());
  for (Eigen::Index j = 0; j < v.size(); ++j) v[j] = 0.5 + rng.uniform();
  v.normalize();
  double rho = 0.0;
  for (int it = 0; it < kMaxIterations; ++it) {
    Vector w = A.transpose() * (A * v) / n;
    const double next = v.dot(w);
    const double norm = w.norm();
    if (norm == 0.0) throw NumericFailure("lipschitz_bound: iterate collapsed to zero");
    v = w / norm;
    if (it > 0 && std::abs(next - rho) < tol * std::abs(next)) return (1.0 + tol) * next;
    rho = next;
  }
  throw NumericFailure("lipschitz_bound: power iteration did not converge");
}

struct IstaOptions {
  double L = 0.0;  // step-size constant; <= 0 computes it with lipschitz_bound
  // Also stop (as converged) once F drops to this value.
  std::optional<double> stop_below;
};

/// ISTA with step 1/L:
///   theta <- eta(theta + X^T (y - X theta) / (n L); lambda / L)
/// from theta^(0) = 0. Stops when the relative decrease of F drops below tol.
inline IterateTrace ista(const LassoProblem& prob, std::size_t max_iter, double tol,
                         const IstaOptions& options = {}) {
  const double L = options.L > 0.0 ? options.L : lipschitz_bound(prob.X, 1e-12);
  const Matrix& X = prob.X.entries();
  const double n = static_cast<double>(prob.n());

  IterateTrace trace;
  Vector theta = Vector::Zero(prob.p());
  double cost = lasso_cost(prob, theta);
  trace.costs.push_back(cost);
  trace.iterates.push_back(theta);
  trace.iterate_steps.push_back(0);

  for (std::size_t t = 1; t <= max_iter; ++t) {
    // (g / n) / L rather than g / (n L): keeps eta exactly zero at lambda = max|X^T y / n|.
    const Vector grad_step = (X.transpose() * (prob.y - X * theta) / n) / L;
    theta = soft_threshold(theta + grad_step, prob.lambda / L);
    const double next_cost = lasso_cost(prob, theta);
    trace.costs.push_back(next_cost);
    if (detail::keep_iterate(t)) {
      trace.iterates.push_back(theta);
      trace.iterate_steps.push_back(t);
    }
    trace.iterations = t;
    const double decrease = cost - next_cost;
    cost = next_cost;
    if (decrease <= tol * std::max(std::abs(cost), std::numeric_limits<double>::min()) ||
        (options.stop_below && cost <= *options.stop_below)) {
      trace.converged = true;
      break;
    }
  }
  trace.final = theta;
  return trace;
}

// ---------------------------------------------------------------------------
// AMP
// ---------------------------------------------------------------------------

/// gamma_t = kappa * tau_hat_t / sqrt(n).
struct FixedAlpha {
  double kappa = 1.0;
};

/// Searches kappa so that the AMP fixed point solves the LASSO at prob.lambda.
struct FixedLambdaCalibrated {
  double relative_tolerance = 1e-8;
};

using ThresholdPolicy = std::variant<FixedAlpha, FixedLambdaCalibrated>;

struct AmpLassoOptions {
  bool onsager = true;  // false gives plain iterative thresholding with the same gamma_t
  double divergence_factor = 1e6;
};

namespace detail {

inline IterateTrace amp_fixed_alpha(const LassoProblem& prob, double kappa, std::size_t max_iter,
                                    double tol, const AmpLassoOptions& options) {
  require(kappa > 0.0 && std::isfinite(kappa), "amp_lasso: kappa must be positive");
  const Matrix& X = prob.X.entries();
  const auto n = static_cast<double>(prob.n());
  const auto p = static_cast<double>(prob.p());
  const double sqrt_n = std::sqrt(n);

  IterateTrace trace;
  trace.kappa = kappa;
  Vector theta = Vector::Zero(prob.p());
  Vector r_prev = Vector::Zero(prob.n());
  double onsager = 0.0;
  double gamma = 0.0;
  trace.costs.push_back(lasso_cost(prob, theta));
  trace.iterates.push_back(theta);
  trace.iterate_steps.push_back(0);

  for (std::size_t t = 0; t < max_iter; ++t) {
    Vector r = prob.y - X * theta;
    if (options.onsager) r += onsager * r_prev;
    const double tau = r.norm() / sqrt_n;
    trace.tau_hat.push_back(tau);
    if (!std::isfinite(tau) || tau > options.divergence_factor * trace.tau_hat.front()) {
      trace.diverged = true;
      break;
    }
    gamma = kappa * tau / sqrt_n;
    trace.thresholds.push_back(gamma);
    Vector next = soft_threshold(theta + X.transpose() * r / n, gamma);
    onsager = static_cast<double>(count_nonzero(next)) / n;
    const double change = (next - theta).norm() / std::sqrt(p);
    theta = std::move(next);
    r_prev = std::move(r);

    const std::size_t step = t + 1;
    trace.iterations = step;
    trace.costs.push_back(lasso_cost(prob, theta));
    if (keep_iterate(step)) {
      trace.iterates.push_back(theta);
      trace.iterate_steps.push_back(step);
    }
    if (change < tol) {
      trace.converged = true;
      break;
    }
  }
  trace.final = theta;
  // Fixed point: r = (y - X theta) / (1 - b), so theta = eta(theta + X^T(y - X theta) /
  // (n (1 - b)); gamma), which is the LASSO stationarity condition at gamma (1 - b).
  const double b = static_cast<double>(count_nonzero(theta)) / n;
  if (!trace.diverged && b < 1.0) trace.induced_lambda = gamma * (1.0 - b);
  return trace;
}

}  // namespace detail

/// AMP for the LASSO, from theta^(0) = 0 and r^(-1) = 0:
///   r^(t)       = y - X theta^(t) + b_t r^(t-1),   b_t = ||theta^(t)||_0 / n
///   theta^(t+1) = eta(theta^(t) + X^T r^(t) / n; gamma_t)
/// The effective noise of theta^(t) + X^T r^(t)/n is estimated by
/// tau_hat_t^2 = ||r^(t)||^2 / n on the scale of sqrt(n) theta, so the
/// threshold in theta units is kappa tau_hat_t / sqrt(n). Stops when
/// ||theta^(t+1) - theta^(t)|| / sqrt(p) < tol. Intended for i.i.d. N(0,1) designs.
inline IterateTrace amp_lasso(const LassoProblem& prob, const ThresholdPolicy& policy,
                              std::size_t max_iter, double tol,
                              const AmpLassoOptions& options = {}) {
  if (const auto* fixed = std::get_if<FixedAlpha>(&policy))
    return detail::amp_fixed_alpha(prob, fixed->kappa, max_iter, tol, options);

  const auto& calibrated = std::get<FixedLambdaCalibrated>(policy);
  detail::require(prob.lambda > 0.0, "amp_lasso: calibrated policy needs lambda > 0");
  auto run = [&](double kappa) {
    return detail::amp_fixed_alpha(prob, kappa, max_iter, tol, options);
  };
  auto too_small = [&](const IterateTrace& tr) {
    return tr.diverged || !std::isfinite(tr.induced_lambda) || tr.induced_lambda < prob.lambda;
  };
  double hi = 1.0;
  IterateTrace at_hi = run(hi);
  int guard = 0;
  while (too_small(at_hi)) {
    if (++guard > 12) throw NumericFailure("amp_lasso: could not bracket kappa for target lambda");
    hi *= 2.0;
    at_hi = run(hi);
  }
  double lo = hi / 2.0;
  guard = 0;
  while (!too_small(run(lo))) {
    if (++guard > 40) throw NumericFailure("amp_lasso: could not bracket kappa from below");
    hi = lo;
    lo /= 2.0;
  }
  at_hi = run(hi);
  for (int it = 0; it < 200; ++it) {
    if (std::abs(at_hi.induced_lambda - prob.lambda) <=
        calibrated.relative_tolerance * prob.lambda)
      break;
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    IterateTrace at_mid = run(mid);
    if (too_small(at_mid)) {
      lo = mid;
    } else {
      hi = mid;
      at_hi = std::move(at_mid);
    }
  }
  return at_hi;
}

// ---------------------------------------------------------------------------
// Restricted isometry
// ---------------------------------------------------------------------------

namespace detail {

inline double binomial(std::size_t p, std::size_t k) {
  double value = 1.0;
  for (std::size_t i = 1; i <= k; ++i)
    value = value * static_cast<double>(p - k + i) / static_cast<double>(i);
  return std::round(value);
}

}  // namespace detail

/// Smallest delta with (1-delta)||v||^2 <= ||Xv||^2/n <= (1+delta)||v||^2 for
/// every k-sparse v: the maximum over all size-k supports T of the spectral
/// deviation of X_T^T X_T / n from the identity. Exhaustive; C(p,k) <= 10^6.
inline double rip_constant_bruteforce(const DesignMatrix& X, std::size_t k) {
  const auto p = static_cast<std::size_t>(X.p());
  detail::require(k >= 1 && k <= p, "rip_constant_bruteforce: need 1 <= k <= p");
  const double count = detail::binomial(p, k);
  if (count > 1e6)
    throw InvalidArgument("rip_constant_bruteforce: C(" + std::to_string(p) + "," +
                          std::to_string(k) + ") = " + std::to_string(static_cast<long long>(count)) +
                          " supports exceeds the budget of 1000000");
  const Matrix gram = X.entries().transpose() * X.entries() / static_cast<double>(X.n());
  const auto K = static_cast<Eigen::Index>(k);
  std::vector<std::size_t> support(k);
  for (std::size_t i = 0; i < k; ++i) support[i] = i;
  Matrix sub(K, K);
  double delta = 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig;
  while (true) {
    for (Eigen::Index a = 0; a < K; ++a)
      for (Eigen::Index b = 0; b < K; ++b)
        sub(a, b) = gram(static_cast<Eigen::Index>(support[static_cast<std::size_t>(a)]),
                         static_cast<Eigen::Index>(support[static_cast<std::size_t>(b)]));
    eig.compute(sub, Eigen::EigenvaluesOnly);
    const auto& ev = eig.eigenvalues();
    delta = std::max({delta, ev[K - 1] - 1.0, 1.0 - ev[0]});
    // next combination in lexicographic order
    std::size_t i = k;
    while (i > 0 && support[i - 1] == p - k + (i - 1)) --i;
    if (i == 0) break;
    ++support[i - 1];
    for (std::size_t j = i; j < k; ++j) support[j] = support[j - 1] + 1;
  }
  return delta;
}

}  // namespace hdstat
