#pragma once

// State evolution for AMP on the LASSO:
//   tau_{t+1}^2 = G(tau_t^2) = sigma^2 + (1/delta) E{(eta(Theta + tau Z; kappa tau) - Theta)^2}
// and the phase boundary delta = M(eps).

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "hdstat/errors.hpp"
#include "hdstat/shrinkage.hpp"

namespace hdstat {

/// (1-eps) delta_0 + (eps/2) delta_{+a} + (eps/2) delta_{-a}. amplitude may be
/// +infinity, in which case each nonzero atom contributes its limiting risk
/// tau^2 (1 + kappa^2).
struct ThreePointPrior {
  double amplitude = 1.0;
};

/// Arbitrary finite prior as (value, mass) atoms.
struct CustomPrior {
  std::vector<std::pair<double, double>> atoms;
};

using SEPrior = std::variant<ThreePointPrior, CustomPrior>;

struct SEConfig {
  double delta = 0.5;
  double eps = 0.1;
  double sigma2 = 0.0;
  double kappa = 1.0;
  SEPrior prior = ThreePointPrior{};

  void validate() const {
    detail::require(std::isfinite(delta) && delta > 0.0, "SEConfig: delta must be > 0");
    detail::require(std::isfinite(sigma2) && sigma2 >= 0.0, "SEConfig: sigma2 must be >= 0");
    detail::require(kappa > 0.0, "SEConfig: kappa must be > 0");
    if (const auto* tp = std::get_if<ThreePointPrior>(&prior)) {
      detail::require(eps > 0.0 && eps < 1.0, "SEConfig: eps must lie in (0,1)");
      detail::require(!std::isnan(tp->amplitude), "SEConfig: amplitude is NaN");
    } else {
      const auto& atoms = std::get<CustomPrior>(prior).atoms;
      detail::require(!atoms.empty(), "SEConfig: custom prior has no atoms");
      double total = 0.0;
      for (const auto& [value, mass] : atoms) {
        detail::require(std::isfinite(value), "SEConfig: custom prior atom must be finite");
        detail::require(mass >= 0.0, "SEConfig: custom prior mass must be >= 0");
        total += mass;
      }
      detail::require(std::abs(total - 1.0) <= 1e-12,
                      "SEConfig: custom prior masses sum to " + std::to_string(total));
    }
  }

  /// Atoms as (value, mass); a three-point prior folds +a and -a together
  /// since the soft-thresholding error is symmetric.
  std::vector<std::pair<double, double>> atoms() const {
    if (const auto* tp = std::get_if<ThreePointPrior>(&prior))
      return {{0.0, 1.0 - eps}, {std::abs(tp->amplitude), eps}};
    return std::get<CustomPrior>(prior).atoms;
  }

  double second_moment() const {
    double m = 0.0;
    for (const auto& [value, mass] : atoms())
      if (mass > 0.0) m += mass * value * value;
    return m;
  }
};

/// G(tau^2) evaluated atom by atom with the closed-form soft-thresholding
/// error, so G(0) = sigma^2 exactly.
inline double se_map(const SEConfig& cfg, double tau2) {
  cfg.validate();
  detail::require(tau2 >= 0.0, "se_map: tau2 must be >= 0");
  if (std::isinf(tau2)) return tau2;
  const double tau = std::sqrt(tau2);
  double excess = 0.0;
  for (const auto& [value, mass] : cfg.atoms()) {
    if (mass == 0.0) continue;
    const double risk = std::isinf(value) ? tau2 * (1.0 + cfg.kappa * cfg.kappa)
                                          : soft_threshold_mse(value, tau, cfg.kappa * tau);
    excess += mass * risk;
  }
  return cfg.sigma2 + excess / cfg.delta;
}

struct SETrace {
  std::vector<double> tau2;  // tau_t^2 for t = 0..T (shorter if diverged)
  std::optional<double> fixed_point;
  bool converged = false;
  bool diverged = false;
};

namespace detail {
inline bool se_step_converged(double prev, double next) {
  return std::abs(next - prev) < 1e-12 * std::max(1.0, prev);
}
constexpr double kSEOverflow = 1e300;
}  // namespace detail

/// Starting value matching theta^(0) = 0: sigma^2 + E{Theta^2} / delta.
inline double se_initial_tau2(const SEConfig& cfg) {
  cfg.validate();
  return cfg.sigma2 + cfg.second_moment() / cfg.delta;
}

/// Iterates G for T steps from tau2_0 (default se_initial_tau2). All T+1
/// values are recorded; `converged` reports whether the last step moved by
/// less than 1e-12 max(1, tau^2).
inline SETrace se_trace(const SEConfig& cfg, std::size_t T,
                        std::optional<double> tau2_0 = std::nullopt) {
  detail::require(T >= 1, "se_trace: T must be >= 1");
  SETrace trace;
  double tau2 = tau2_0 ? *tau2_0 : se_initial_tau2(cfg);
  detail::require(tau2 >= 0.0, "se_trace: tau2_0 must be >= 0");
  trace.tau2.push_back(tau2);
  for (std::size_t t = 0; t < T; ++t) {
    const double next = se_map(cfg, tau2);
    if (!std::isfinite(next) || next > detail::kSEOverflow) {
      trace.diverged = true;
      return trace;
    }
    trace.converged = detail::se_step_converged(tau2, next);
    trace.tau2.push_back(next);
    tau2 = next;
  }
  if (trace.converged) trace.fixed_point = tau2;
  return trace;
}

/// Straight iteration of G to its fixed point (cap 10^4 steps).
inline SETrace se_fixed_point(const SEConfig& cfg, std::optional<double> tau2_0 = std::nullopt,
                              std::size_t max_iter = 10000) {
  SETrace trace;
  double tau2 = tau2_0 ? *tau2_0 : se_initial_tau2(cfg);
  trace.tau2.push_back(tau2);
  for (std::size_t t = 0; t < max_iter; ++t) {
    const double next = se_map(cfg, tau2);
    if (!std::isfinite(next) || next > detail::kSEOverflow) {
      trace.diverged = true;
      return trace;
    }
    trace.tau2.push_back(next);
    const bool done = detail::se_step_converged(tau2, next);
    tau2 = next;
    if (done) {
      trace.converged = true;
      trace.fixed_point = tau2;
      break;
    }
  }
  return trace;
}

/// Per-coordinate MSE predicted for the AMP iterate behind each tau_t^2:
/// delta (tau_t^2 - sigma^2) on the prior's scale, times scale^2. With
/// prior on sqrt(n) theta (as in amp_lasso) pass scale = 1/sqrt(n).
inline std::vector<double> se_predicted_mse(const SEConfig& cfg, const SETrace& trace,
                                            double scale = 1.0) {
  std::vector<double> mse;
  mse.reserve(trace.tau2.size());
  for (double t2 : trace.tau2) mse.push_back(cfg.delta * (t2 - cfg.sigma2) * scale * scale);
  return mse;
}

/// M(eps) sigma^2 / (delta - M(eps)) when M(eps) < delta, +infinity otherwise.
inline double lasso_asymptotic_risk(double eps, double delta, double sigma2) {
  detail::require(eps > 0.0 && eps < 1.0, "lasso_asymptotic_risk: eps must lie in (0,1)");
  detail::require(delta > 0.0, "lasso_asymptotic_risk: delta must be > 0");
  detail::require(sigma2 >= 0.0, "lasso_asymptotic_risk: sigma2 must be >= 0");
  const double M = minimax_soft(eps).M;
  if (M >= delta) return std::numeric_limits<double>::infinity();
  return M * sigma2 / (delta - M);
}

/// delta_c(eps) = M(eps) for each eps.
inline std::vector<std::pair<double, double>> phase_boundary(const std::vector<double>& eps_grid) {
  std::vector<std::pair<double, double>> curve;
  curve.reserve(eps_grid.size());
  for (double eps : eps_grid) curve.emplace_back(eps, minimax_soft(eps).M);
  return curve;
}

}  // namespace hdstat
