#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>

#include "hdstat/lasso.hpp"
#include "hdstat/model_gen.hpp"
#include "hdstat/rng.hpp"
#include "hdstat/shrinkage.hpp"
#include "hdstat/state_evolution.hpp"

using namespace hdstat;

namespace {

LassoProblem random_problem(std::size_t n, std::size_t p, std::size_t s0, double sigma,
                            double lambda, std::uint64_t seed) {
  auto X = gaussian_design(n, p, stream_seed(seed, 0));
  const auto theta = sparse_signal(p, s0, 1.0, stream_seed(seed, 1));
  auto obs = linear_observe(X, theta, sigma, stream_seed(seed, 2));
  return LassoProblem(std::move(X), std::move(obs.y), lambda);
}

double lambda_max(const LassoProblem& prob) {
  return (prob.X.entries().transpose() * prob.y).cwiseAbs().maxCoeff() /
         static_cast<double>(prob.n());
}

Vector orthogonal_solution(const LassoProblem& prob) {
  return soft_threshold(Vector(prob.X.entries().transpose() * prob.y / static_cast<double>(prob.n())),
                        prob.lambda);
}

// theta with entries +-amplitude / sqrt(n), the scale state evolution works on.
struct AmpSetup {
  LassoProblem prob;
  Vector theta;
};

AmpSetup amp_setup(std::size_t p, double delta, double eps, double sigma, double amplitude,
                   std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(std::lround(delta * static_cast<double>(p)));
  const auto s0 = static_cast<std::size_t>(std::lround(eps * static_cast<double>(p)));
  auto X = gaussian_design(n, p, stream_seed(seed, 0));
  const auto theta =
      sparse_signal(p, s0, amplitude / std::sqrt(static_cast<double>(n)), stream_seed(seed, 1));
  auto obs = linear_observe(X, theta, sigma, stream_seed(seed, 2));
  return {LassoProblem(std::move(X), std::move(obs.y), 0.0), theta.values};
}

double mse(const Vector& a, const Vector& b) {
  return (a - b).squaredNorm() / static_cast<double>(a.size());
}

}  // namespace

TEST(LassoProblem, Validation) {
  const auto X = gaussian_design(5, 3, 1);
  EXPECT_THROW(LassoProblem(X, Vector::Zero(4), 0.1), InvalidArgument);
  EXPECT_THROW(LassoProblem(X, Vector::Zero(5), -0.1), InvalidArgument);
  EXPECT_THROW(LassoProblem(X, Vector::Zero(5), INFINITY), InvalidArgument);
}

TEST(LassoCost, Examples) {
  const auto prob = random_problem(20, 30, 3, 0.1, 0.2, 1);
  EXPECT_DOUBLE_EQ(lasso_cost(prob, Vector::Zero(30)), prob.y.squaredNorm() / 40.0);

  const LassoProblem zero_y(prob.X, Vector::Zero(20), 1.0);
  Vector e1 = Vector::Zero(30);
  e1[0] = 1.0;
  EXPECT_NEAR(lasso_cost(zero_y, e1), prob.X.entries().col(0).squaredNorm() / 40.0 + 1.0, 1e-14);
  EXPECT_THROW(lasso_cost(prob, Vector::Zero(29)), InvalidArgument);
}

TEST(LassoCost, OrthogonalClosedFormIsMinimal) {
  const auto X = orthogonal_design(64, 3);
  const auto theta = sparse_signal(64, 6, 1.0, 4);
  const auto obs = linear_observe(X, theta, 0.3, 5);
  const LassoProblem prob(X, obs.y, 0.05);
  const Vector best = orthogonal_solution(prob);
  const double f = lasso_cost(prob, best);
  GaussianSampler g(6);
  for (int i = 0; i < 100; ++i) {
    Vector d(64);
    for (auto& v : d) v = g();
    EXPECT_LE(f, lasso_cost(prob, best + 0.01 * d));
  }
}

TEST(Lipschitz, OrthogonalIsOne) {
  EXPECT_NEAR(lipschitz_bound(orthogonal_design(40, 1)), 1.0, 1e-8);
}

TEST(Lipschitz, DuplicatedColumn) {
  const auto g = gaussian_design(50, 1, 2);
  Matrix m(50, 2);
  m.col(0) = g.entries().col(0) * std::sqrt(50.0) / g.entries().col(0).norm();
  m.col(1) = m.col(0);
  EXPECT_NEAR(lipschitz_bound(DesignMatrix(m, DesignKind::custom)), 2.0, 1e-8);
}

TEST(Lipschitz, GaussianAgainstEigensolver) {
  const auto X = gaussian_design(200, 400, 3);
  const Matrix G = X.entries() * X.entries().transpose() / 200.0;  // same nonzero spectrum
  Eigen::SelfAdjointEigenSolver<Matrix> eig(G, Eigen::EigenvaluesOnly);
  const double top = eig.eigenvalues().maxCoeff();
  const double L = lipschitz_bound(X);
  EXPECT_NEAR(L / top, 1.0, 0.05);
  EXPECT_GE(L, top * (1.0 - 1e-6));
}

TEST(Lipschitz, ZeroDesignRejected) {
  EXPECT_THROW(lipschitz_bound(DesignMatrix(Matrix::Zero(3, 3), DesignKind::custom)),
               InvalidArgument);
}

TEST(Ista, LargeLambdaGivesZero) {
  auto prob = random_problem(30, 50, 5, 0.5, 0.0, 7);
  prob.lambda = lambda_max(prob);
  EXPECT_TRUE(ista(prob, 1000, 1e-12).final.isZero(0.0));
  prob.lambda *= 3.0;
  EXPECT_TRUE(ista(prob, 1000, 1e-12).final.isZero(0.0));
  EXPECT_EQ(kkt_residual(prob, Vector::Zero(50)), 0.0);
}

TEST(Ista, OrthogonalClosedForm) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto X = orthogonal_design(64, seed);
    const auto theta = sparse_signal(64, 8, 1.0, seed + 10);
    const auto obs = linear_observe(X, theta, 0.2, seed + 20);
    const LassoProblem prob(X, obs.y, 0.1);
    const Vector closed = orthogonal_solution(prob);
    EXPECT_LE((ista(prob, 10000, 1e-10).final - closed).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LE(kkt_residual(prob, closed), 1e-10);
  }
}

TEST(Ista, CostsMonotoneAndTraceConsistent) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto prob = random_problem(40, 80, 6, 0.3, 0.02 + 0.01 * (seed % 5), seed);
    const IterateTrace tr = ista(prob, 3000, 1e-12);
    ASSERT_EQ(tr.costs.size(), tr.iterations + 1);
    for (std::size_t t = 1; t < tr.costs.size(); ++t)
      ASSERT_LE(tr.costs[t], tr.costs[t - 1] + 1e-12) << "seed " << seed << " t " << t;
    ASSERT_EQ(tr.iterates.size(), tr.iterate_steps.size());
    for (std::size_t i = 0; i < tr.iterate_steps.size(); ++i) {
      const std::size_t t = tr.iterate_steps[i];
      EXPECT_TRUE(t <= 50 || t % 10 == 0);
      EXPECT_DOUBLE_EQ(lasso_cost(prob, tr.iterates[i]), tr.costs[t]);
    }
    EXPECT_EQ(tr.iterate_at(0)->size(), 80);
    if (tr.iterations >= 51) {
      EXPECT_EQ(tr.iterate_at(51), nullptr);
    }
  }
}

// Stopping at relative decrease tol * F with step 1/L leaves a step of size at
// most sqrt(2 tol F / L); the optimality gap of the last iterate is then at
// most 2 L times that step.
TEST(Ista, KktBoundAtStop) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto prob = random_problem(60, 100, 5, 0.2, 0.05, 100 + seed);
    const double L = lipschitz_bound(prob.X, 1e-12);
    const IterateTrace tr = ista(prob, 200000, 1e-10, {L, std::nullopt});
    EXPECT_TRUE(tr.converged);
    EXPECT_LE(kkt_residual(prob, tr.final), 2.0 * std::sqrt(2.0 * L * 1e-10 * tr.costs.back()));
  }
}

// On the compressed-sensing scale (entries +-1/sqrt(n)) tol = 1e-10 reaches 1e-6.
TEST(Ista, KktAtTightTolerance) {
  const double kappa = minimax_soft(0.1).ell;
  for (std::size_t p : {1000u, 2000u})
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      auto s = amp_setup(p, 0.5, 0.1, 0.2, 1.0, seed);
      s.prob.lambda = amp_lasso(s.prob, FixedAlpha{kappa}, 2000, 1e-12).induced_lambda;
      const IterateTrace tr = ista(s.prob, 1000000, 1e-10);
      EXPECT_TRUE(tr.converged);
      EXPECT_LE(kkt_residual(s.prob, tr.final), 1e-6) << p << " " << seed;
    }
}

TEST(Ista, SublinearCertificate) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto prob = random_problem(50, 100, 5, 0.3, 0.03, 200 + seed);
    const double L = lipschitz_bound(prob.X, 1e-12);
    const IterateTrace reference = ista(prob, 100000, 0.0, {L, std::nullopt});
    const double f_star = reference.costs.back();
    const IterateTrace tr = ista(prob, 100, 0.0, {L, std::nullopt});
    ASSERT_GE(tr.costs.size(), 101u);
    EXPECT_LE(tr.costs[100] - f_star, tr.costs[10] - f_star);
    EXPECT_GE(tr.costs[100] - f_star, -1e-12);
  }
}

TEST(Ista, StopBelow) {
  const auto prob = random_problem(40, 80, 4, 0.2, 0.05, 9);
  const IterateTrace full = ista(prob, 100000, 1e-14);
  const double target = full.costs.back() * (1.0 + 1e-3);
  const IterateTrace early = ista(prob, 100000, 1e-14, {0.0, target});
  EXPECT_TRUE(early.converged);
  EXPECT_LE(early.costs.back(), target);
  EXPECT_LT(early.iterations, full.iterations);
}

TEST(Kkt, ZeroIffMinimizerByPerturbation) {
  const auto prob = random_problem(40, 60, 4, 0.2, 0.05, 31);
  const Vector theta = ista(prob, 500000, 1e-16).final;
  ASSERT_LE(kkt_residual(prob, theta), 1e-8);
  const double f = lasso_cost(prob, theta);
  GaussianSampler g(32);
  for (int i = 0; i < 200; ++i) {
    Vector d(60);
    for (auto& v : d) v = g();
    d *= 1e-3 / d.norm();
    EXPECT_GE(lasso_cost(prob, theta + d), f - 1e-9);
  }
  // Away from the minimizer the residual is positive and descent directions exist.
  const Vector zero = Vector::Zero(60);
  EXPECT_GT(kkt_residual(prob, zero), 0.0);
  EXPECT_LT(lasso_cost(prob, theta), lasso_cost(prob, zero));
}

TEST(Ista, BasisPursuitLimit) {
  auto X = gaussian_design(60, 100, 41);
  const auto theta = sparse_signal(100, 3, 1.0, 42);
  const auto obs = linear_observe(X, theta, 0.0, 43);
  const double l1_true = theta.values.lpNorm<1>();
  double prev_residual = INFINITY, prev_l1 = 0.0;
  Vector last;
  for (double lambda : {1e-1, 1e-2, 1e-3, 1e-4}) {
    const LassoProblem prob(X, obs.y, lambda);
    last = ista(prob, 500000, 1e-15).final;
    const double residual = (X.entries() * last - obs.y).norm();
    const double l1 = last.lpNorm<1>();
    EXPECT_LT(residual, prev_residual) << lambda;
    EXPECT_GE(l1, prev_l1 - 1e-9) << lambda;
    EXPECT_LE(l1, l1_true + 1e-9) << lambda;
    prev_residual = residual;
    prev_l1 = l1;
  }
  EXPECT_LE(prev_residual, 1e-3 * obs.y.norm());
  EXPECT_LE((last - theta.values).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Amp, FixedPointSolvesLassoAtInducedLambda) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto s = amp_setup(1000, 0.5, 0.1, 0.2, 1.0, seed);
    const IterateTrace tr = amp_lasso(s.prob, FixedAlpha{1.5}, 2000, 1e-12);
    ASSERT_TRUE(tr.converged);
    ASSERT_TRUE(std::isfinite(tr.induced_lambda));
    const LassoProblem at(s.prob.X, s.prob.y, tr.induced_lambda);
    EXPECT_LE(kkt_residual(at, tr.final), 1e-4);
    // The LASSO minimizer is unique here, so ISTA lands on the same point.
    const Vector ref = ista(at, 200000, 1e-14).final;
    EXPECT_LE(std::sqrt(mse(ref, tr.final)), 1e-4 * std::sqrt(s.theta.squaredNorm() / 1000.0));
  }
}

TEST(Amp, TraceShape) {
  const auto s = amp_setup(400, 0.5, 0.1, 0.2, 1.0, 3);
  const IterateTrace tr = amp_lasso(s.prob, FixedAlpha{1.2}, 30, 0.0);
  EXPECT_EQ(tr.iterations, 30u);
  EXPECT_EQ(tr.costs.size(), 31u);
  EXPECT_EQ(tr.tau_hat.size(), 30u);
  EXPECT_EQ(tr.thresholds.size(), 30u);
  EXPECT_FALSE(tr.converged);
  EXPECT_NEAR(tr.tau_hat[0], s.prob.y.norm() / std::sqrt(200.0), 1e-12);
  for (std::size_t t = 0; t < 30; ++t)
    EXPECT_NEAR(tr.thresholds[t], 1.2 * tr.tau_hat[t] / std::sqrt(200.0), 1e-15);
  EXPECT_THROW(amp_lasso(s.prob, FixedAlpha{0.0}, 10, 0.0), InvalidArgument);
}

TEST(Amp, NoiselessSuccess) {
  const double kappa = minimax_soft(0.05).ell;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto s = amp_setup(2000, 0.5, 0.05, 0.0, 10.0, seed);
    const IterateTrace tr = amp_lasso(s.prob, FixedAlpha{kappa}, 3000, 1e-12);
    EXPECT_FALSE(tr.diverged);
    EXPECT_LE(mse(tr.final, s.theta), 1e-6) << seed;
  }
}

TEST(Amp, TracksStateEvolution) {
  const double kappa = minimax_soft(0.1).ell;
  SEConfig cfg{0.5, 0.1, 0.04, kappa, ThreePointPrior{1.0}};
  const std::size_t p = 2000;
  const double scale = 1.0 / std::sqrt(1000.0);
  const auto predicted = se_predicted_mse(cfg, se_trace(cfg, 10), scale);
  std::vector<double> empirical(11, 0.0);
  const int seeds = 4;
  for (int seed = 1; seed <= seeds; ++seed) {
    const auto s = amp_setup(p, 0.5, 0.1, 0.2, 1.0, 50 + seed);
    const IterateTrace tr = amp_lasso(s.prob, FixedAlpha{kappa}, 10, 0.0);
    for (std::size_t t = 0; t <= 10; ++t) empirical[t] += mse(*tr.iterate_at(t), s.theta) / seeds;
  }
  for (std::size_t t = 0; t <= 10; ++t)
    EXPECT_NEAR(empirical[t] / predicted[t], 1.0, 0.08) << "t = " << t;
}

TEST(Amp, OnsagerNecessity) {
  const double kappa = minimax_soft(0.1).ell;
  int better = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto s = amp_setup(4000, 0.5, 0.1, 0.2, 1.0, 700 + seed);
    const IterateTrace with = amp_lasso(s.prob, FixedAlpha{kappa}, 300, 1e-10);
    const IterateTrace without = amp_lasso(s.prob, FixedAlpha{kappa}, 300, 1e-10, {false, 1e6});
    better += mse(with.final, s.theta) < mse(without.final, s.theta);
  }
  EXPECT_GE(better, 8);
}

TEST(Amp, DivergenceFlag) {
  const auto s = amp_setup(400, 0.5, 0.1, 0.2, 1.0, 3);
  const IterateTrace tr = amp_lasso(s.prob, FixedAlpha{0.05}, 500, 1e-12, {true, 10.0});
  EXPECT_TRUE(tr.diverged);
  EXPECT_TRUE(std::isnan(tr.induced_lambda));
}

TEST(Amp, CalibratedPolicyHitsTarget) {
  const auto s = amp_setup(1000, 0.5, 0.1, 0.2, 1.0, 11);
  const IterateTrace probe = amp_lasso(s.prob, FixedAlpha{1.7}, 2000, 1e-12);
  ASSERT_TRUE(std::isfinite(probe.induced_lambda));
  const LassoProblem target(s.prob.X, s.prob.y, probe.induced_lambda);
  const IterateTrace tr = amp_lasso(target, FixedLambdaCalibrated{1e-8}, 2000, 1e-12);
  EXPECT_NEAR(tr.induced_lambda / probe.induced_lambda, 1.0, 1e-6);
  EXPECT_NEAR(tr.kappa, 1.7, 1e-3);
  EXPECT_LE(kkt_residual(target, tr.final), 1e-4);
  EXPECT_THROW(amp_lasso(s.prob, FixedLambdaCalibrated{}, 10, 0.0), InvalidArgument);
}

TEST(Rip, OrthogonalIsZero) {
  const auto X = orthogonal_design(10, 5);
  for (std::size_t k = 1; k <= 4; ++k) EXPECT_NEAR(rip_constant_bruteforce(X, k), 0.0, 1e-9);
}

TEST(Rip, DuplicatedColumn) {
  Matrix m = gaussian_design(30, 6, 7).entries();
  m.col(4) = m.col(1);
  EXPECT_GE(rip_constant_bruteforce(DesignMatrix(m, DesignKind::custom), 2), 1.0 - 1e-12);
}

TEST(Rip, MonotoneInK) {
  const auto X = gaussian_design(40, 14, 8);
  double prev = 0.0;
  for (std::size_t k = 1; k <= 3; ++k) {
    const double d = rip_constant_bruteforce(X, k);
    EXPECT_GE(d, prev);
    prev = d;
  }
}

TEST(Rip, SingletonMatchesColumnNorms) {
  const auto X = gaussian_design(25, 9, 9);
  double expect = 0.0;
  for (Eigen::Index j = 0; j < 9; ++j)
    expect = std::max(expect, std::abs(X.entries().col(j).squaredNorm() / 25.0 - 1.0));
  EXPECT_NEAR(rip_constant_bruteforce(X, 1), expect, 1e-12);
}

TEST(Rip, BudgetNamesCount) {
  const auto X = gaussian_design(10, 100, 1);
  try {
    rip_constant_bruteforce(X, 5);
    FAIL() << "expected InvalidArgument";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("75287520"), std::string::npos) << e.what();
  }
  EXPECT_THROW(rip_constant_bruteforce(X, 0), InvalidArgument);
  EXPECT_THROW(rip_constant_bruteforce(X, 101), InvalidArgument);
}
