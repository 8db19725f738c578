#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "hdstat/clique.hpp"
#include "hdstat/model_gen.hpp"
#include "hdstat/rng.hpp"

using namespace hdstat;

namespace {

std::size_t ceil_k(double kappa, std::size_t n) {
  return static_cast<std::size_t>(std::ceil(kappa * std::sqrt(static_cast<double>(n)) - 1e-9));
}

// Bisection on mu = kappa exp(mu^2 / 2) over [0, 1] (the lower root for kappa < e^{-1/2}).
double se_fixed_point_oracle(double kappa) {
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (mid - kappa * std::exp(0.5 * mid * mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST(Overlap, Examples) {
  const IndexSet S = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  EXPECT_EQ(overlap(S, S), 1.0);
  EXPECT_EQ(overlap({10, 11, 12}, S), 0.0);
  EXPECT_DOUBLE_EQ(overlap({0, 1, 2, 3, 4, 5, 6, 20, 21, 22}, S), 0.7);
  EXPECT_DOUBLE_EQ(overlap({9, 3, 1}, {1, 3, 5, 9}), 0.75);
  EXPECT_THROW(overlap({1}, {}), InvalidArgument);
}

TEST(IsClique, Examples) {
  const auto inst = planted_clique_instance(400, 30, 5);
  EXPECT_TRUE(is_clique(inst, inst.S));
  EXPECT_TRUE(is_clique(inst, {}));
  EXPECT_TRUE(is_clique(inst, {17}));
  std::size_t outsider = 0;
  while (std::binary_search(inst.S.begin(), inst.S.end(), outsider)) ++outsider;
  IndexSet T = inst.S;
  T.push_back(outsider);
  std::sort(T.begin(), T.end());
  EXPECT_FALSE(is_clique(inst, T));
}

TEST(TopK, TiesGoToSmallerIndex) {
  Vector s(6);
  s << 1, 3, 3, 2, 3, 0;
  EXPECT_EQ(top_k(s, 2), (IndexSet{1, 2}));
  EXPECT_EQ(top_k(s, 4), (IndexSet{1, 2, 3, 4}));
  EXPECT_EQ(top_k(s, 6).size(), 6u);
}

TEST(Degree, CompleteGraph) {
  const auto inst = planted_clique_instance(50, 50, 1);
  const auto est = degree_heuristic(inst);
  IndexSet all(50);
  std::iota(all.begin(), all.end(), 0);
  EXPECT_EQ(est.S_hat, all);
  EXPECT_EQ(est.method, CliqueMethod::degree);
}

// Non-clique degree sums reach about sqrt(2 n log n) while the weakest clique
// vertex sits near k - sqrt(2 n log k), so plain top-k degrees are exact only
// for k of order sqrt(8 n log n). At sqrt(3 n log n) they miss a few vertices,
// which the neighbour-count cleaning restores.
TEST(Degree, NearlyExactAtModerateK) {
  const std::size_t n = 2000;
  const auto k = static_cast<std::size_t>(std::ceil(std::sqrt(3.0 * n * std::log(double(n)))));
  EXPECT_EQ(k, 214u);
  int cleaned_exact = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto inst = planted_clique_instance(n, k, seed);
    const auto est = degree_heuristic(inst);
    EXPECT_GE(overlap(est.S_hat, inst.S), 0.95);
    cleaned_exact += clean_candidate(inst.W, est.S_hat, k).S_hat == inst.S;
  }
  EXPECT_GE(cleaned_exact, 18);
}

TEST(Degree, ExactWellAboveThreshold) {
  const std::size_t n = 2000;
  const auto k = static_cast<std::size_t>(std::ceil(std::sqrt(8.0 * n * std::log(double(n)))));
  int exact = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto inst = planted_clique_instance(n, k, seed);
    exact += degree_heuristic(inst).S_hat == inst.S;
  }
  EXPECT_GE(exact, 18);
}

TEST(Degree, FailsFarBelowThreshold) {
  int poor = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto inst = planted_clique_instance(2000, 20, seed);
    poor += overlap(degree_heuristic(inst).S_hat, inst.S) <= 0.2;
  }
  EXPECT_GE(poor, 18);
}

TEST(Degree, PermutationEquivariant) {
  const auto inst = planted_clique_instance(300, 150, 9);
  std::vector<std::size_t> perm(300);
  std::iota(perm.begin(), perm.end(), 0);
  SplitMix64 rng(10);
  for (std::size_t i = perm.size() - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
  SignMatrix P(300);
  for (std::size_t i = 0; i < 300; ++i)
    for (std::size_t j = i + 1; j < 300; ++j) P.set(perm[i], perm[j], inst.W(i, j));
  const IndexSet original = degree_heuristic(inst.W, 150).S_hat;
  IndexSet mapped;
  for (std::size_t v : original) mapped.push_back(perm[v]);
  std::sort(mapped.begin(), mapped.end());
  EXPECT_EQ(original, inst.S);
  EXPECT_EQ(degree_heuristic(P, 150).S_hat, mapped);
}

TEST(Spectral, ExactWellAboveBarrier) {
  const std::size_t n = 2000, k = ceil_k(3.0, n);
  EXPECT_EQ(k, 135u);
  int exact = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto inst = planted_clique_instance(n, k, seed);
    const auto est = spectral_clique(inst);
    exact += est.S_hat == inst.S;
    const auto& d = std::get<SpectralDiagnostics>(est.diagnostics);
    if (!d.low_confidence) {
      EXPECT_LE(d.residual, 1e-6 * std::abs(d.eigenvalue));
    }
    EXPECT_NEAR(d.eigenvector.norm(), 1.0, 1e-12);
    EXPECT_EQ(est.candidate.size(), k);
  }
  EXPECT_GE(exact, 19);
}

TEST(Spectral, EigenvectorOverlapAboveBarrier) {
  const std::size_t n = 4000;
  const auto inst = planted_clique_instance(n, ceil_k(2.0, n), 3);
  const auto d = leading_eigenvector(inst.W, 1e-8, 2000);
  double dot = 0.0;
  for (std::size_t v : inst.S) dot += d.eigenvector[static_cast<Eigen::Index>(v)];
  EXPECT_NEAR(std::abs(dot) / std::sqrt(double(inst.k)), std::sqrt(3.0) / 2.0, 0.1);
}

TEST(Spectral, EigenvectorUninformativeBelowBarrier) {
  const std::size_t n = 4000;
  int small = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto inst = planted_clique_instance(n, ceil_k(0.5, n), seed);
    const auto d = leading_eigenvector(inst.W, 1e-6, 300);
    double dot = 0.0;
    for (std::size_t v : inst.S) dot += d.eigenvector[static_cast<Eigen::Index>(v)];
    small += std::abs(dot) / std::sqrt(double(inst.k)) <= 0.15;
  }
  EXPECT_GE(small, 18);
}

TEST(CliqueSE, CriticalPointIsExactFixedPoint) {
  const double kappa = std::exp(-0.5);
  EXPECT_NEAR(kappa * std::exp(0.5 * 1.0 * 1.0), 1.0, 1e-15);
  const auto tr = clique_se_trace(kappa, 5);
  EXPECT_EQ(tr.mu_tilde.front(), kappa);
  for (std::size_t t = 1; t < tr.mu_tilde.size(); ++t) {
    EXPECT_GT(tr.mu_tilde[t], tr.mu_tilde[t - 1]);
    EXPECT_LT(tr.mu_tilde[t], 1.0);
  }
}

TEST(CliqueSE, ConvergesBelowThreshold) {
  const auto tr = clique_se_trace(0.5, 1000);
  EXPECT_TRUE(tr.converged);
  EXPECT_FALSE(tr.diverged);
  EXPECT_NEAR(tr.mu_tilde.back(), 0.597831879529177, 1e-10);
  EXPECT_NEAR(tr.mu_tilde.back(), se_fixed_point_oracle(0.5), 1e-10);
}

TEST(CliqueSE, DivergesAboveThreshold) {
  const auto tr = clique_se_trace(0.7, 60);
  EXPECT_TRUE(tr.diverged);
  EXPECT_GT(tr.mu_tilde.back(), 30.0);
  EXPECT_THROW(clique_se_trace(0.0, 5), InvalidArgument);
}

TEST(CliqueSE, Dichotomy) {
  double last_converged = 0.0, first_diverged = 2.0;
  for (int i = 1; i <= 50; ++i) {
    const double kappa = 0.1 + 1.1 * i / 51.0;
    const auto tr = clique_se_trace(kappa, 1000000);
    EXPECT_NE(tr.converged, tr.diverged) << kappa;
    EXPECT_EQ(tr.mu_tilde.front(), kappa);
    if (tr.converged) last_converged = std::max(last_converged, kappa);
    if (tr.diverged) first_diverged = std::min(first_diverged, kappa);
  }
  EXPECT_LT(last_converged, first_diverged);
  EXPECT_NEAR(0.5 * (last_converged + first_diverged), std::exp(-0.5), 0.02);
}

TEST(Amp, RecoversAboveThreshold) {
  const std::size_t n = 3000;
  int exact = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto inst = planted_clique_instance(n, ceil_k(1.0, n), seed);
    const auto est = amp_clique(inst, 30);
    exact += est.S_hat == inst.S;
    EXPECT_EQ(est.method, CliqueMethod::amp);
    EXPECT_EQ(est.S_hat.size(), inst.k);
    EXPECT_TRUE(std::is_sorted(est.S_hat.begin(), est.S_hat.end()));
    const auto& d = std::get<AmpCliqueDiagnostics>(est.diagnostics);
    EXPECT_EQ(d.mu_hat.size(), 29u);
    for (double mu : d.mu_used) EXPECT_LE(mu, 3.0);
  }
  EXPECT_GE(exact, 4);
}

TEST(Amp, FailsBelowThreshold) {
  const std::size_t n = 8000;
  int poor = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto inst = planted_clique_instance(n, ceil_k(0.4, n), seed);
    poor += overlap(amp_clique(inst, 30).S_hat, inst.S) <= 0.3;
  }
  EXPECT_GE(poor, 16);
}

TEST(Amp, OnsagerNecessity) {
  const std::size_t n = 8000;
  int degraded = 0;
  AmpCliqueOptions plain;
  plain.onsager = false;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto inst = planted_clique_instance(n, ceil_k(0.85, n), 100 + seed);
    const double with = overlap(amp_clique(inst, 30).candidate, inst.S);
    const double without = overlap(amp_clique(inst, 30, plain).candidate, inst.S);
    degraded += without < with;
  }
  EXPECT_GE(degraded, 14);
}

TEST(Cleaning, RepairsPartialCandidate) {
  const auto inst = planted_clique_instance(1000, 60, 4);
  IndexSet B(inst.S.begin(), inst.S.begin() + 40);
  for (std::size_t v = 0; B.size() < 60; ++v)
    if (!std::binary_search(inst.S.begin(), inst.S.end(), v)) B.push_back(v);
  std::sort(B.begin(), B.end());
  const auto cleaned = clean_candidate(inst.W, B, 60);
  EXPECT_EQ(cleaned.S_hat, inst.S);
  EXPECT_LE(cleaned.repair_steps, 120u);
}

TEST(EdgeList, RoundTrip) {
  const auto inst = planted_clique_instance(120, 15, 6);
  std::stringstream buffer;
  write_edge_list(inst.W, buffer);
  EXPECT_EQ(read_edge_list(buffer), inst.W);

  SignMatrix isolated(10);
  isolated.set(0, 1, 1);
  std::stringstream b2;
  write_edge_list(isolated, b2);
  EXPECT_EQ(read_edge_list(b2).size(), 10u);
}

TEST(EdgeList, ParsingRules) {
  std::istringstream in("# a comment\n0 1\n\n1 2  # trailing\n2 2\n");
  const SignMatrix W = read_edge_list(in);
  EXPECT_EQ(W.size(), 3u);
  EXPECT_EQ(W(0, 1), 1);
  EXPECT_EQ(W(1, 0), 1);
  EXPECT_EQ(W(0, 2), -1);
  EXPECT_EQ(W(2, 2), 1);
  std::istringstream sized("0 1\n");
  EXPECT_EQ(read_edge_list(sized, 5).size(), 5u);
}

TEST(EdgeList, Errors) {
  std::istringstream bad("0 1 2\n");
  EXPECT_THROW(read_edge_list(bad), InvalidArgument);
  std::istringstream negative("0 -1\n");
  EXPECT_THROW(read_edge_list(negative), InvalidArgument);
  std::istringstream too_big("0 7\n");
  EXPECT_THROW(read_edge_list(too_big, 5), InvalidArgument);
  std::istringstream empty("# nothing\n");
  EXPECT_THROW(read_edge_list(empty), InvalidArgument);
  EXPECT_THROW(read_edge_list(std::string("/nonexistent/graph.txt")), IoError);
}
