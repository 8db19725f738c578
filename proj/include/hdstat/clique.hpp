#pragma once

// Planted clique recovery: degree heuristic, spectral method, and AMP with the
// exponential nonlinearity, all followed by the same cleaning step.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "hdstat/errors.hpp"
#include "hdstat/model_gen.hpp"
#include "hdstat/rng.hpp"
#include "hdstat/shrinkage.hpp"

namespace hdstat {

enum class CliqueMethod { degree, spectral, amp };

inline const char* to_string(CliqueMethod m) {
  switch (m) {
    case CliqueMethod::degree: return "degree";
    case CliqueMethod::spectral: return "spectral";
    case CliqueMethod::amp: return "amp";
  }
  return "?";
}

struct SpectralDiagnostics {
  double eigenvalue = 0.0;  // Rayleigh quotient of W / sqrt(n)
  double residual = 0.0;    // ||A v - lambda v||
  std::size_t iterations = 0;
  bool low_confidence = false;  // power iteration hit its cap
  Vector eigenvector;           // unit norm
};

struct AmpCliqueDiagnostics {
  std::vector<double> mu_hat;   // data estimate at each iteration
  std::vector<double> mu_used;  // parameter of f_t actually applied
  std::size_t best_iteration = 0;
  bool saturated = false;  // some exp argument was clamped at 700
};

struct CliqueEstimate {
  IndexSet S_hat;      // sorted, size k
  IndexSet candidate;  // set B before cleaning (empty for the degree heuristic)
  CliqueMethod method = CliqueMethod::degree;
  std::size_t repair_steps = 0;
  std::variant<std::monostate, SpectralDiagnostics, AmpCliqueDiagnostics> diagnostics;
};

struct CliqueSETrace {
  std::vector<double> mu_tilde;  // mu_tilde[0] is mu_1 = kappa
  bool diverged = false;
  bool converged = false;
};

// ---------------------------------------------------------------------------
// Set utilities
// ---------------------------------------------------------------------------

inline double overlap(const IndexSet& S_hat, const IndexSet& S) {
  detail::require(!S.empty(), "overlap: reference set is empty");
  IndexSet a = S_hat, b = S;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  IndexSet common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  return static_cast<double>(common.size()) / static_cast<double>(S.size());
}

inline bool is_clique(const SignMatrix& W, const IndexSet& T) {
  for (std::size_t a = 0; a < T.size(); ++a) {
    detail::require(T[a] < W.size(), "is_clique: vertex index out of range");
    for (std::size_t b = a + 1; b < T.size(); ++b)
      if (W(T[a], T[b]) != 1) return false;
  }
  return true;
}

inline bool is_clique(const PlantedCliqueInstance& inst, const IndexSet& T) {
  return is_clique(inst.W, T);
}

/// Indices of the k largest entries of `score`, ties toward smaller index; sorted.
template <typename Score>
IndexSet top_k(const Score& score, std::size_t k) {
  const auto n = static_cast<std::size_t>(score.size());
  detail::require(k <= n, "top_k: k exceeds the number of entries");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto better = [&](std::size_t a, std::size_t b) {
    const double sa = static_cast<double>(score[a]);
    const double sb = static_cast<double>(score[b]);
    return sa > sb || (sa == sb && a < b);
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), better);
  IndexSet out(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(out.begin(), out.end());
  return out;
}

namespace detail {

// Number of +1 entries of row i restricted to `members` (self included when i is a member).
inline std::vector<int> neighbour_counts(const SignMatrix& W, const std::vector<char>& member) {
  const std::size_t n = W.size();
  std::vector<int> count(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::int8_t* row = W.row(i);
    int c = 0;
    for (std::size_t j = 0; j < n; ++j) c += (member[j] && row[j] == 1) ? 1 : 0;
    count[i] = c;
  }
  return count;
}

}  // namespace detail

struct CleaningResult {
  IndexSet S_hat;
  std::size_t repair_steps = 0;
};

/// One round of "the k vertices with most neighbours in B", then, while the
/// result is not a clique and for at most 2k steps, drop the member with the
/// fewest neighbours in the set and add the best outsider other than the one
/// just dropped. Ties go to the smaller index throughout.
inline CleaningResult clean_candidate(const SignMatrix& W, const IndexSet& B, std::size_t k) {
  const std::size_t n = W.size();
  detail::require(k >= 1 && k <= n, "clean_candidate: need 1 <= k <= n");
  std::vector<char> member(n, 0);
  for (std::size_t v : B) {
    detail::require(v < n, "clean_candidate: vertex index out of range");
    member[v] = 1;
  }
  const std::vector<int> in_b = detail::neighbour_counts(W, member);
  const IndexSet first = top_k(in_b, k);

  std::fill(member.begin(), member.end(), 0);
  for (std::size_t v : first) member[v] = 1;
  std::vector<int> count = detail::neighbour_counts(W, member);
  const int full = static_cast<int>(k);

  CleaningResult result;
  for (std::size_t step = 0; step < 2 * k; ++step) {
    std::size_t worst = n;
    for (std::size_t i = 0; i < n; ++i)
      if (member[i] && (worst == n || count[i] < count[worst])) worst = i;
    if (count[worst] >= full) break;  // every member is adjacent to all others
    if (k == n) break;                // no outsider to swap in
    member[worst] = 0;
    const std::int8_t* wrow = W.row(worst);
    for (std::size_t j = 0; j < n; ++j) count[j] -= (wrow[j] == 1) ? 1 : 0;
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i)
      if (!member[i] && i != worst && (best == n || count[i] > count[best])) best = i;
    if (best == n) best = worst;
    member[best] = 1;
    const std::int8_t* brow = W.row(best);
    for (std::size_t j = 0; j < n; ++j) count[j] += (brow[j] == 1) ? 1 : 0;
    ++result.repair_steps;
  }
  for (std::size_t i = 0; i < n; ++i)
    if (member[i]) result.S_hat.push_back(i);
  return result;
}

// ---------------------------------------------------------------------------
// Degree heuristic
// ---------------------------------------------------------------------------

/// The k vertices with the most +1 neighbours (diagonal excluded).
inline CliqueEstimate degree_heuristic(const SignMatrix& W, std::size_t k) {
  const std::size_t n = W.size();
  detail::require(k >= 1 && k <= n, "degree_heuristic: need 1 <= k <= n");
  std::vector<int> degree(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::int8_t* row = W.row(i);
    int d = 0;
    for (std::size_t j = 0; j < n; ++j) d += (row[j] == 1) ? 1 : 0;
    degree[i] = d - 1;
  }
  CliqueEstimate est;
  est.method = CliqueMethod::degree;
  est.S_hat = top_k(degree, k);
  return est;
}

inline CliqueEstimate degree_heuristic(const PlantedCliqueInstance& inst) {
  return degree_heuristic(inst.W, inst.k);
}

// ---------------------------------------------------------------------------
// Spectral
// ---------------------------------------------------------------------------

/// Power iteration on A = W / sqrt(n) from a fixed pseudo-random start,
/// stopping once ||A v - lambda v|| <= power_tol |lambda|.
inline SpectralDiagnostics leading_eigenvector(const SignMatrix& W, double power_tol,
                                               std::size_t max_power_iter) {
  const std::size_t n = W.size();
  detail::require(n >= 1, "leading_eigenvector: empty matrix");
  detail::require(power_tol > 0.0 && max_power_iter >= 1,
                  "leading_eigenvector: need power_tol > 0 and max_power_iter >= 1");
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  GaussianSampler start(0x5EC7A1ULL);
  Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = start();
  v.normalize();

  SpectralDiagnostics diag;
  Vector w;
  for (std::size_t it = 1; it <= max_power_iter; ++it) {
    W.multiply(v, w, scale);
    const double lambda = v.dot(w);
    const double residual = (w - lambda * v).norm();
    diag.iterations = it;
    diag.eigenvalue = lambda;
    diag.residual = residual;
    if (residual <= power_tol * std::abs(lambda)) {
      diag.eigenvector = v;
      return diag;
    }
    const double norm = w.norm();
    if (!(norm > 0.0)) break;
    v = w / norm;
  }
  diag.low_confidence = true;
  diag.eigenvector = v;
  return diag;
}

/// B = k entries of the leading eigenvector with largest |v_i|, then cleaning.
inline CliqueEstimate spectral_clique(const SignMatrix& W, std::size_t k, double power_tol = 1e-6,
                                      std::size_t max_power_iter = 300) {
  detail::require(k >= 1 && k <= W.size(), "spectral_clique: need 1 <= k <= n");
  SpectralDiagnostics diag = leading_eigenvector(W, power_tol, max_power_iter);
  CliqueEstimate est;
  est.method = CliqueMethod::spectral;
  est.candidate = top_k(diag.eigenvector.cwiseAbs(), k);
  CleaningResult cleaned = clean_candidate(W, est.candidate, k);
  est.S_hat = std::move(cleaned.S_hat);
  est.repair_steps = cleaned.repair_steps;
  est.diagnostics = std::move(diag);
  return est;
}

inline CliqueEstimate spectral_clique(const PlantedCliqueInstance& inst, double power_tol = 1e-6,
                                      std::size_t max_power_iter = 300) {
  return spectral_clique(inst.W, inst.k, power_tol, max_power_iter);
}

// ---------------------------------------------------------------------------
// State evolution and AMP
// ---------------------------------------------------------------------------

/// mu_1 = kappa, mu_{t+1} = kappa exp(mu_t^2 / 2). Stops early once the
/// sequence exceeds `cap` (diverged) or moves by less than 1e-12 (converged).
inline CliqueSETrace clique_se_trace(double kappa, std::size_t T, double cap = 30.0) {
  detail::require(kappa > 0.0 && std::isfinite(kappa), "clique_se_trace: kappa must be > 0");
  detail::require(T >= 1, "clique_se_trace: T must be >= 1");
  CliqueSETrace trace;
  double mu = kappa;
  trace.mu_tilde.push_back(mu);
  if (mu > cap) {
    trace.diverged = true;
    return trace;
  }
  for (std::size_t t = 1; t < T; ++t) {
    const double next = kappa * std::exp(0.5 * mu * mu);
    trace.mu_tilde.push_back(next);
    if (!(next <= cap)) {
      trace.diverged = true;
      return trace;
    }
    if (std::abs(next - mu) < 1e-12 * std::max(1.0, mu)) {
      trace.converged = true;
      return trace;
    }
    mu = next;
  }
  return trace;
}

struct AmpCliqueOptions {
  bool onsager = true;          // false: plain nonlinear power iteration
  double mu_cap = 3.0;          // ceiling on the applied mu_t
  double estimator_cap = 6.0;   // search range of the mu estimator
  double se_cap = 30.0;         // cap of the state-evolution schedule
};

namespace detail {

// Mean of the top fraction q of (1-q) N(0,1) + q N(mu,1).
inline double mixture_tail_mean(double mu, double q) {
  auto excess = [&](double c) { return (1.0 - q) * normal_cdf(-c) + q * normal_cdf(mu - c) - q; };
  double lo = -10.0, hi = 40.0;
  for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
    const double mid = 0.5 * (lo + hi);
    (excess(mid) > 0.0 ? lo : hi) = mid;
  }
  const double c = 0.5 * (lo + hi);
  return ((1.0 - q) * normal_pdf(c) + q * (mu * normal_cdf(mu - c) + normal_pdf(c - mu))) / q;
}

// Estimates the clique mean mu of x (noise scale 1) from the mean of its top-k
// entries, correcting for the noise coordinates that land in the top k.
inline double estimate_clique_mean(const Vector& x, std::size_t k, double cap) {
  const auto n = static_cast<std::size_t>(x.size());
  std::vector<double> v(x.data(), x.data() + n);
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n - k), v.end());
  double sum = 0.0;
  for (std::size_t i = n - k; i < n; ++i) sum += v[i];
  const double observed = sum / static_cast<double>(k);
  if (!std::isfinite(observed)) return 0.0;
  const double q = static_cast<double>(k) / static_cast<double>(n);
  if (q >= 1.0) return cap;
  if (observed <= mixture_tail_mean(0.0, q)) return 0.0;
  if (observed >= mixture_tail_mean(cap, q)) return cap;
  double lo = 0.0, hi = cap;
  for (int it = 0; it < 100 && hi - lo > 1e-10; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mixture_tail_mean(mid, q) < observed ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline double median_abs_deviation(const Vector& x) {
  std::vector<double> v(x.data(), x.data() + x.size());
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double median = v[mid];
  for (double& e : v) e = std::abs(e - median);
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  return v[mid];
}

}  // namespace detail

/// AMP with f_t(x) = exp(mu_t x - mu_t^2 / 2), x = theta / sigma_hat_t:
///   theta^(1)   = A 1
///   theta^(t+1) = A f_t(theta^(t)) - b_t f_{t-1}(theta^(t-1)),  b_t = mean f_t'(theta^(t))
/// with A = W / sqrt(n), f_0 = 1, and every f_t rescaled to unit root-mean-square.
/// sigma_hat_t is the normal-consistent MAD of theta^(t). mu_t is the
/// state-evolution value, lowered to the data estimate when the data lag
/// behind (but not below kappa) and capped at options.mu_cap. The iterate with
/// the largest estimated clique mean gives B = its top k entries, which is
/// then cleaned. Runs T - 1 updates after theta^(1).
inline CliqueEstimate amp_clique(const SignMatrix& W, std::size_t k, std::size_t T,
                                 const AmpCliqueOptions& options = {}) {
  const std::size_t n = W.size();
  detail::require(k >= 1 && k <= n, "amp_clique: need 1 <= k <= n");
  detail::require(T >= 1, "amp_clique: T must be >= 1");
  const double nd = static_cast<double>(n);
  const double scale = 1.0 / std::sqrt(nd);
  const double kappa = static_cast<double>(k) * scale;
  const CliqueSETrace schedule = clique_se_trace(kappa, T, options.se_cap);
  auto se_mu = [&](std::size_t t) {  // mu_tilde_t, t >= 1
    return t - 1 < schedule.mu_tilde.size() ? schedule.mu_tilde[t - 1] : options.se_cap;
  };

  AmpCliqueDiagnostics diag;
  Vector f_prev = Vector::Ones(static_cast<Eigen::Index>(n));
  Vector theta;
  W.multiply(f_prev, theta, scale);
  Vector best = theta;
  double best_mu = -1.0;
  Vector f(static_cast<Eigen::Index>(n));
  Vector next;

  for (std::size_t t = 1; t < T; ++t) {
    double sd = 1.4826 * detail::median_abs_deviation(theta);
    if (!(sd > 0.0)) sd = std::sqrt(theta.squaredNorm() / nd);
    if (!(sd > 0.0)) sd = 1.0;
    const Vector x = theta / sd;
    const double mu_hat =
        x.allFinite() ? detail::estimate_clique_mean(x, k, options.estimator_cap) : kappa;
    const double mu = std::min(std::min(se_mu(t), std::max(mu_hat, kappa)), options.mu_cap);
    diag.mu_hat.push_back(mu_hat);
    diag.mu_used.push_back(mu);
    if (mu_hat > best_mu) {
      best_mu = mu_hat;
      best = theta;
      diag.best_iteration = t;
    }
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      double arg = mu * x[i] - 0.5 * mu * mu;
      if (arg > 700.0) {
        arg = 700.0;
        diag.saturated = true;
      }
      f[i] = std::exp(arg);
    }
    const double rms = std::sqrt(f.squaredNorm() / nd);
    if (rms > 0.0 && std::isfinite(rms)) f /= rms;
    W.multiply(f, next, scale);
    if (options.onsager) {
      const double b = mu * f.mean() / sd;
      next -= b * f_prev;
    }
    f_prev = f;
    theta.swap(next);
  }

  CliqueEstimate est;
  est.method = CliqueMethod::amp;
  est.candidate = top_k(best, k);
  CleaningResult cleaned = clean_candidate(W, est.candidate, k);
  est.S_hat = std::move(cleaned.S_hat);
  est.repair_steps = cleaned.repair_steps;
  est.diagnostics = std::move(diag);
  return est;
}

inline CliqueEstimate amp_clique(const PlantedCliqueInstance& inst, std::size_t T,
                                 const AmpCliqueOptions& options = {}) {
  return amp_clique(inst.W, inst.k, T, options);
}

// ---------------------------------------------------------------------------
// Edge lists
// ---------------------------------------------------------------------------

/// Reads "i j" pairs (0-indexed, undirected); absent pairs are -1, the
/// diagonal is +1. '#' starts a comment; a "# vertices N" line fixes n,
/// otherwise n is the given value or, if zero, the largest index + 1.
inline SignMatrix read_edge_list(std::istream& in, std::size_t n = 0) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::size_t max_index = 0;
  bool any = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      std::istringstream comment(line.substr(hash + 1));
      std::string word;
      std::size_t declared = 0;
      if (comment >> word && word == "vertices" && comment >> declared && n == 0) n = declared;
      line.resize(hash);
    }
    std::istringstream fields(line);
    long long a = 0, b = 0;
    if (!(fields >> a)) continue;
    std::string rest;
    if (!(fields >> b) || (fields >> rest) || a < 0 || b < 0)
      throw InvalidArgument("read_edge_list: malformed line " + std::to_string(line_no));
    edges.emplace_back(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
    max_index = std::max({max_index, edges.back().first, edges.back().second});
    any = true;
  }
  if (n == 0) n = any ? max_index + 1 : 0;
  detail::require(n >= 1, "read_edge_list: graph has no vertices");
  detail::require(!any || max_index < n, "read_edge_list: vertex index " +
                                             std::to_string(max_index) + " exceeds n = " +
                                             std::to_string(n));
  SignMatrix W(n);
  for (const auto& [a, b] : edges)
    if (a != b) W.set(a, b, 1);
  return W;
}

inline SignMatrix read_edge_list(const std::string& path, std::size_t n = 0) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open edge list " + path);
  return read_edge_list(in, n);
}

inline void write_edge_list(const SignMatrix& W, std::ostream& out) {
  out << "# vertices " << W.size() << '\n';
  for (std::size_t i = 0; i < W.size(); ++i)
    for (std::size_t j = i + 1; j < W.size(); ++j)
      if (W(i, j) == 1) out << i << ' ' << j << '\n';
}

}  // namespace hdstat
