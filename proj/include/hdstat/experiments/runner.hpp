#pragma once

// Seeded experiment drivers behind the command-line tool. Replicate r always
// uses seed base_seed + r, whatever order the replicates run in, and results
// are aggregated by replicate index, so outputs do not depend on --jobs.
// A replicate that throws is recorded as a failure; the sweep continues.

#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "hdstat/clique.hpp"
#include "hdstat/errors.hpp"
#include "hdstat/experiments/config.hpp"
#include "hdstat/experiments/svg.hpp"
#include "hdstat/experiments/table.hpp"
#include "hdstat/lasso.hpp"
#include "hdstat/model_gen.hpp"
#include "hdstat/regression.hpp"
#include "hdstat/rng.hpp"
#include "hdstat/shrinkage.hpp"
#include "hdstat/state_evolution.hpp"

namespace hdstat {

inline constexpr const char* kVersion = "1.0.0";

/// fn(0), ..., fn(count-1) on up to `jobs` threads; results in index order.
/// The first exception (by index) is rethrown after all threads finish.
template <typename F>
auto parallel_map(std::size_t count, std::size_t jobs, F&& fn) -> std::vector<decltype(fn(std::size_t{0}))> {
  using R = decltype(fn(std::size_t{0}));
  std::vector<R> results(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        results[i] = fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min(jobs, count);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

struct NamedTable {
  std::string name;  // file stem
  ResultTable table;
  std::optional<PlotSpec> plot;
};

struct ExperimentOutput {
  std::vector<NamedTable> tables;  // tables[0] is the main result
  std::size_t failures = 0;
  nlohmann::json summary = nlohmann::json::object();

  const ResultTable& primary() const { return tables.front().table; }
};

namespace detail {

// Runs fn and returns "" on success or the exception message.
template <typename F>
std::string capture_failure(F&& fn) {
  try {
    fn();
    return "";
  } catch (const std::exception& e) {
    return e.what()[0] ? e.what() : "unknown error";
  }
}

inline double mean_or_inf(const std::vector<double>& v) {
  if (v.empty()) return INFINITY;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline std::int64_t as_int(std::size_t v) { return static_cast<std::int64_t>(v); }

// ---------------------------------------------------------------------------

inline ExperimentOutput run_denoise(const RunConfig& cfg) {
  const Params& P = cfg.parameters;
  const std::size_t n = P.count("n");
  const std::size_t s0 = P.count("s0");
  const double sigma = P.real("sigma");
  const double amplitude_factor = P.real("amplitude");
  const std::vector<double> factors = P.reals("lambda_factors");
  const bool soft = P.text("rule") == "soft";
  if (s0 > n) throw UsageError("key 's0': exceeds n");
  if (!(sigma > 0.0)) throw UsageError("key 'sigma': denoise needs sigma > 0");
  if (factors.empty()) throw UsageError("key 'lambda_factors': list is empty");
  const std::string design = P.text("design");
  const bool use_dct = design == "dct" || (design == "auto" && n > 2048);

  const DesignMatrix X = use_dct ? dct_orthogonal_design(n, stream_seed(cfg.base_seed, 0))
                                 : orthogonal_design(n, stream_seed(cfg.base_seed, 0));
  const double lambda_u = universal_threshold(sigma, n, n);
  const double amplitude = amplitude_factor * lambda_u;

  struct Rep {
    std::vector<std::array<double, 3>> risk;  // per factor: total, zero part, support part
    std::string failure;
  };
  const auto reps = parallel_map(cfg.replicates, cfg.jobs, [&](std::size_t r) {
    Rep rep;
    rep.failure = capture_failure([&] {
      const std::uint64_t seed = cfg.base_seed + r;
      const SparseSignal theta = sparse_signal(n, s0, s0 ? amplitude : 1.0, stream_seed(seed, 1));
      const ObservationVector obs = linear_observe(X, theta, sigma, stream_seed(seed, 2));
      for (double f : factors) {
        const ShrinkageRule rule{soft ? ShrinkageKind::soft : ShrinkageKind::hard, f * lambda_u};
        const Vector est = ortho_denoise(X, obs.y, rule);
        std::array<double, 3> parts{0.0, 0.0, 0.0};
        for (Eigen::Index i = 0; i < est.size(); ++i) {
          const double e2 = (est[i] - theta.values[i]) * (est[i] - theta.values[i]);
          parts[0] += e2;
          parts[theta.values[i] == 0.0 ? 1 : 2] += e2;
        }
        rep.risk.push_back(parts);
      }
    });
    return rep;
  });

  ExperimentOutput out;
  ResultTable table({{"lambda_factor", ""}, {"lambda", ""}, {"rule", ""}, {"risk", "squared error"},
                     {"risk_zero", "squared error"}, {"risk_support", "squared error"},
                     {"reference", "squared error"}, {"failures", "replicates"}});
  for (const auto& rep : reps) out.failures += rep.failure.empty() ? 0 : 1;
  const double reference = static_cast<double>(s0) * sigma * sigma * 2.0 *
                           std::log(static_cast<double>(n)) / static_cast<double>(n);
  for (std::size_t j = 0; j < factors.size(); ++j) {
    std::vector<double> total, zero, support;
    for (const auto& rep : reps) {
      if (!rep.failure.empty()) continue;
      total.push_back(rep.risk[j][0]);
      zero.push_back(rep.risk[j][1]);
      support.push_back(rep.risk[j][2]);
    }
    table.add_row({factors[j], factors[j] * lambda_u, std::string(soft ? "soft" : "hard"),
                   mean_or_inf(total), mean_or_inf(zero), mean_or_inf(support), reference,
                   as_int(out.failures)});
  }
  out.summary["universal_threshold"] = lambda_u;
  out.summary["design"] = use_dct ? "dct" : "qr";
  PlotSpec plot{"lambda_factor", {"risk", "risk_zero", "risk_support"}, false, false,
                "Thresholding risk on an orthogonal design", "threshold / universal threshold",
                "squared error", ""};
  out.tables.push_back({"denoise", std::move(table), plot});
  return out;
}

// ---------------------------------------------------------------------------

inline ExperimentOutput run_bias_variance(const RunConfig& cfg) {
  const Params& P = cfg.parameters;
  const double sigma = P.real("sigma");
  const std::vector<std::size_t> ns = P.counts("n_values");
  const std::size_t j_max = P.count("j_max");
  const bool kink = P.text("function") == "kink";
  const std::function<double(double)> f = kink ? std::function<double(double)>([](double t) { return std::abs(t - 0.5); })
                                               : std::function<double(double)>([](double t) { return std::exp(t); });

  struct Point {
    RiskCurve curve;
    std::string failure;
  };
  const auto points = parallel_map(ns.size(), cfg.jobs, [&](std::size_t i) {
    Point pt;
    pt.failure = capture_failure([&] {
      pt.curve = bias_variance_curve(f, ns[i], sigma, std::min(j_max, ns[i]), cfg.replicates,
                                     cfg.base_seed);
    });
    return pt;
  });

  ExperimentOutput out;
  ResultTable summary({{"n", ""}, {"argmin_J", ""}, {"min_risk", "squared error"},
                       {"reference", "squared error"}, {"failures", ""}});
  ResultTable curves({{"n", ""}, {"J", ""}, {"risk", "squared error"}});
  std::vector<double> log_n, log_r;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const bool failed = !points[i].failure.empty();
    out.failures += failed ? 1 : 0;
    const double reference = std::pow(sigma * sigma / static_cast<double>(ns[i]), 0.8);
    if (failed) {
      summary.add_row({as_int(ns[i]), std::int64_t{0}, INFINITY, reference, std::int64_t{1}});
      continue;
    }
    const RiskCurve& c = points[i].curve;
    summary.add_row({as_int(ns[i]), as_int(c.argmin_J), c.min_risk(), reference, std::int64_t{0}});
    for (const auto& [J, risk] : c.grid) curves.add_row({as_int(ns[i]), as_int(J), risk});
    if (c.min_risk() > 0.0) {
      log_n.push_back(std::log(static_cast<double>(ns[i])));
      log_r.push_back(std::log(c.min_risk()));
    }
  }
  if (log_n.size() >= 2) {
    const double mx = mean_or_inf(log_n), my = mean_or_inf(log_r);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < log_n.size(); ++i) {
      sxy += (log_n[i] - mx) * (log_r[i] - my);
      sxx += (log_n[i] - mx) * (log_n[i] - mx);
    }
    if (sxx > 0.0) out.summary["loglog_slope"] = sxy / sxx;
  }
  PlotSpec main_plot{"n", {"min_risk", "reference"}, true, true, "Optimal risk versus sample size",
                     "n", "risk", ""};
  PlotSpec curve_plot{"J", {"risk"}, false, true, "Risk versus number of Fourier terms", "J",
                      "risk", "n"};
  out.tables.push_back({"bias-variance", std::move(summary), main_plot});
  out.tables.push_back({"bias-variance_curves", std::move(curves), curve_plot});
  return out;
}

// ---------------------------------------------------------------------------

inline ExperimentOutput run_lasso(const RunConfig& cfg) {
  const Params& P = cfg.parameters;
  const std::size_t p = P.count("p");
  const double eps = P.real("eps");
  const double sigma = P.real("sigma");
  const double amplitude = P.real("amplitude");
  const std::size_t max_iter = P.count("max_iter");
  const double gap = P.real("target_gap");
  const std::size_t track = P.count("trace_iterations");
  const auto n = static_cast<std::size_t>(std::llround(P.real("delta") * static_cast<double>(p)));
  const auto s0 = static_cast<std::size_t>(std::llround(eps * static_cast<double>(p)));
  if (n < 1) throw UsageError("key 'delta': gives n = 0");
  if (s0 > 0 && !(amplitude > 0.0)) throw UsageError("key 'amplitude': must be > 0");
  const double kappa = P.real("kappa") > 0.0 ? P.real("kappa") : minimax_soft(eps).ell;
  const double delta = static_cast<double>(n) / static_cast<double>(p);
  const double coord_scale = 1.0 / std::sqrt(static_cast<double>(n));

  SEConfig se;
  se.delta = delta;
  se.eps = static_cast<double>(s0) / static_cast<double>(p);
  se.sigma2 = sigma * sigma;
  se.kappa = kappa;
  se.prior = ThreePointPrior{amplitude};
  std::vector<double> se_track;
  double se_final = INFINITY;
  if (se.eps > 0.0 && se.eps < 1.0) {
    se_track = se_predicted_mse(se, se_trace(se, track), coord_scale);
    const SETrace fp = se_fixed_point(se);
    if (fp.converged) se_final = se.delta * (*fp.fixed_point - se.sigma2) * coord_scale * coord_scale;
  }

  struct Rep {
    double lambda = INFINITY, amp_iter = INFINITY, ista_iter = INFINITY;
    double amp_mse = INFINITY, ista_mse = INFINITY;
    std::vector<double> track_mse;
    std::string failure;
  };
  const auto reps = parallel_map(cfg.replicates, cfg.jobs, [&](std::size_t r) {
    Rep rep;
    rep.failure = capture_failure([&] {
      const std::uint64_t seed = cfg.base_seed + r;
      const DesignMatrix X = gaussian_design(n, p, stream_seed(seed, 0));
      const SparseSignal theta =
          sparse_signal(p, s0, s0 ? amplitude * coord_scale : 1.0, stream_seed(seed, 1));
      const ObservationVector obs = linear_observe(X, theta, sigma, stream_seed(seed, 2));
      auto mse = [&](const Vector& v) {
        return (v - theta.values).squaredNorm() / static_cast<double>(p);
      };

      const IterateTrace probe = amp_lasso(LassoProblem(X, obs.y, 0.0), FixedAlpha{kappa}, max_iter, 1e-12);
      if (probe.diverged || !std::isfinite(probe.induced_lambda))
        throw NumericFailure("AMP diverged");
      rep.lambda = probe.induced_lambda;
      const LassoProblem prob(X, obs.y, rep.lambda);
      const IterateTrace amp = amp_lasso(prob, FixedAlpha{kappa}, max_iter, 1e-12);
      const double target = amp.costs.back() + gap * std::abs(amp.costs.back());
      for (std::size_t t = 0; t < amp.costs.size(); ++t)
        if (amp.costs[t] <= target) {
          rep.amp_iter = static_cast<double>(t);
          break;
        }
      IstaOptions io;
      io.stop_below = target;
      const IterateTrace ista_run = ista(prob, max_iter, 0.0, io);
      if (ista_run.costs.back() <= target) rep.ista_iter = static_cast<double>(ista_run.iterations);
      rep.amp_mse = mse(amp.final);
      rep.ista_mse = mse(ista_run.final);
      for (std::size_t t = 0; t <= track; ++t) {
        const Vector* it = amp.iterate_at(t);
        rep.track_mse.push_back(it ? mse(*it) : mse(amp.final));
      }
    });
    return rep;
  });

  ExperimentOutput out;
  ResultTable table({{"replicate", ""}, {"seed", ""}, {"lambda", ""}, {"kappa", ""},
                     {"amp_iterations", ""}, {"ista_iterations", ""}, {"amp_mse", ""},
                     {"ista_mse", ""}, {"se_mse", ""}, {"failure", ""}});
  for (std::size_t r = 0; r < reps.size(); ++r) {
    const Rep& rep = reps[r];
    out.failures += rep.failure.empty() ? 0 : 1;
    table.add_row({as_int(r), static_cast<std::int64_t>(cfg.base_seed + r), rep.lambda, kappa,
                   rep.amp_iter, rep.ista_iter, rep.amp_mse, rep.ista_mse, se_final, rep.failure});
  }
  ResultTable tracking({{"t", ""}, {"empirical_mse", ""}, {"se_mse", ""}, {"ratio", ""}});
  for (std::size_t t = 0; t <= track && t < se_track.size(); ++t) {
    std::vector<double> vals;
    for (const auto& rep : reps)
      if (rep.failure.empty()) vals.push_back(rep.track_mse[t]);
    const double emp = mean_or_inf(vals);
    const double ratio = (se_track[t] > 0.0 && std::isfinite(emp)) ? emp / se_track[t] : INFINITY;
    tracking.add_row({as_int(t), emp, se_track[t], ratio});
  }
  out.summary["n"] = n;
  out.summary["s0"] = s0;
  out.summary["kappa"] = kappa;
  PlotSpec main_plot{"replicate", {"amp_iterations", "ista_iterations"}, false, true,
                     "Iterations to the target objective gap", "replicate", "iterations", ""};
  PlotSpec track_plot{"t", {"empirical_mse", "se_mse"}, false, true,
                      "AMP mean squared error versus state evolution", "iteration", "MSE", ""};
  out.tables.push_back({"lasso", std::move(table), main_plot});
  if (!se_track.empty()) out.tables.push_back({"lasso_tracking", std::move(tracking), track_plot});
  return out;
}

// ---------------------------------------------------------------------------

inline ExperimentOutput run_phase_diagram(const RunConfig& cfg) {
  const Params& P = cfg.parameters;
  std::vector<double> grid = P.reals("eps");
  if (grid.empty()) {
    const double lo = P.real("eps_min"), hi = P.real("eps_max");
    const std::size_t points = P.count("points");
    if (!(lo < hi)) throw UsageError("key 'eps_min': must be below eps_max");
    const bool log = P.text("spacing") == "log";
    for (std::size_t i = 0; i < points; ++i) {
      const double u = static_cast<double>(i) / static_cast<double>(points - 1);
      if (i == 0) grid.push_back(lo);
      else if (i + 1 == points) grid.push_back(hi);
      else grid.push_back(log ? std::exp(std::log(lo) + u * (std::log(hi) - std::log(lo)))
                              : lo + u * (hi - lo));
    }
  }
  const auto curve = parallel_map(grid.size(), cfg.jobs, [&](std::size_t i) {
    return phase_boundary({grid[i]}).front();
  });
  ExperimentOutput out;
  ResultTable table({{"eps", ""}, {"delta_c", ""}});
  for (const auto& [eps, delta_c] : curve) table.add_row({eps, delta_c});
  PlotSpec plot{"eps", {"delta_c"}, false, false, "Phase boundary of noiseless recovery",
                "eps = s0 / p", "delta = n / p", ""};
  out.tables.push_back({"phase-diagram", std::move(table), plot});
  return out;
}

// ---------------------------------------------------------------------------

inline CliqueEstimate run_clique_method(const std::string& method, const SignMatrix& W,
                                        std::size_t k, const Params& P) {
  if (method == "degree") return degree_heuristic(W, k);
  if (method == "spectral")
    return spectral_clique(W, k, P.real("power_tol"), P.count("max_power_iter"));
  return amp_clique(W, k, P.count("T"));
}

inline std::string join_indices(const IndexSet& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? " " : "") + std::to_string(s[i]);
  return out;
}

inline ExperimentOutput run_clique(const RunConfig& cfg) {
  const Params& P = cfg.parameters;
  const std::vector<std::string> methods = P.items("methods");
  ExperimentOutput out;

  if (!P.text("edges").empty()) {
    const std::size_t k = P.count("k");
    if (k < 1) throw UsageError("key 'k': an edge-list input needs k >= 1");
    const SignMatrix W = read_edge_list(P.text("edges"));
    if (k > W.size()) throw UsageError("key 'k': exceeds the number of vertices");
    ResultTable table({{"method", ""}, {"k", ""}, {"is_clique", ""}, {"vertices", ""}});
    for (const auto& m : methods) {
      const CliqueEstimate est = run_clique_method(m, W, k, P);
      table.add_row({m, as_int(k), std::int64_t{is_clique(W, est.S_hat) ? 1 : 0},
                     join_indices(est.S_hat)});
    }
    out.tables.push_back({"clique", std::move(table), std::nullopt});
    return out;
  }

  const std::size_t n = P.count("n");
  const std::vector<double> kappas = P.reals("kappa");
  if (kappas.empty()) throw UsageError("key 'kappa': list is empty");
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  std::vector<std::size_t> ks;
  for (double kappa : kappas)
    ks.push_back(std::min<std::size_t>(n, std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(kappa * sqrt_n - 1e-9)))));

  struct Rep {
    std::vector<double> overlaps;  // per method
    std::string failure;
  };
  const std::size_t R = cfg.replicates;
  const auto reps = parallel_map(kappas.size() * R, cfg.jobs, [&](std::size_t job) {
    const std::size_t ki = job / R, r = job % R;
    Rep rep;
    rep.failure = capture_failure([&] {
      const PlantedCliqueInstance inst = planted_clique_instance(n, ks[ki], cfg.base_seed + r);
      for (const auto& m : methods)
        rep.overlaps.push_back(overlap(run_clique_method(m, inst.W, inst.k, P).S_hat, inst.S));
    });
    return rep;
  });

  ResultTable table({{"kappa", ""}, {"k", ""}, {"method", ""}, {"success_rate", ""},
                     {"mean_overlap", ""}, {"failures", ""}});
  for (std::size_t ki = 0; ki < kappas.size(); ++ki) {
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      std::vector<double> ov;
      std::size_t failed = 0, exact = 0;
      for (std::size_t r = 0; r < R; ++r) {
        const Rep& rep = reps[ki * R + r];
        if (!rep.failure.empty()) {
          ++failed;
          continue;
        }
        ov.push_back(rep.overlaps[mi]);
        exact += rep.overlaps[mi] == 1.0 ? 1 : 0;
      }
      const double rate = ov.empty() ? INFINITY : static_cast<double>(exact) / static_cast<double>(ov.size());
      table.add_row({kappas[ki], as_int(ks[ki]), methods[mi], rate, mean_or_inf(ov), as_int(failed)});
    }
  }
  for (const auto& rep : reps) out.failures += rep.failure.empty() ? 0 : 1;
  PlotSpec plot{"kappa", {"success_rate"}, false, false, "Exact recovery rate",
                "kappa = k / sqrt(n)", "fraction of exact recoveries", "method"};
  out.tables.push_back({"clique", std::move(table), plot});
  return out;
}

}  // namespace detail

/// Runs the configured experiment and returns its tables (nothing is written).
inline ExperimentOutput run_experiment_tables(const RunConfig& cfg) {
  switch (cfg.experiment) {
    case ExperimentKind::denoise: return detail::run_denoise(cfg);
    case ExperimentKind::bias_variance: return detail::run_bias_variance(cfg);
    case ExperimentKind::lasso_compare: return detail::run_lasso(cfg);
    case ExperimentKind::se_phase_diagram: return detail::run_phase_diagram(cfg);
    case ExperimentKind::clique_sweep: return detail::run_clique(cfg);
  }
  throw UsageError("unknown experiment");
}

/// Writes <stem>.csv (and <stem>.svg when plotting) for every table, plus
/// <experiment>.meta.json with the resolved configuration, version, summary
/// and wall-clock time. Returns the paths written.
inline std::vector<std::string> write_outputs(const RunConfig& cfg, const ExperimentOutput& out,
                                              double wall_clock_seconds) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec) throw IoError("cannot create output directory " + cfg.output_dir + ": " + ec.message());
  std::vector<std::string> written;
  for (const auto& nt : out.tables) {
    const std::string base = (fs::path(cfg.output_dir) / nt.name).string();
    emit_csv(nt.table, base + ".csv");
    written.push_back(base + ".csv");
    if (cfg.plot && nt.plot && !nt.table.rows.empty()) {
      emit_svg_plot(nt.table, *nt.plot, base + ".svg");
      written.push_back(base + ".svg");
    }
  }
  nlohmann::json meta;
  meta["experiment"] = command_name(cfg.experiment);
  meta["version"] = kVersion;
  meta["seed"] = cfg.base_seed;
  meta["replicates"] = cfg.replicates;
  meta["jobs"] = cfg.jobs;
  meta["parameters"] = cfg.parameters.raw();
  meta["failures"] = out.failures;
  meta["summary"] = out.summary;
  meta["wall_clock_seconds"] = wall_clock_seconds;
  nlohmann::json columns = nlohmann::json::object();
  for (const auto& nt : out.tables) {
    nlohmann::json cols = nlohmann::json::array();
    for (const auto& c : nt.table.columns) cols.push_back({{"name", c.name}, {"unit", c.unit}});
    columns[nt.name] = cols;
  }
  meta["columns"] = columns;
  const std::string path =
      (fs::path(cfg.output_dir) / (std::string(command_name(cfg.experiment)) + ".meta.json")).string();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << meta.dump(2) << '\n';
  if (!f.flush()) throw IoError("write failed for " + path);
  written.push_back(path);
  return written;
}

/// Runs the experiment, writes its files, and returns the main table.
inline ResultTable run_experiment(const RunConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentOutput out = run_experiment_tables(cfg);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_outputs(cfg, out, elapsed);
  return out.tables.front().table;
}

}  // namespace hdstat
