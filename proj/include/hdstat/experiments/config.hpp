#pragma once

// Experiment configuration: a flat "key = value" text file with optional
// [section] blocks, overridden by command-line "key=value" pairs, validated
// against a per-experiment parameter schema.
//
//   # global keys
//   seed = 1
//   replicates = 20
//   [clique]
//   n = 8000
//   kappa = 0.4, 0.6, 0.8

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hdstat/errors.hpp"

namespace hdstat {

/// Bad configuration or command line; the CLI maps it to exit code 2.
class UsageError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

enum class ExperimentKind { denoise, bias_variance, lasso_compare, se_phase_diagram, clique_sweep };

/// Command / section name of an experiment.
inline const char* command_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::denoise: return "denoise";
    case ExperimentKind::bias_variance: return "bias-variance";
    case ExperimentKind::lasso_compare: return "lasso";
    case ExperimentKind::se_phase_diagram: return "phase-diagram";
    case ExperimentKind::clique_sweep: return "clique";
  }
  return "?";
}

inline ExperimentKind experiment_from_name(const std::string& name) {
  static const std::map<std::string, ExperimentKind> names = {
      {"denoise", ExperimentKind::denoise},
      {"bias-variance", ExperimentKind::bias_variance},
      {"bias_variance", ExperimentKind::bias_variance},
      {"lasso", ExperimentKind::lasso_compare},
      {"lasso_compare", ExperimentKind::lasso_compare},
      {"phase-diagram", ExperimentKind::se_phase_diagram},
      {"se_phase_diagram", ExperimentKind::se_phase_diagram},
      {"clique", ExperimentKind::clique_sweep},
      {"clique_sweep", ExperimentKind::clique_sweep},
  };
  const auto it = names.find(name);
  if (it == names.end()) throw UsageError("unknown experiment '" + name + "'");
  return it->second;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace detail

/// Parsed config text: section name -> key -> raw value; "" is the global section.
struct ConfigFile {
  std::map<std::string, std::map<std::string, std::string>> sections;

  static ConfigFile parse(const std::string& text, const std::string& origin = "config") {
    ConfigFile cfg;
    std::string section;
    cfg.sections[section];
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      const std::string where = origin + ":" + std::to_string(line_no);
      if (line.front() == '[') {
        if (line.back() != ']') throw UsageError(where + ": unterminated section header");
        section = detail::trim(line.substr(1, line.size() - 2));
        if (section.empty()) throw UsageError(where + ": empty section name");
        cfg.sections[section];
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw UsageError(where + ": expected 'key = value'");
      const std::string key = detail::trim(line.substr(0, eq));
      if (key.empty()) throw UsageError(where + ": empty key");
      auto& keys = cfg.sections[section];
      if (keys.count(key)) throw UsageError(where + ": duplicate key '" + key + "'");
      keys[key] = detail::trim(line.substr(eq + 1));
    }
    return cfg;
  }

  static ConfigFile load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path);
  }
};

enum class ParamType { real, count, real_list, count_list, choice, choice_list, text };

struct ParamSpec {
  std::string name;
  ParamType type;
  std::string default_value;
  double min = -INFINITY;
  double max = INFINITY;
  std::vector<std::string> choices;
  std::string help;
};

/// Parameters accepted by each experiment, with defaults and valid ranges.
inline const std::vector<ParamSpec>& parameter_schema(ExperimentKind kind) {
  using T = ParamType;
  static const std::vector<ParamSpec> denoise = {
      {"n", T::count, "1024", 2, 1e6, {}, "dimension n = p of the orthogonal design"},
      {"s0", T::count, "10", 0, 1e6, {}, "number of nonzero coefficients"},
      {"sigma", T::real, "1", 0, INFINITY, {}, "noise standard deviation"},
      {"amplitude", T::real, "10", 0, INFINITY, {}, "signal amplitude in units of the universal threshold"},
      {"lambda_factors", T::real_list, "0, 0.5, 1, 1.5, 2", 0, INFINITY, {}, "thresholds in units of the universal threshold"},
      {"rule", T::choice, "soft", 0, 0, {"soft", "hard"}, "thresholding rule"},
      {"design", T::choice, "auto", 0, 0, {"auto", "qr", "dct"}, "orthogonal design construction"},
  };
  static const std::vector<ParamSpec> bias_variance = {
      {"function", T::choice, "kink", 0, 0, {"kink", "smooth"}, "kink: |t - 1/2|; smooth: exp(t)"},
      {"sigma", T::real, "0.5", 0, INFINITY, {}, "noise standard deviation"},
      {"n_values", T::count_list, "256, 512, 1024, 2048, 4096, 8192", 2, 1e6, {}, "sample sizes"},
      {"j_max", T::count, "64", 1, 1e4, {}, "largest number of Fourier terms"},
  };
  static const std::vector<ParamSpec> lasso = {
      {"p", T::count, "2000", 2, 1e6, {}, "number of coefficients"},
      {"delta", T::real, "0.5", 1e-6, 100, {}, "undersampling ratio n / p"},
      {"eps", T::real, "0.1", 1e-9, 1 - 1e-9, {}, "sparsity fraction s0 / p"},
      {"sigma", T::real, "0.2", 0, INFINITY, {}, "noise standard deviation"},
      {"amplitude", T::real, "1", 0, INFINITY, {}, "nonzero entries are +-amplitude / sqrt(n)"},
      {"kappa", T::real, "0", 0, INFINITY, {}, "threshold multiplier; 0 selects the minimax threshold"},
      {"max_iter", T::count, "20000", 1, 1e8, {}, "iteration cap for both solvers"},
      {"target_gap", T::real, "1e-6", 0, 1, {}, "relative objective gap that counts as converged"},
      {"trace_iterations", T::count, "10", 1, 1000, {}, "iterations compared with state evolution"},
  };
  static const std::vector<ParamSpec> phase = {
      {"eps", T::real_list, "", 1e-12, 1 - 1e-12, {}, "explicit sparsity grid (overrides the range)"},
      {"eps_min", T::real, "0.001", 1e-12, 1 - 1e-12, {}, "smallest sparsity fraction"},
      {"eps_max", T::real, "0.95", 1e-12, 1 - 1e-12, {}, "largest sparsity fraction"},
      {"points", T::count, "20", 2, 1e5, {}, "grid size"},
      {"spacing", T::choice, "log", 0, 0, {"log", "linear"}, "grid spacing"},
  };
  static const std::vector<ParamSpec> clique = {
      {"n", T::count, "2000", 2, 1e5, {}, "number of vertices"},
      {"kappa", T::real_list, "0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2", 1e-6, 1e3, {}, "clique sizes k = ceil(kappa sqrt(n))"},
      {"methods", T::choice_list, "degree, spectral, amp", 0, 0, {"degree", "spectral", "amp"}, "algorithms to run"},
      {"T", T::count, "30", 1, 1e5, {}, "AMP iterations"},
      {"power_tol", T::real, "1e-6", 1e-15, 1, {}, "power-iteration residual tolerance"},
      {"max_power_iter", T::count, "300", 1, 1e7, {}, "power-iteration cap"},
      {"edges", T::text, "", 0, 0, {}, "edge-list file; when set, recover a clique of size k from it"},
      {"k", T::count, "0", 0, 1e7, {}, "clique size for an edge-list input"},
  };
  switch (kind) {
    case ExperimentKind::denoise: return denoise;
    case ExperimentKind::bias_variance: return bias_variance;
    case ExperimentKind::lasso_compare: return lasso;
    case ExperimentKind::se_phase_diagram: return phase;
    case ExperimentKind::clique_sweep: return clique;
  }
  return denoise;
}

/// Validated, typed parameter values.
class Params {
 public:
  Params() = default;
  Params(ExperimentKind kind, std::map<std::string, std::string> raw) : kind_(kind) {
    const auto& schema = parameter_schema(kind);
    for (const auto& [key, value] : raw) {
      const bool known = std::any_of(schema.begin(), schema.end(),
                                     [&](const ParamSpec& s) { return s.name == key; });
      if (!known)
        throw UsageError("unknown key '" + key + "' for experiment " + command_name(kind));
    }
    for (const auto& spec : schema) {
      const auto it = raw.find(spec.name);
      values_[spec.name] = it == raw.end() ? spec.default_value : it->second;
      check(spec, values_[spec.name]);
    }
  }

  ExperimentKind kind() const { return kind_; }
  const std::map<std::string, std::string>& raw() const { return values_; }

  double real(const std::string& key) const { return parse_real(key, at(key)); }
  std::size_t count(const std::string& key) const { return parse_count(key, at(key)); }
  const std::string& text(const std::string& key) const { return at(key); }

  std::vector<double> reals(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : detail::split_list(at(key))) out.push_back(parse_real(key, item));
    return out;
  }
  std::vector<std::size_t> counts(const std::string& key) const {
    std::vector<std::size_t> out;
    for (const auto& item : detail::split_list(at(key))) out.push_back(parse_count(key, item));
    return out;
  }
  std::vector<std::string> items(const std::string& key) const {
    return detail::split_list(at(key));
  }

 private:
  const std::string& at(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw UsageError(std::string("missing key '") + key + "'");
    return it->second;
  }

  static double parse_real(const std::string& key, const std::string& s) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
      throw UsageError("key '" + key + "': '" + s + "' is not a finite number");
    return v;
  }

  static std::size_t parse_count(const std::string& key, const std::string& s) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
      throw UsageError("key '" + key + "': '" + s + "' is not a non-negative integer");
    return static_cast<std::size_t>(v);
  }

  static void check_range(const ParamSpec& spec, double v) {
    if (v < spec.min || v > spec.max) {
      std::ostringstream msg;
      msg << "key '" << spec.name << "': value " << v << " outside [" << spec.min << ", "
          << spec.max << "]";
      throw UsageError(msg.str());
    }
  }

  static void check_choice(const ParamSpec& spec, const std::string& s) {
    if (std::find(spec.choices.begin(), spec.choices.end(), s) == spec.choices.end())
      throw UsageError("key '" + spec.name + "': '" + s + "' is not one of the allowed values");
  }

  static void check(const ParamSpec& spec, const std::string& value) {
    switch (spec.type) {
      case ParamType::real: check_range(spec, parse_real(spec.name, value)); break;
      case ParamType::count:
        check_range(spec, static_cast<double>(parse_count(spec.name, value)));
        break;
      case ParamType::real_list:
        for (const auto& item : detail::split_list(value))
          check_range(spec, parse_real(spec.name, item));
        break;
      case ParamType::count_list: {
        const auto items = detail::split_list(value);
        if (items.empty()) throw UsageError("key '" + spec.name + "': list is empty");
        for (const auto& item : items)
          check_range(spec, static_cast<double>(parse_count(spec.name, item)));
        break;
      }
      case ParamType::choice: check_choice(spec, value); break;
      case ParamType::choice_list: {
        const auto items = detail::split_list(value);
        if (items.empty()) throw UsageError("key '" + spec.name + "': list is empty");
        for (const auto& item : items) check_choice(spec, item);
        break;
      }
      case ParamType::text: break;
    }
  }

  ExperimentKind kind_ = ExperimentKind::denoise;
  std::map<std::string, std::string> values_;
};

struct RunConfig {
  ExperimentKind experiment = ExperimentKind::denoise;
  Params parameters;
  std::uint64_t base_seed = 1;
  std::size_t replicates = 1;
  std::size_t jobs = 1;
  std::string output_dir = ".";
  bool plot = true;
};

/// Explicit global settings from the command line; unset fields fall back to
/// the config file and then to defaults.
struct GlobalOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicates;
  std::optional<std::size_t> jobs;
  std::optional<std::string> output_dir;
};

/// Precedence, lowest first: schema defaults, global section of the file,
/// the experiment's section, "key=value" overrides, explicit global flags.
/// Global keys (seed, replicates, jobs, out, plot) may appear anywhere.
inline RunConfig make_run_config(ExperimentKind kind, const ConfigFile& file,
                                 const std::vector<std::string>& overrides,
                                 const GlobalOverrides& globals = {}) {
  std::map<std::string, std::string> merged;
  auto absorb = [&](const std::map<std::string, std::string>& keys) {
    for (const auto& [k, v] : keys) merged[k] = v;
  };
  if (const auto it = file.sections.find(""); it != file.sections.end()) absorb(it->second);
  if (const auto it = file.sections.find(command_name(kind)); it != file.sections.end())
    absorb(it->second);
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0)
      throw UsageError("override '" + ov + "' is not of the form key=value");
    merged[detail::trim(ov.substr(0, eq))] = detail::trim(ov.substr(eq + 1));
  }

  RunConfig cfg;
  cfg.experiment = kind;
  auto take = [&](const std::string& key) -> std::optional<std::string> {
    const auto it = merged.find(key);
    if (it == merged.end()) return std::nullopt;
    std::string v = it->second;
    merged.erase(it);
    return v;
  };
  auto as_count = [](const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc() || ptr != v.data() + v.size())
      throw UsageError("key '" + key + "': '" + v + "' is not a non-negative integer");
    return out;
  };
  if (auto v = take("experiment"); v && experiment_from_name(*v) != kind)
    throw UsageError("config names experiment '" + *v + "' but '" + command_name(kind) +
                     "' was requested");
  if (auto v = take("seed")) cfg.base_seed = as_count("seed", *v);
  if (auto v = take("replicates")) cfg.replicates = as_count("replicates", *v);
  if (auto v = take("jobs")) cfg.jobs = as_count("jobs", *v);
  if (auto v = take("out")) cfg.output_dir = *v;
  if (auto v = take("plot")) {
    if (*v != "true" && *v != "false") throw UsageError("key 'plot' must be true or false");
    cfg.plot = *v == "true";
  }
  if (globals.seed) cfg.base_seed = *globals.seed;
  if (globals.replicates) cfg.replicates = *globals.replicates;
  if (globals.jobs) cfg.jobs = *globals.jobs;
  if (globals.output_dir) cfg.output_dir = *globals.output_dir;
  if (cfg.replicates < 1) throw UsageError("key 'replicates' must be >= 1");
  if (cfg.jobs < 1) throw UsageError("key 'jobs' must be >= 1");
  cfg.parameters = Params(kind, merged);
  return cfg;
}

}  // namespace hdstat
