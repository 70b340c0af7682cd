#pragma once

// Config-driven experiment flows shared by the CLI `run` subcommand.
//
// Config (JSON):
//   schema    "kamor.config/1" (optional)
//   command   "expand" | "autocorr" | "oe" | "or" | "fsc"
//   inputs    object, per command (see required_io below)
//   outputs   object, per command; `report` defaults to "report.json"
//   L         band limit; optional when the inputs include a phantom
//   grid      {k_min, k_max, K}
//   noise_eps relative noise injected into every C_l (default 0)
//   seed      non-negative integer; the only source of randomness
//   sdp       {tol_feas, tol_obj, max_iters} (optional)
//   weighted  bool, selects 2 F V U^T - B in `oe` (default false)
//
// Structure inputs accept a phantom description (*.json), a coefficient
// store directory, or the literal "gaussian" for i.i.d. N(0,1) blocks.
// Everything under the report's "timing" key is wall-clock dependent; the
// rest of the report is a deterministic function of the config.

#include <chrono>
#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "kamor/errors.hpp"
#include "kamor/eval.hpp"
#include "kamor/extension.hpp"
#include "kamor/io.hpp"
#include "kamor/kam.hpp"
#include "kamor/phantom.hpp"
#include "kamor/replacement.hpp"
#include "kamor/sdp.hpp"

namespace kamor {

inline constexpr const char* kConfigSchema = "kamor.config/1";
inline constexpr const char* kReportSchema = "kamor.report/1";

class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(std::vector<std::string> problems)
      : std::invalid_argument(join(problems)), problems(std::move(problems)) {}
  std::vector<std::string> problems;

 private:
  static std::string join(const std::vector<std::string>& p) {
    std::string s = "invalid config:";
    for (const auto& x : p) s += "\n  - " + x;
    return s;
  }
};

struct PipelineConfig {
  std::string command;
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;
  int L = -1;  // -1: derive from phantom inputs
  double k_min = 0.0;
  double k_max = 0.0;
  int K = 0;
  double noise_eps = 0.0;
  std::uint64_t seed = 0;
  SdpOptions sdp;
  bool weighted = false;

  RadialGrid grid() const { return RadialGrid::uniform(k_min, k_max, K); }
};

namespace detail {

struct IoSpec {
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
};

inline const std::map<std::string, IoSpec>& required_io() {
  static const std::map<std::string, IoSpec> spec = {
      {"expand", {{"phantom"}, {"coefficients"}}},
      {"autocorr", {{"coefficients"}, {"autocorrelation"}}},
      {"oe", {{"target", "homolog"}, {"estimate"}}},
      {"or", {{"structure1", "structure2"}, {"estimate1", "estimate2"}}},
      {"fsc", {{"a", "b"}, {"csv"}}},
  };
  return spec;
}

inline bool needs_grid(const std::string& command) {
  return command == "expand" || command == "oe" || command == "or";
}

}  // namespace detail

/// Validates a config document, collecting every offending field.
inline PipelineConfig parse_config(const json& j) {
  std::vector<std::string> bad;
  PipelineConfig c;
  if (!j.is_object()) throw ConfigError({"config must be a JSON object"});

  static const std::set<std::string> known = {"schema", "command",   "inputs", "outputs",
                                              "L",      "grid",      "noise_eps", "seed",
                                              "sdp",    "weighted"};
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) bad.push_back("unknown field '" + key + "'");

  if (j.contains("schema") && j["schema"] != kConfigSchema)
    bad.push_back("schema: expected \"" + std::string(kConfigSchema) + "\"");

  const auto& io = detail::required_io();
  if (!j.contains("command") || !j["command"].is_string() ||
      !io.count(j["command"].get<std::string>())) {
    bad.push_back("command: required, one of expand|autocorr|oe|or|fsc");
  } else {
    c.command = j["command"].get<std::string>();
  }

  const auto read_paths = [&](const char* field, std::map<std::string, std::string>& dst) {
    if (!j.contains(field)) return;
    if (!j[field].is_object()) {
      bad.push_back(std::string(field) + ": must be an object of strings");
      return;
    }
    for (const auto& [k, v] : j[field].items()) {
      if (!v.is_string())
        bad.push_back(std::string(field) + "." + k + ": must be a string");
      else
        dst[k] = v.get<std::string>();
    }
  };
  read_paths("inputs", c.inputs);
  read_paths("outputs", c.outputs);
  if (!c.command.empty()) {
    const auto& spec = io.at(c.command);
    for (const auto& k : spec.inputs)
      if (!c.inputs.count(k)) bad.push_back("inputs." + k + ": required for " + c.command);
    for (const auto& k : spec.outputs)
      if (!c.outputs.count(k)) bad.push_back("outputs." + k + ": required for " + c.command);
  }
  if (!c.outputs.count("report")) c.outputs["report"] = "report.json";

  if (j.contains("L")) {
    if (!j["L"].is_number_integer() || j["L"].get<int>() < 0)
      bad.push_back("L: must be a non-negative integer");
    else
      c.L = j["L"].get<int>();
  }

  if (j.contains("grid")) {
    const json& g = j["grid"];
    if (!g.is_object()) {
      bad.push_back("grid: must be an object {k_min, k_max, K}");
    } else {
      if (!g.contains("k_min") || !g["k_min"].is_number() || g["k_min"].get<double>() < 0.0)
        bad.push_back("grid.k_min: required, number >= 0");
      else
        c.k_min = g["k_min"].get<double>();
      if (!g.contains("k_max") || !g["k_max"].is_number() || !(g["k_max"].get<double>() > 0.0))
        bad.push_back("grid.k_max: required, number > 0");
      else
        c.k_max = g["k_max"].get<double>();
      if (!g.contains("K") || !g["K"].is_number_integer() || g["K"].get<int>() < 1)
        bad.push_back("grid.K: required, integer >= 1");
      else
        c.K = g["K"].get<int>();
      if (c.K > 1 && c.k_max > 0.0 && !(c.k_max > c.k_min))
        bad.push_back("grid: k_max must exceed k_min");
    }
  } else if (detail::needs_grid(c.command)) {
    bad.push_back("grid: required for " + c.command);
  }

  if (j.contains("noise_eps")) {
    if (!j["noise_eps"].is_number() || j["noise_eps"].get<double>() < 0.0)
      bad.push_back("noise_eps: must be a number >= 0");
    else
      c.noise_eps = j["noise_eps"].get<double>();
  }

  if (!j.contains("seed") || !j["seed"].is_number_integer() ||
      (j["seed"].is_number_integer() && !j["seed"].is_number_unsigned() &&
       j["seed"].get<std::int64_t>() < 0))
    bad.push_back("seed: required, non-negative integer");
  else
    c.seed = j["seed"].get<std::uint64_t>();

  if (j.contains("sdp")) {
    const json& s = j["sdp"];
    if (!s.is_object()) {
      bad.push_back("sdp: must be an object");
    } else {
      if (s.contains("tol_feas")) {
        if (!s["tol_feas"].is_number() || !(s["tol_feas"].get<double>() > 0.0))
          bad.push_back("sdp.tol_feas: must be a number > 0");
        else
          c.sdp.tol_feas = s["tol_feas"].get<double>();
      }
      if (s.contains("tol_obj")) {
        if (!s["tol_obj"].is_number() || !(s["tol_obj"].get<double>() > 0.0))
          bad.push_back("sdp.tol_obj: must be a number > 0");
        else
          c.sdp.tol_obj = s["tol_obj"].get<double>();
      }
      if (s.contains("max_iters")) {
        if (!s["max_iters"].is_number_integer() || s["max_iters"].get<int>() < 1)
          bad.push_back("sdp.max_iters: must be an integer >= 1");
        else
          c.sdp.max_iters = s["max_iters"].get<int>();
      }
    }
  }

  if (j.contains("weighted")) {
    if (!j["weighted"].is_boolean())
      bad.push_back("weighted: must be a boolean");
    else
      c.weighted = j["weighted"].get<bool>();
  }

  if (!bad.empty()) throw ConfigError(std::move(bad));
  return c;
}

/// i.i.d. standard normal blocks on `grid`.
inline CoefficientSet gaussian_coefficients(const RadialGrid& grid, int L, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  CoefficientSet c = CoefficientSet::zeros(grid, L);
  for (auto& b : c.blocks)
    for (Eigen::Index i = 0; i < b.rows(); ++i)
      for (Eigen::Index j = 0; j < b.cols(); ++j) b(i, j) = normal(rng);
  return c;
}

/// Independent sub-seeds derived from the config seed.
inline std::vector<std::uint64_t> derive_seeds(std::uint64_t seed, std::size_t count) {
  std::mt19937_64 gen(seed);
  std::vector<std::uint64_t> out(count);
  for (auto& s : out) s = gen();
  return out;
}

inline bool is_phantom_path(const std::string& s) {
  return s.size() > 5 && s.compare(s.size() - 5, 5, ".json") == 0;
}

/// Resolves a structure input to coefficients on the config grid.
inline CoefficientSet load_structure(const std::string& source, const PipelineConfig& cfg,
                                     int L, std::uint64_t gaussian_seed) {
  const RadialGrid grid = cfg.grid();
  if (source == "gaussian") return gaussian_coefficients(grid, L, gaussian_seed);
  if (is_phantom_path(source)) return phantom_to_coefficients(load_phantom(source), grid, L);
  CoefficientSet c = load_coefficients(source);
  if (!(c.grid == grid) || c.L != L)
    throw GridMismatchError(source + ": stored grid/band limit differ from the config");
  return c;
}

/// Band limit from the config, or the phantom heuristic over phantom inputs.
inline int resolve_band_limit(const PipelineConfig& cfg, const std::vector<std::string>& sources) {
  if (cfg.L >= 0) return cfg.L;
  int L = -1;
  for (const auto& s : sources)
    if (is_phantom_path(s)) L = std::max(L, default_band_limit(load_phantom(s), cfg.grid()));
  if (L < 0) throw ConfigError({"L: required unless a phantom input is given"});
  return L;
}

inline json fsc_json(const FscCurve& c) {
  json flags = json::array();
  for (bool f : c.flagged) flags.push_back(f);
  return {{"k", c.ks}, {"fsc", c.values}, {"flag", flags}, {"mean", c.mean()}};
}

inline double max_of(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, x);
  return m;
}

struct PipelineResult {
  json report;
};

/// Runs one flow and writes its outputs plus the report.
inline PipelineResult run_pipeline(const PipelineConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  json report = {{"schema", kReportSchema}, {"command", cfg.command}, {"seed", cfg.seed}};
  const auto seeds = derive_seeds(cfg.seed, 8);

  if (cfg.command == "expand") {
    const Phantom p = load_phantom(cfg.inputs.at("phantom"));
    const int L = cfg.L >= 0 ? cfg.L : default_band_limit(p, cfg.grid());
    const PhantomExpansion ex = expand_phantom(p, cfg.grid(), L);
    save_coefficients(ex.coeffs, cfg.outputs.at("coefficients"));
    report["L"] = L;
    report["K"] = cfg.K;
    report["parity_residuals"] = ex.parity.residuals;
    report["warnings"] = ex.warnings;
  } else if (cfg.command == "autocorr") {
    const CoefficientSet c = load_coefficients(cfg.inputs.at("coefficients"));
    const auto cls = perturb_all(autocorrelation(c), cfg.noise_eps, seeds[0]);
    save_autocorrelations(c.grid, cls, cfg.outputs.at("autocorrelation"));
    report["L"] = c.L;
    report["K"] = c.K();
    report["noise_eps"] = cfg.noise_eps;
  } else if (cfg.command == "oe") {
    const std::string& tsrc = cfg.inputs.at("target");
    const std::string& hsrc = cfg.inputs.at("homolog");
    const int L = resolve_band_limit(cfg, {tsrc, hsrc});
    const CoefficientSet truth = load_structure(tsrc, cfg, L, seeds[1]);
    const CoefficientSet homolog = load_structure(hsrc, cfg, L, seeds[2]);
    const auto cls = perturb_all(autocorrelation(truth), cfg.noise_eps, seeds[0]);
    const ExtensionResult r = orthogonal_extension(cls, homolog, cfg.weighted);
    save_coefficients(r.estimate, cfg.outputs.at("estimate"));
    const auto errors = block_errors(r.estimate, truth);
    json per_l = json::array();
    for (int l = 0; l <= L; ++l) {
      const bool degen = std::find(r.degenerate_degrees.begin(), r.degenerate_degrees.end(),
                                   l) != r.degenerate_degrees.end();
      per_l.push_back({{"l", l}, {"error", errors[l]}, {"degenerate", degen}});
    }
    report["L"] = L;
    report["K"] = cfg.K;
    report["weighted"] = cfg.weighted;
    report["noise_eps"] = cfg.noise_eps;
    report["per_l"] = per_l;
    report["max_error"] = max_of(errors);
    report["fsc"] = fsc_json(fsc(r.estimate, truth));
  } else if (cfg.command == "or") {
    const std::string& s1 = cfg.inputs.at("structure1");
    const std::string& s2 = cfg.inputs.at("structure2");
    const int L = resolve_band_limit(cfg, {s1, s2});
    const CoefficientSet truth1 = load_structure(s1, cfg, L, seeds[1]);
    const CoefficientSet truth2 = load_structure(s2, cfg, L, seeds[2]);
    CoefficientSet delta = truth2;
    for (int l = 0; l <= L; ++l) delta.blocks[l] -= truth1.blocks[l];
    const auto c1 = perturb_all(autocorrelation(truth1), cfg.noise_eps, seeds[3]);
    const auto c2 = perturb_all(autocorrelation(truth2), cfg.noise_eps, seeds[4]);
    const ReplacementResult r = or_retrieve(c1, c2, delta, cfg.sdp);
    save_coefficients(r.A1, cfg.outputs.at("estimate1"));
    save_coefficients(r.A2, cfg.outputs.at("estimate2"));
    json per_l = json::array();
    double max_err = 0.0;
    for (const BlockDiagnostics& d : r.diagnostics) {
      const double e1 = block_error(r.A1.blocks[d.l], truth1.blocks[d.l]);
      const double e2 = block_error(r.A2.blocks[d.l], truth2.blocks[d.l]);
      max_err = std::max({max_err, e1, e2});
      per_l.push_back({{"l", d.l},
                       {"error1", e1},
                       {"error2", e2},
                       {"sdp_objective", d.sdp_objective},
                       {"feasibility_residual", d.feasibility_residual},
                       {"rank_proxy", d.rank_proxy},
                       {"difference_residual", d.difference_residual},
                       {"difference_residual_absolute", d.difference_residual_is_absolute},
                       {"sdp_iterations", d.sdp_iterations},
                       {"warnings", d.warnings}});
    }
    report["L"] = L;
    report["K"] = cfg.K;
    report["noise_eps"] = cfg.noise_eps;
    report["per_l"] = per_l;
    report["skipped"] = r.skipped;
    report["max_error"] = max_err;
    report["fsc1"] = fsc_json(fsc(r.A1, truth1));
    report["fsc2"] = fsc_json(fsc(r.A2, truth2));
  } else if (cfg.command == "fsc") {
    const FscCurve c =
        fsc(load_coefficients(cfg.inputs.at("a")), load_coefficients(cfg.inputs.at("b")));
    std::ostringstream os;
    write_fsc_csv(os, c);
    write_text_atomic(cfg.outputs.at("csv"), os.str());
    report["fsc"] = fsc_json(c);
  } else {
    throw ConfigError({"command: unsupported '" + cfg.command + "'"});
  }

  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report["timing"] = {{"total_seconds", secs}};
  write_text_atomic(cfg.outputs.at("report"), report.dump(2) + "\n");
  return {report};
}

}  // namespace kamor
