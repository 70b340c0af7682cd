// kamor: command-line driver for orthogonal matrix retrieval experiments.
//
// Exit codes: 0 success, 1 unexpected failure, 2 invalid config or
// arguments, 3 I/O or integrity failure, 4 numerical failure (solver
// non-convergence, resolution limit, bad numerical input).

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "kamor/kamor.hpp"

namespace {

using namespace kamor;

int fail(const char* category, const std::string& msg, int code) {
  std::cerr << "error [" << category << "]: " << msg << "\n";
  return code;
}

json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError({path + ": " + e.what()});
  }
}

SdpOptions sdp_options(double tol_feas, double tol_obj, int max_iters) {
  SdpOptions o;
  o.tol_feas = tol_feas;
  o.tol_obj = tol_obj;
  o.max_iters = max_iters;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Orthogonal extension / orthogonal replacement from per-degree autocorrelations"};
  app.require_subcommand(1);

  // phantom
  auto* phantom_cmd = app.add_subcommand("phantom", "Generate a random Gaussian-blob phantom");
  int n_blobs = 6;
  double radius = 3.0, sigma_min = 0.6, sigma_max = 1.2;
  std::uint64_t seed = 0;
  std::string out_path;
  phantom_cmd->add_option("--blobs", n_blobs, "Number of blobs")->check(CLI::PositiveNumber);
  phantom_cmd->add_option("--radius", radius, "Centers lie in a ball of this radius");
  phantom_cmd->add_option("--sigma-min", sigma_min);
  phantom_cmd->add_option("--sigma-max", sigma_max);
  phantom_cmd->add_option("--seed", seed);
  phantom_cmd->add_option("--out", out_path, "Output phantom JSON")->required();

  // expand
  auto* expand_cmd = app.add_subcommand("expand", "Expand a phantom into coefficient blocks");
  std::string phantom_path;
  double k_min = 0.1, k_max = 4.0;
  int K = 16, L = -1;
  expand_cmd->add_option("--phantom", phantom_path)->required()->check(CLI::ExistingFile);
  expand_cmd->add_option("--k-min", k_min);
  expand_cmd->add_option("--k-max", k_max);
  expand_cmd->add_option("--K", K, "Number of radial shells");
  expand_cmd->add_option("--L", L, "Band limit (default ceil(k_max * extent) + 4)");
  expand_cmd->add_option("--out", out_path, "Output coefficient store")->required();

  // autocorr
  auto* autocorr_cmd = app.add_subcommand("autocorr", "Form (optionally noisy) C_l matrices");
  std::string coeffs_path;
  double noise_eps = 0.0;
  autocorr_cmd->add_option("--coeffs", coeffs_path)->required();
  autocorr_cmd->add_option("--noise-eps", noise_eps)->check(CLI::NonNegativeNumber);
  autocorr_cmd->add_option("--seed", seed);
  autocorr_cmd->add_option("--out", out_path, "Output autocorrelation store")->required();

  // oe
  auto* oe_cmd = app.add_subcommand("oe", "Orthogonal extension against a homolog");
  std::string autocorr_path, homolog_path, truth_path, report_path;
  bool weighted = false;
  oe_cmd->add_option("--autocorr", autocorr_path)->required();
  oe_cmd->add_option("--homolog", homolog_path, "Homolog coefficient store")->required();
  oe_cmd->add_flag("--weighted", weighted, "Use 2 F V U^T - B");
  oe_cmd->add_option("--truth", truth_path, "Ground truth store for error reporting");
  oe_cmd->add_option("--out", out_path, "Output coefficient store")->required();

  // or
  auto* or_cmd = app.add_subcommand("or", "Orthogonal replacement with a known difference");
  std::string autocorr1, autocorr2, delta_path, out1, out2, truth1, truth2;
  double tol_feas = 1e-8, tol_obj = 1e-8;
  int max_iters = 50000;
  or_cmd->add_option("--autocorr1", autocorr1)->required();
  or_cmd->add_option("--autocorr2", autocorr2)->required();
  or_cmd->add_option("--delta", delta_path, "Coefficients of structure2 - structure1")->required();
  or_cmd->add_option("--out1", out1)->required();
  or_cmd->add_option("--out2", out2)->required();
  or_cmd->add_option("--truth1", truth1);
  or_cmd->add_option("--truth2", truth2);
  or_cmd->add_option("--tol-feas", tol_feas);
  or_cmd->add_option("--tol-obj", tol_obj);
  or_cmd->add_option("--max-iters", max_iters);
  or_cmd->add_option("--report", report_path, "Write per-degree diagnostics as JSON");

  // fsc
  auto* fsc_cmd = app.add_subcommand("fsc", "Fourier shell correlation of two coefficient sets");
  std::string a_path, b_path;
  fsc_cmd->add_option("--a", a_path)->required();
  fsc_cmd->add_option("--b", b_path)->required();
  fsc_cmd->add_option("--out", out_path, "CSV path (stdout if omitted)");

  // export-volume
  auto* vol_cmd = app.add_subcommand("export-volume", "Synthesize a real-space float32 volume");
  int N = 32;
  vol_cmd->add_option("--coeffs", coeffs_path)->required();
  vol_cmd->add_option("--N", N, "Grid size per axis (even)");
  vol_cmd->add_option("--out", out_path, "Raw volume path; sidecar at <out>.json")->required();

  // run
  auto* run_cmd = app.add_subcommand("run", "Run a config-driven flow and write report.json");
  std::string config_path;
  run_cmd->add_option("config", config_path, "Config JSON")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*phantom_cmd) {
      save_phantom(random_phantom(n_blobs, radius, sigma_min, sigma_max, seed), out_path);
    } else if (*expand_cmd) {
      const Phantom p = load_phantom(phantom_path);
      const RadialGrid grid = RadialGrid::uniform(k_min, k_max, K);
      const int band = L >= 0 ? L : default_band_limit(p, grid);
      const PhantomExpansion ex = expand_phantom(p, grid, band);
      for (const auto& w : ex.warnings) std::cerr << "warning: " << w << "\n";
      save_coefficients(ex.coeffs, out_path);
      std::cout << "L=" << band << " K=" << K << " max parity residual "
                << ex.parity.max_residual << "\n";
    } else if (*autocorr_cmd) {
      const CoefficientSet c = load_coefficients(coeffs_path);
      save_autocorrelations(c.grid, perturb_all(autocorrelation(c), noise_eps, seed), out_path);
    } else if (*oe_cmd) {
      const AutocorrelationStore cs = load_autocorrelations(autocorr_path);
      const CoefficientSet homolog = load_coefficients(homolog_path);
      if (!(cs.grid == homolog.grid))
        throw GridMismatchError("autocorrelation and homolog grids differ");
      const ExtensionResult r = orthogonal_extension(cs.cls, homolog, weighted);
      for (int l : r.degenerate_degrees)
        std::cerr << "warning: l=" << l << " alignment is not unique\n";
      save_coefficients(r.estimate, out_path);
      if (!truth_path.empty()) {
        const auto errs = block_errors(r.estimate, load_coefficients(truth_path));
        for (std::size_t l = 0; l < errs.size(); ++l)
          std::cout << "l=" << l << " error=" << errs[l] << "\n";
      }
    } else if (*or_cmd) {
      const AutocorrelationStore c1 = load_autocorrelations(autocorr1);
      const AutocorrelationStore c2 = load_autocorrelations(autocorr2);
      const CoefficientSet delta = load_coefficients(delta_path);
      if (!(c1.grid == delta.grid) || !(c2.grid == delta.grid))
        throw GridMismatchError("autocorrelation and difference grids differ");
      const ReplacementResult r =
          or_retrieve(c1.cls, c2.cls, delta, sdp_options(tol_feas, tol_obj, max_iters));
      save_coefficients(r.A1, out1);
      save_coefficients(r.A2, out2);
      json diag = json::array();
      for (const auto& d : r.diagnostics) {
        json e = {{"l", d.l},
                  {"sdp_objective", d.sdp_objective},
                  {"feasibility_residual", d.feasibility_residual},
                  {"rank_proxy", d.rank_proxy},
                  {"difference_residual", d.difference_residual},
                  {"warnings", d.warnings}};
        if (!truth1.empty())
          e["error1"] = block_error(r.A1.blocks[d.l], load_coefficients(truth1).blocks[d.l]);
        if (!truth2.empty())
          e["error2"] = block_error(r.A2.blocks[d.l], load_coefficients(truth2).blocks[d.l]);
        diag.push_back(e);
      }
      json rep = {{"schema", kReportSchema}, {"command", "or"}, {"per_l", diag},
                  {"skipped", r.skipped}};
      if (!report_path.empty()) write_text_atomic(report_path, rep.dump(2) + "\n");
      else std::cout << rep.dump(2) << "\n";
    } else if (*fsc_cmd) {
      const FscCurve c = fsc(load_coefficients(a_path), load_coefficients(b_path));
      std::ostringstream os;
      write_fsc_csv(os, c);
      if (out_path.empty()) std::cout << os.str();
      else write_text_atomic(out_path, os.str());
    } else if (*vol_cmd) {
      save_volume(export_volume(load_coefficients(coeffs_path), N), out_path);
    } else if (*run_cmd) {
      const PipelineConfig cfg = parse_config(read_json_file(config_path));
      const PipelineResult r = run_pipeline(cfg);
      if (r.report.contains("max_error"))
        std::cout << "max per-degree error " << r.report["max_error"].get<double>() << "\n";
      std::cout << "report written to " << cfg.outputs.at("report") << "\n";
    }
  } catch (const ConfigError& e) {
    return fail("config", e.what(), 2);
  } catch (const IntegrityError& e) {
    return fail("integrity", e.what(), 3);
  } catch (const IoError& e) {
    return fail("io", e.what(), 3);
  } catch (const GridMismatchError& e) {
    return fail("grid", e.what(), 3);
  } catch (const fs::filesystem_error& e) {
    return fail("io", e.what(), 3);
  } catch (const SdpNotConvergedError& e) {
    return fail("solver", e.what(), 4);
  } catch (const ResolutionLimitError& e) {
    return fail("resolution", e.what(), 4);
  } catch (const std::invalid_argument& e) {
    return fail("input", e.what(), 4);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 1);
  }
  return 0;
}
