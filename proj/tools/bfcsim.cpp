#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "bfc/config.hpp"
#include "bfc/errors.hpp"
#include "bfc/fitkit.hpp"
#include "bfc/pipeline.hpp"
#include "bfc/schmidt.hpp"
#include "bfc/trace_io.hpp"
#include "bfc/units.hpp"

namespace {

enum Exit { ok = 0, other = 1, config = 2, nonconvergence = 3, compare_failed = 4 };

void print_summary(const bfc::RunOutput& out) {
  for (const auto& [k, v] : out.summary) std::printf("%-28s %.10g\n", k.c_str(), v);
  for (const auto& [k, v] : out.notes) std::printf("note %-23s %s\n", k.c_str(), v.c_str());
}

bfc::ExperimentConfig load(const std::string& path, std::optional<std::uint64_t> seed) {
  bfc::ExperimentConfig cfg = bfc::load_config(path);
  if (seed) cfg.run.seed = *seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bfcsim: biphoton frequency comb correlations"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out";
  std::optional<std::uint64_t> seed;
  bool oracle = false;

  auto* analytic = app.add_subcommand("analytic", "exact and jitter-averaged model traces");
  analytic->add_option("--config", config_path, "experiment config (JSON)")->required();
  analytic->add_option("--out", out_dir, "output directory");
  analytic->add_flag("--oracle", oracle, "cross-check densities against direct quadrature (slow)");

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo coincidences, estimate and fit");
  simulate->add_option("--config", config_path, "experiment config (JSON)")->required();
  simulate->add_option("--out", out_dir, "output directory");
  simulate->add_option("--seed", seed, "overrides run.seed");

  std::string trace_base;
  std::optional<int> dimension;
  auto* fit = app.add_subcommand("fit", "fit the CW model to a g2 trace");
  fit->add_option("trace", trace_base, "trace base path (reads <base>.csv and <base>.meta.json)")->required();
  fit->add_option("--config", config_path, "config supplying d and the detector");
  fit->add_option("--dimension", dimension, "number of bins d");
  fit->add_option("--out", out_dir, "output directory");

  auto* schmidt = app.add_subcommand("schmidt", "Schmidt decomposition of the configured JSA");
  schmidt->add_option("--config", config_path, "experiment config (JSON)")->required();
  schmidt->add_option("--out", out_dir, "output directory");

  std::string ref_base, est_base;
  double tolerance = -1.0;
  bool resample = false;
  auto* compare = app.add_subcommand("compare", "reduced chi-square of an estimate against a model");
  compare->add_option("reference", ref_base, "reference trace base path")->required();
  compare->add_option("estimate", est_base, "estimated trace base path")->required();
  compare->add_option("--config", config_path, "config supplying run.tolerance");
  compare->add_option("--tolerance", tolerance, "maximum reduced chi-square");
  compare->add_flag("--resample", resample, "interpolate the reference onto the estimate grid");
  compare->add_option("--out", out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? ok : config;
  }

  try {
    if (analytic->parsed()) {
      auto cfg = load(config_path, std::nullopt);
      auto out = bfc::run_analytic(cfg, oracle);
      bfc::write_outputs(out, cfg, out_dir);
      print_summary(out);
    } else if (simulate->parsed()) {
      auto cfg = load(config_path, seed);
      auto out = bfc::run_simulate(cfg);
      bfc::write_outputs(out, cfg, out_dir);
      print_summary(out);
    } else if (fit->parsed()) {
      bfc::CorrelationTrace tr = bfc::load_trace(trace_base);
      bfc::FitOptions fo;
      if (!config_path.empty()) {
        auto cfg = load(config_path, std::nullopt);
        fo.dimension = cfg.effective_comb().dimension;
        fo.jitter_fwhm = cfg.detector.jitter_fwhm;
        fo.bin_width = cfg.detector.bin_width;
      }
      if (dimension) fo.dimension = *dimension;
      bfc::FitResult r = bfc::fit_cw_model(tr, fo);
      nlohmann::json j = {{"gamma_ghz", bfc::to_ghz(r.gamma)},
                          {"fsr_ghz", bfc::to_ghz(r.delta_omega)},
                          {"period_ps", bfc::to_ps(bfc::two_pi / r.delta_omega)},
                          {"residual_rms", r.residual_rms},
                          {"iterations", r.iterations},
                          {"evaluations", r.evaluations},
                          {"converged", r.converged}};
      std::filesystem::create_directories(out_dir);
      bfc::write_file(out_dir + "/fit.json", j.dump(2) + "\n");
      std::cout << j.dump(2) << "\n";
    } else if (schmidt->parsed()) {
      auto cfg = load(config_path, std::nullopt);
      bfc::CombSpec comb = cfg.effective_comb();
      bfc::JointSpectrum js;
      if (cfg.gaussian) js = bfc::build_gaussian_jsa(cfg.gaussian_spec());
      else if (cfg.pump.pulsed()) js = bfc::build_pulsed_jsa(comb, cfg.pump);
      else js = bfc::build_cw_jsa(comb);
      bfc::SchmidtResult s = bfc::schmidt_number(js);
      nlohmann::json j = {{"schmidt_number", s.schmidt_number},
                          {"schmidt_number_per_bin", s.schmidt_number / comb.dimension},
                          {"retained", s.retained},
                          {"weights", s.weights}};
      if (s.schmidt_number / comb.dimension >= 1.0)
        j["gbar"] = bfc::gbar_from_k(s.schmidt_number / comb.dimension, comb.dimension);
      std::filesystem::create_directories(out_dir);
      bfc::write_file(out_dir + "/schmidt.json", j.dump(2) + "\n");
      std::printf("schmidt_number %.10g\n", s.schmidt_number);
    } else if (compare->parsed()) {
      bfc::CompareOptions co;
      if (!config_path.empty()) co.tolerance = load(config_path, std::nullopt).run.tolerance;
      if (tolerance > 0.0) co.tolerance = tolerance;
      co.resample = resample;
      bfc::CorrelationTrace ref = bfc::load_trace(ref_base);
      bfc::CorrelationTrace est = bfc::load_trace(est_base);
      bfc::CompareReport rep = bfc::run_compare(ref, est, co);
      std::filesystem::create_directories(out_dir);
      bfc::save_trace(rep.residuals, out_dir + "/residuals");
      bfc::write_file(out_dir + "/compare.json", bfc::compare_report_json(rep));
      std::printf("points %zu reduced_chi2 %.6g %s\n", rep.points, rep.reduced_chi2,
                  rep.pass ? "PASS" : "FAIL");
      if (!rep.pass) return compare_failed;
    }
  } catch (const bfc::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return config;
  } catch (const bfc::FitError& e) {
    std::fprintf(stderr, "fit did not converge: %s\n", e.what());
    return nonconvergence;
  } catch (const bfc::ResolutionError& e) {
    std::fprintf(stderr, "no convergence: %s\n", e.what());
    return nonconvergence;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return other;
  }
  return ok;
}
