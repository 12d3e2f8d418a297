#include "bfc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "bfc/errors.hpp"
#include "bfc/schmidt.hpp"
#include "bfc/trace_io.hpp"
#include "bfc/units.hpp"

namespace bfc {

using nlohmann::json;

const CorrelationTrace& RunOutput::trace(const std::string& name) const {
  for (const auto& [n, t] : traces)
    if (n == name) return t;
  throw InvalidParameter("run output has no trace '" + name + "'");
}

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

// Delay span a model trace needs so the binned trace reaches half_span.
double fine_span(const ExperimentConfig& cfg, double half_span) {
  const auto& det = cfg.detector;
  return half_span + det.bin_width + 8.0 * det.jitter_fwhm / fwhm_per_sigma + 4.0 * cfg.run.tau_step;
}

CorrelationTrace cw_model(const CombSpec& comb, const std::vector<double>& tau) {
  if (comb.equal_magnitudes(1e-9)) return g2_cw(comb, tau);
  return g2_cw_numeric(comb, tau);
}

SimOptions sim_options(const ExperimentConfig& cfg) {
  SimOptions o;
  o.half_window = cfg.run.half_window;
  o.workers = cfg.run.workers;
  o.keep_tags = cfg.run.keep_tags;
  return o;
}

JointSpectrum pulsed_jsa(const ExperimentConfig& cfg) {
  if (cfg.gaussian) return build_gaussian_jsa(cfg.gaussian_spec());
  return build_pulsed_jsa(cfg.effective_comb(), cfg.pump);
}

double peak_of(const CorrelationTrace& t) { return *std::max_element(t.value.begin(), t.value.end()); }

double value_at_zero(const CorrelationTrace& t) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < t.size(); ++i)
    if (std::abs(t.tau[i]) < std::abs(t.tau[best])) best = i;
  return t.value[best];
}

// Plain trapezoid area; estimates are noisy at the edges so no tail check.
double area(const CorrelationTrace& t) {
  double s = 0.0;
  for (std::size_t i = 1; i < t.size(); ++i)
    s += 0.5 * (t.value[i] + t.value[i - 1]) * (t.tau[i] - t.tau[i - 1]);
  return s;
}

// Largest value, ties broken toward zero delay.
double peak_delay(const CorrelationTrace& t) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (t.value[i] > t.value[best] * (1.0 + 1e-12)) best = i;
    else if (t.value[i] >= t.value[best] * (1.0 - 1e-12) && std::abs(t.tau[i]) < std::abs(t.tau[best]))
      best = i;
  }
  return t.tau[best];
}

void add_fwhm(RunOutput& out, const std::string& key, const CorrelationTrace& t) {
  try {
    out.summary[key] = to_ps(measure_fwhm(t, FwhmTarget::central_peak).width);
  } catch (const Error& e) {
    out.notes[key] = e.what();
  }
}

void add_fit(RunOutput& out, const std::string& prefix, const CorrelationTrace& t,
             const ExperimentConfig& cfg, int d) {
  FitOptions fo;
  fo.jitter_fwhm = cfg.detector.jitter_fwhm;
  fo.bin_width = cfg.detector.bin_width;
  fo.dimension = d;
  FitResult f = fit_cw_model(t, fo);
  out.summary[prefix + "gamma_ghz"] = to_ghz(f.gamma);
  // A single line has no fringe; its delta_omega is not identifiable.
  if (d > 1) {
    out.summary[prefix + "fsr_ghz"] = to_ghz(f.delta_omega);
    out.summary[prefix + "period_ps"] = to_ps(two_pi / f.delta_omega);
  }
  out.summary[prefix + "residual_rms"] = f.residual_rms;
  out.summary[prefix + "evaluations"] = f.evaluations;
}

void add_visibility(RunOutput& out, const std::string& prefix, const std::vector<double>& phi,
                    const std::vector<double>& v, int d) {
  try {
    VisibilityResult r = visibility_and_threshold(phi, v, d);
    out.summary[prefix + "visibility"] = r.visibility;
    out.summary[prefix + "raw_visibility"] = r.raw_visibility;
    out.summary[prefix + "threshold"] = r.threshold;
    out.summary[prefix + "violates"] = r.violates ? 1.0 : 0.0;
    out.summary[prefix + "phase_offset_rad"] = r.phase_offset;
  } catch (const Error& e) {
    out.notes[prefix + "visibility"] = e.what();
  }
}

std::uint64_t phase_seed(std::uint64_t seed, std::size_t i) {
  return seed ^ (0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(i) + 1));
}

void comb_summary(RunOutput& out, const CombSpec& comb) {
  out.summary["d"] = comb.dimension;
  out.summary["gamma_ghz"] = to_ghz(comb.linewidth);
  out.summary["fsr_ghz"] = to_ghz(comb.fsr);
  out.summary["transmission"] = comb.transmission;
  out.summary["fringe_period_ps"] = to_ps(two_pi / comb.fsr);
}

RunOutput analytic_cw(const ExperimentConfig& cfg) {
  RunOutput out;
  const CombSpec comb = cfg.effective_comb();
  comb_summary(out, comb);
  CorrelationTrace exact = cw_model(comb, tau_axis(cfg.run.tau_half_span, cfg.run.tau_step));
  CorrelationTrace jit = binned_model(cfg, cw_model(comb, tau_axis(fine_span(cfg, cfg.run.tau_half_span),
                                                                   cfg.run.tau_step)));
  out.summary["g2_zero"] = value_at_zero(exact);
  out.summary["g2_peak_jitter"] = peak_of(jit);
  add_fwhm(out, "fwhm_ps", exact);
  add_fwhm(out, "fwhm_jitter_ps", jit);
  if (cfg.run.fit) {
    try {
      add_fit(out, "fit_", jit, cfg, comb.dimension);
    } catch (const FitError& e) {
      out.notes["fit"] = e.what();
    }
  }
  out.traces.emplace_back("g2_exact", std::move(exact));
  out.traces.emplace_back("g2_jitter", std::move(jit));
  return out;
}

RunOutput analytic_pulsed(const ExperimentConfig& cfg, bool oracle) {
  RunOutput out;
  const CombSpec comb = cfg.effective_comb();
  comb_summary(out, comb);
  out.summary.erase("fringe_period_ps");
  JointSpectrum jsa = pulsed_jsa(cfg);
  const auto tau = tau_axis(cfg.run.tau_half_span, cfg.run.tau_step);
  CorrelationTrace exact = g2_density_numeric(jsa, tau);
  CorrelationTrace jit = binned_model(
      cfg, g2_density_numeric(jsa, tau_axis(fine_span(cfg, cfg.run.tau_half_span), cfg.run.tau_step)));

  try {
    out.summary["gbar"] = integrated_g2(exact);
  } catch (const TruncationError& e) {
    out.summary["gbar"] = area(exact);
    out.notes["gbar"] = e.what();
  }
  out.summary["gbar_jitter"] = area(jit);
  SchmidtResult sr = schmidt_number(jsa);
  out.summary["schmidt_number"] = sr.schmidt_number;
  out.summary["schmidt_number_per_bin"] = sr.schmidt_number / comb.dimension;
  out.summary["gbar_from_schmidt"] = gbar_from_k(std::max(1.0, sr.schmidt_number / comb.dimension),
                                                 comb.dimension);
  add_fwhm(out, "fwhm_ps", exact);

  std::string w = "mode,weight\n";
  for (std::size_t i = 0; i < sr.weights.size(); ++i)
    w += std::to_string(i) + "," + fmt("%.15g", sr.weights[i]) + "\n";
  out.tables.emplace_back("schmidt_weights.csv", w);

  if (cfg.gaussian) {
    GaussianJsaSpec gs = cfg.gaussian_spec();
    CorrelationTrace closed = g2_density_gaussian(gs, tau);
    double peak = peak_of(closed), worst = 0.0;
    for (std::size_t i = 0; i < tau.size(); ++i)
      worst = std::max(worst, std::abs(exact.value[i] - closed.value[i]) / peak);
    out.summary["closed_form_max_rel_diff"] = worst;
    out.summary["closed_form_zero_contrast"] =
        value_at_zero(closed) / (closed.envelope[(tau.size() - 1) / 2]);
    out.traces.emplace_back("density_closed_form", std::move(closed));
  }

  if (oracle) {
    std::vector<double> sub;
    const std::size_t stride = std::max<std::size_t>(1, tau.size() / 40);
    for (std::size_t i = (tau.size() - 1) / 2 % stride; i < tau.size(); i += stride) sub.push_back(tau[i]);
    try {
      CorrelationTrace q = g2_density_quadrature(jsa, sub);
      CorrelationTrace e = g2_density_numeric(jsa, sub);
      double peak = peak_of(e), worst = 0.0;
      for (std::size_t i = 0; i < sub.size(); ++i)
        worst = std::max(worst, std::abs(q.value[i] - e.value[i]) / peak);
      out.summary["oracle_max_rel_diff"] = worst;
      out.traces.emplace_back("density_oracle", std::move(q));
    } catch (const ResourceError& e) {
      out.notes["oracle"] = std::string("skipped: ") + e.what();
    }
  }
  out.traces.emplace_back("density_exact", std::move(exact));
  out.traces.emplace_back("density_jitter", std::move(jit));
  return out;
}

RunOutput analytic_cross(const ExperimentConfig& cfg) {
  RunOutput out;
  const CombSpec comb = cfg.effective_comb();
  comb_summary(out, comb);
  const auto tau = tau_axis(cfg.run.tau_half_span, cfg.run.tau_step);
  const auto ftau = tau_axis(fine_span(cfg, cfg.run.tau_half_span), cfg.run.tau_step);
  std::vector<double> z, zj;
  std::string table = "phi_rad,zero_exact,zero_jitter,peak_tau_ps\n";
  for (std::size_t i = 0; i < cfg.phase.size(); ++i) {
    PhasePattern p{cfg.phase[i]};
    CorrelationTrace exact = cross_correlation(comb, p, tau);
    CorrelationTrace jit = binned_model(cfg, cross_correlation(comb, p, ftau));
    z.push_back(value_at_zero(exact));
    zj.push_back(value_at_zero(jit));
    table += fmt("%.12g", p.phi) + "," + fmt("%.15g", z.back()) + "," + fmt("%.15g", zj.back()) + "," +
             fmt("%.12g", to_ps(peak_delay(exact))) + "\n";
    out.traces.emplace_back("cross_" + std::to_string(i), std::move(exact));
    out.traces.emplace_back("cross_" + std::to_string(i) + "_jitter", std::move(jit));
  }
  out.tables.emplace_back("fringe.csv", table);
  add_visibility(out, "", cfg.phase, z, comb.dimension);
  add_visibility(out, "jitter_", cfg.phase, zj, comb.dimension);
  return out;
}

void attach_compare(RunOutput& out, const CorrelationTrace& ref, const CorrelationTrace& est,
                    const ExperimentConfig& cfg) {
  CompareOptions co;
  co.tolerance = cfg.run.tolerance;
  CompareReport rep = run_compare(ref, est, co);
  out.summary["compare_reduced_chi2"] = rep.reduced_chi2;
  out.summary["compare_pass"] = rep.pass ? 1.0 : 0.0;
}

RunOutput simulate_auto(const ExperimentConfig& cfg) {
  RunOutput out;
  const CombSpec comb = cfg.effective_comb();
  comb_summary(out, comb);
  const bool pulsed = cfg.mode == RunMode::pulsed_auto;
  const SimOptions so = sim_options(cfg);
  const auto& det = cfg.detector;
  const auto ftau = tau_axis(fine_span(cfg, cfg.run.half_window), cfg.run.tau_step);

  CoincidenceRecord rec;
  CorrelationTrace fine;
  if (pulsed) {
    out.summary.erase("fringe_period_ps");
    JointSpectrum jsa = pulsed_jsa(cfg);
    rec = simulate_thermal_signal(jsa, cfg.pump, comb.dimension, cfg.run.brightness, det, cfg.run.acq_s,
                                  cfg.run.seed, so);
    fine = g2_density_numeric(jsa, ftau);
  } else {
    fine = cw_model(comb, ftau);
    if (cfg.run.sampler == Sampler::thermal) {
      rec = simulate_thermal_signal(comb, cfg.pump, cfg.run.brightness, det, cfg.run.acq_s, cfg.run.seed, so);
    } else {
      // The delay law needs the excess out to where it has decayed.
      CorrelationTrace law = cw_model(comb, tau_axis(cfg.run.half_window + 12.0 / comb.linewidth,
                                                     cfg.run.tau_step));
      rec = simulate_from_density(law, cfg.run.pair_rate, cfg.run.car, det, cfg.run.acq_s, cfg.run.seed, so);
    }
  }
  CorrelationTrace est = pulsed ? estimate_g2_density(rec) : estimate_g2_cw(rec);
  est.meta.params["d"] = comb.dimension;
  CorrelationTrace ref = binned_model(cfg, fine);

  out.summary["acq_s"] = rec.acq_time;
  out.summary["coincidences"] = static_cast<double>(rec.total());
  out.summary["singles_a"] = static_cast<double>(rec.singles_a);
  out.summary["singles_b"] = static_cast<double>(rec.singles_b);
  if (pulsed) {
    out.summary["gbar_estimate"] = area(est);
    out.summary["gbar_model_jitter"] = area(ref);
  } else {
    out.summary["g2_zero_estimate"] = value_at_zero(est);
    out.summary["g2_zero_model_jitter"] = value_at_zero(ref);
  }
  attach_compare(out, ref, est, cfg);
  if (!pulsed && cfg.run.fit) add_fit(out, "fit_", est, cfg, comb.dimension);

  out.records.emplace_back("record", std::move(rec));
  out.traces.emplace_back(pulsed ? "density_estimate" : "g2_estimate", std::move(est));
  out.traces.emplace_back(pulsed ? "density_model" : "g2_model", std::move(ref));
  return out;
}

RunOutput simulate_cross(const ExperimentConfig& cfg) {
  RunOutput out;
  const CombSpec comb = cfg.effective_comb();
  comb_summary(out, comb);
  CrossNoise noise = cross_noise_fixture(comb, cfg.detector, cfg.run.pair_rate, cfg.run.car);
  out.summary["total_pair_rate"] = noise.pair_rate;
  out.summary["extra_singles_rate"] = noise.extra_singles_rate;
  std::vector<CoincidenceRecord> recs;
  auto pts = simulate_fringe(comb, cfg.phase, cfg.detector, noise, cfg.run.acq_s, cfg.run.seed,
                             cfg.run.half_window, &recs);
  std::string table = "phi_rad,zero_bin_counts,peak_tau_ps\n";
  std::vector<double> counts;
  for (const auto& p : pts) {
    counts.push_back(p.counts);
    table += fmt("%.12g", p.phi) + "," + fmt("%.15g", p.counts) + "," + fmt("%.12g", to_ps(p.peak_tau)) + "\n";
  }
  out.tables.emplace_back("fringe.csv", table);
  add_visibility(out, "", cfg.phase, counts, comb.dimension);
  for (std::size_t i = 0; i < recs.size(); ++i)
    out.records.emplace_back("record_" + std::to_string(i), std::move(recs[i]));
  return out;
}

}  // namespace

CorrelationTrace binned_model(const ExperimentConfig& cfg, const CorrelationTrace& fine) {
  CorrelationTrace j = jitter_average(fine, cfg.detector.jitter_fwhm, cfg.detector.bin_width);
  const double lim = (std::llround(cfg.run.half_window / cfg.detector.bin_width) + 0.5) * cfg.detector.bin_width;
  CorrelationTrace out;
  out.kind = j.kind;
  out.meta = j.meta;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (std::abs(j.tau[i]) > lim) continue;
    out.tau.push_back(j.tau[i]);
    out.value.push_back(j.value[i]);
    if (!j.envelope.empty()) out.envelope.push_back(j.envelope[i]);
    if (!j.spike.empty()) out.spike.push_back(j.spike[i]);
  }
  return out;
}

RunOutput run_analytic(const ExperimentConfig& cfg, bool oracle) {
  cfg.validate();
  RunOutput out;
  switch (cfg.mode) {
    case RunMode::cw_auto: out = analytic_cw(cfg); break;
    case RunMode::pulsed_auto: out = analytic_pulsed(cfg, oracle); break;
    case RunMode::cross: out = analytic_cross(cfg); break;
  }
  if (oracle && cfg.mode != RunMode::pulsed_auto)
    out.notes["oracle"] = "direct quadrature applies to pulsed densities only";
  return out;
}

RunOutput run_simulate(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.mode == RunMode::pulsed_auto && cfg.run.sampler != Sampler::thermal)
    throw ConfigError("run.sampler: pulsed-auto simulation uses the thermal sampler");
  RunOutput out = cfg.mode == RunMode::cross ? simulate_cross(cfg) : simulate_auto(cfg);
  out.summary["seed"] = static_cast<double>(cfg.run.seed);
  return out;
}

void write_outputs(const RunOutput& out, const ExperimentConfig& cfg, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path base(dir);
  for (const auto& [name, t] : out.traces) save_trace(t, (base / name).string());
  for (const auto& [name, r] : out.records) save_record(r, (base / name).string());
  for (const auto& [name, text] : out.tables) write_file((base / name).string(), text);
  json j;
  j["summary"] = out.summary;
  j["notes"] = out.notes;
  write_file((base / "summary.json").string(), j.dump(2) + "\n");
  write_file((base / "config.json").string(), config_to_json(cfg));
}

CompareReport run_compare(const CorrelationTrace& reference, const CorrelationTrace& estimate,
                          const CompareOptions& opt) {
  reference.validate();
  estimate.validate();
  if (reference.kind != estimate.kind) throw PreconditionError("compare: traces are of different kinds");
  if (!(opt.tolerance > 0.0)) throw InvalidParameter("compare: tolerance must be positive");

  const double step = estimate.size() > 1 ? estimate.step() : 1.0;
  bool same = reference.size() == estimate.size();
  for (std::size_t i = 0; same && i < estimate.size(); ++i)
    same = std::abs(reference.tau[i] - estimate.tau[i]) <= 1e-6 * step;
  if (!same && !opt.resample)
    throw GridError("compare: delay grids differ; enable resampling to interpolate the reference");

  CompareReport rep;
  rep.residuals.kind = estimate.kind;
  rep.residuals.meta.model = "residual";
  const auto& rt = reference.tau;
  double chi2 = 0.0;
  bool have_sigma = !estimate.stderr_.empty() || (same && !reference.stderr_.empty());
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    double t = estimate.tau[i], ref;
    if (same) {
      ref = reference.value[i];
    } else {
      if (t < rt.front() - 1e-9 * step || t > rt.back() + 1e-9 * step) continue;
      auto it = std::lower_bound(rt.begin(), rt.end(), t);
      std::size_t k = static_cast<std::size_t>(it - rt.begin());
      if (k == 0) {
        ref = reference.value[0];
      } else if (k >= rt.size()) {
        ref = reference.value.back();
      } else {
        double w = (t - rt[k - 1]) / (rt[k] - rt[k - 1]);
        ref = (1.0 - w) * reference.value[k - 1] + w * reference.value[k];
      }
    }
    double r = estimate.value[i] - ref;
    double s = !estimate.stderr_.empty() ? estimate.stderr_[i] : (have_sigma ? reference.stderr_[i] : 0.0);
    rep.residuals.tau.push_back(t);
    rep.residuals.value.push_back(r);
    if (have_sigma) rep.residuals.stderr_.push_back(s);
    rep.max_abs_residual = std::max(rep.max_abs_residual, std::abs(r));
    if (r != 0.0) {
      if (!have_sigma || !(s > 0.0))
        throw PreconditionError("compare: residual without an error bar");
      chi2 += (r / s) * (r / s);
    }
    ++rep.points;
  }
  if (rep.points == 0) throw GridError("compare: the grids do not overlap");
  rep.chi2 = chi2;
  rep.reduced_chi2 = chi2 / static_cast<double>(rep.points);
  rep.pass = rep.reduced_chi2 <= opt.tolerance;
  return rep;
}

std::string compare_report_json(const CompareReport& rep) {
  json j;
  j["points"] = rep.points;
  j["chi2"] = rep.chi2;
  j["reduced_chi2"] = rep.reduced_chi2;
  j["max_abs_residual"] = rep.max_abs_residual;
  j["pass"] = rep.pass;
  return j.dump(2) + "\n";
}

CrossNoise cross_noise_fixture(const CombSpec& comb, const DetectorModel& det,
                               double pair_rate_per_bin, double car) {
  comb.validate();
  det.validate();
  CombSpec one = CombSpec::uniform(0.0, comb.fsr, comb.linewidth, 1, 1);
  const double reach = 12.0 / comb.linewidth;
  CorrelationTrace single =
      cross_correlation(one, PhasePattern{0.0}, tau_axis(reach, std::min(ps(2.0), det.bin_width / 4.0)));
  CarWindow w;
  w.peak_halfwidth = 1.0 / comb.linewidth;
  double s1 = uncorrelated_singles_for_car(pair_rate_per_bin, det.efficiency,
                                           window_pdf_mean(single, det, w), car);
  CrossNoise n;
  n.pair_rate = comb.dimension * pair_rate_per_bin;
  n.extra_singles_rate = comb.dimension * s1;
  return n;
}

std::vector<FringePoint> simulate_fringe(const CombSpec& comb, const std::vector<double>& phi,
                                         const DetectorModel& det, const CrossNoise& noise,
                                         double acq, std::uint64_t seed, double half_window,
                                         std::vector<CoincidenceRecord>* records) {
  const auto tau = tau_axis(half_window + 12.0 / comb.linewidth, std::min(ps(2.0), det.bin_width / 4.0));
  SimOptions so;
  so.half_window = half_window;
  so.extra_singles_rate = noise.extra_singles_rate;
  std::vector<FringePoint> out;
  for (std::size_t i = 0; i < phi.size(); ++i) {
    CorrelationTrace law = cross_correlation(comb, PhasePattern{phi[i]}, tau);
    // The rate keeps one absolute scale across phases: its area moves with phi
    // where neighbouring lines overlap, and averages to d pairs of area 2/gamma.
    const double rate = noise.pair_rate * area(law) / (comb.dimension * 2.0 / comb.linewidth);
    // car is unused once the uncorrelated singles are given.
    CoincidenceRecord rec = simulate_from_density(law, rate, std::numeric_limits<double>::infinity(), det,
                                                  acq, phase_seed(seed, i), so);
    FringePoint p;
    p.phi = phi[i];
    p.counts = static_cast<double>(rec.at(0));
    int best = -rec.half_bins;
    for (int r = -rec.half_bins; r <= rec.half_bins; ++r)
      if (rec.at(r) > rec.at(best) || (rec.at(r) == rec.at(best) && std::abs(r) < std::abs(best))) best = r;
    p.peak_tau = rec.delay(best);
    out.push_back(p);
    if (records) records->push_back(std::move(rec));
  }
  return out;
}

}  // namespace bfc
