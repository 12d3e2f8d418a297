#include "bfc/config.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>
#include <set>

#include "json.hpp"

#include "bfc/errors.hpp"
#include "bfc/trace_io.hpp"
#include "bfc/units.hpp"

namespace bfc {

using nlohmann::json;

namespace {

// Reads one JSON object, remembering which keys were consumed.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
    seen_.insert(key);
    if (!j_.contains(key)) {
      if (fallback) return *fallback;
      throw ConfigError(field(key) + ": required");
    }
    const json& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(field(key) + ": expected a number");
    double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(field(key) + ": must be finite");
    return x;
  }

  long long integer(const std::string& key, std::optional<long long> fallback = std::nullopt) {
    seen_.insert(key);
    if (!j_.contains(key)) {
      if (fallback) return *fallback;
      throw ConfigError(field(key) + ": required");
    }
    const json& v = j_.at(key);
    if (!v.is_number_integer()) throw ConfigError(field(key) + ": expected an integer");
    return v.get<long long>();
  }

  bool boolean(const std::string& key, bool fallback) {
    seen_.insert(key);
    if (!j_.contains(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError(field(key) + ": expected true or false");
    return v.get<bool>();
  }

  std::string text(const std::string& key, std::optional<std::string> fallback = std::nullopt) {
    seen_.insert(key);
    if (!j_.contains(key)) {
      if (fallback) return *fallback;
      throw ConfigError(field(key) + ": required");
    }
    const json& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(field(key) + ": expected a string");
    return v.get<std::string>();
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(field(it.key()) + ": unknown key");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

RunMode mode_from(const std::string& s) {
  if (s == "cw-auto") return RunMode::cw_auto;
  if (s == "pulsed-auto") return RunMode::pulsed_auto;
  if (s == "cross") return RunMode::cross;
  throw ConfigError("mode: expected cw-auto, pulsed-auto or cross, got '" + s + "'");
}

const char* pump_kind_name(PumpKind k) {
  switch (k) {
    case PumpKind::monochromatic: return "monochromatic";
    case PumpKind::gaussian_pulse: return "gaussian-pulse";
    case PumpKind::rectangular_pulse: return "rectangular-pulse";
  }
  return "";
}

CombSpec read_comb(Section s) {
  CombSpec c;
  c.pump_center = ghz(s.number("pump_center_ghz", 0.0));
  c.fsr = ghz(s.number("fsr_ghz"));
  c.linewidth = ghz(s.number("linewidth_ghz", 0.25));
  c.first_bin = static_cast<int>(s.integer("first_bin", 1));
  c.dimension = static_cast<int>(s.integer("dimension"));
  if (c.dimension < 1) throw ConfigError("comb.dimension: must be >= 1");
  if (s.has("amplitudes")) {
    const json& a = s.raw("amplitudes");
    if (!a.is_array() || static_cast<int>(a.size()) != c.dimension)
      throw ConfigError("comb.amplitudes: expected an array of length dimension");
    double p = 0.0;
    for (const auto& e : a) {
      cdouble v;
      if (e.is_number()) {
        v = e.get<double>();
      } else if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number()) {
        v = {e[0].get<double>(), e[1].get<double>()};
      } else {
        throw ConfigError("comb.amplitudes: entries are numbers or [re, im] pairs");
      }
      c.amplitudes.push_back(v);
      p += std::norm(v);
    }
    if (!(p > 0.0) || !std::isfinite(p)) throw ConfigError("comb.amplitudes: zero total weight");
    // Skip the division when already normalized so that a written config reads back unchanged.
    if (std::abs(p - 1.0) > 1e-12)
      for (auto& v : c.amplitudes) v /= std::sqrt(p);
  } else {
    c.amplitudes.assign(c.dimension, 1.0 / std::sqrt(static_cast<double>(c.dimension)));
  }
  s.finish();
  return c;
}

PumpSpec read_pump(Section s) {
  std::string kind = s.text("kind", "monochromatic");
  PumpSpec p;
  if (kind == "monochromatic") {
    p.kind = PumpKind::monochromatic;
  } else if (kind == "gaussian-pulse") {
    p.kind = PumpKind::gaussian_pulse;
    p.bandwidth_fwhm = ghz(s.number("bandwidth_fwhm_ghz"));
    p.repetition_period = ns(s.number("repetition_period_ns"));
  } else if (kind == "rectangular-pulse") {
    p.kind = PumpKind::rectangular_pulse;
    p.duration = ps(s.number("duration_ps"));
    p.repetition_period = ns(s.number("repetition_period_ns"));
  } else {
    throw ConfigError("pump.kind: expected monochromatic, gaussian-pulse or rectangular-pulse");
  }
  s.finish();
  return p;
}

ModulationSpec read_modulation(Section s, int bins) {
  ModulationSpec m;
  m.rf = ghz(s.number("rf_ghz"));
  // "equalize" picks the index with |J0| = |J1|.
  if (s.has("index_rad") && s.raw("index_rad").is_string()) {
    if (s.text("index_rad") != "equalize")
      throw ConfigError("modulation.index_rad: expected a number or \"equalize\"");
    m.index = equalizing_index(bins);
  } else {
    m.index = s.number("index_rad");
  }
  m.center_bin = static_cast<int>(s.integer("center_bin"));
  m.filter_halfwidth = ghz(s.number("filter_halfwidth_ghz", 0.0));
  s.finish();
  return m;
}

GaussianSection read_gaussian(Section s) {
  GaussianSection g;
  g.sigma_p = ghz(s.number("sigma_p_ghz"));
  g.sigma_r = ghz(s.number("sigma_r_ghz"));
  g.max_sigma_fraction = s.number("max_sigma_fraction", 0.25);
  s.finish();
  return g;
}

DetectorModel read_detector(Section s) {
  DetectorModel d;
  d.jitter_fwhm = ps(s.number("jitter_fwhm_ps", 0.0));
  d.bin_width = ps(s.number("bin_width_ps", 64.0));
  d.efficiency = s.number("efficiency", 1.0);
  d.accidental_rate = s.number("accidental_rate_hz", 0.0);
  s.finish();
  return d;
}

RunSection read_run(Section s) {
  RunSection r;
  r.acq_s = s.number("acq_s", r.acq_s);
  r.pair_rate = s.number("pair_rate", 0.0);
  r.brightness = s.number("brightness", 0.0);
  r.car = s.number("car", r.car);
  long long seed = s.integer("seed", 1);
  if (seed < 0) throw ConfigError("run.seed: must be >= 0");
  r.seed = static_cast<std::uint64_t>(seed);
  std::string sampler = s.text("sampler", "thermal");
  if (sampler == "thermal") r.sampler = Sampler::thermal;
  else if (sampler == "density") r.sampler = Sampler::density;
  else throw ConfigError("run.sampler: expected thermal or density");
  r.half_window = ns(s.number("half_window_ns", 0.0));
  r.tau_half_span = ns(s.number("tau_half_span_ns", 0.0));
  r.tau_step = ps(s.number("tau_step_ps", 0.0));
  long long workers = s.integer("workers", 1);
  if (workers < 1) throw ConfigError("run.workers: must be >= 1");
  r.workers = static_cast<unsigned>(workers);
  r.keep_tags = s.boolean("keep_tags", false);
  r.fit = s.boolean("fit", true);
  r.tolerance = s.number("tolerance", r.tolerance);
  s.finish();
  return r;
}

double mode_half_window(RunMode m) {
  switch (m) {
    case RunMode::cw_auto: return ns(5.0);
    case RunMode::pulsed_auto: return ns(8.0);
    case RunMode::cross: return ns(2.0);
  }
  return ns(5.0);
}

template <class F>
void rethrow_as_config(const std::string& where, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

}  // namespace

const char* to_string(RunMode mode) {
  switch (mode) {
    case RunMode::cw_auto: return "cw-auto";
    case RunMode::pulsed_auto: return "pulsed-auto";
    case RunMode::cross: return "cross";
  }
  return "";
}

CombSpec ExperimentConfig::effective_comb() const {
  if (!modulation) return comb;
  return apply_filter(vernier_map(comb, *modulation), *modulation);
}

GaussianJsaSpec ExperimentConfig::gaussian_spec() const {
  if (!gaussian) throw ConfigError("gaussian: section not present");
  GaussianJsaSpec g;
  g.sigma_p = gaussian->sigma_p;
  g.sigma_r = gaussian->sigma_r;
  g.max_sigma_fraction = gaussian->max_sigma_fraction;
  g.comb = effective_comb();
  return g;
}

void ExperimentConfig::validate() const {
  rethrow_as_config("comb", [&] { comb.validate(); });
  rethrow_as_config("pump", [&] { pump.validate(); });
  rethrow_as_config("detector", [&] { detector.validate(); });
  if (modulation) rethrow_as_config("modulation", [&] { modulation->validate(); });
  CombSpec eff;
  rethrow_as_config("modulation", [&] { eff = effective_comb(); });

  switch (mode) {
    case RunMode::cw_auto:
      if (pump.pulsed()) throw ConfigError("pump.kind: cw-auto needs a monochromatic pump");
      if (gaussian) throw ConfigError("gaussian: only used in pulsed-auto mode");
      break;
    case RunMode::pulsed_auto:
      if (!pump.pulsed()) throw ConfigError("pump.kind: pulsed-auto needs a pulsed pump");
      if (gaussian) rethrow_as_config("gaussian", [&] { gaussian_spec().validate(); });
      break;
    case RunMode::cross:
      if (phase.empty()) throw ConfigError("phase: cross mode needs at least one phase");
      if (gaussian) throw ConfigError("gaussian: only used in pulsed-auto mode");
      for (double p : phase)
        if (!(p >= -std::numbers::pi - 1e-12 && p <= std::numbers::pi + 1e-12))
          throw ConfigError("phase: values must lie in [-pi, pi]");
      if (run.sampler != Sampler::density)
        throw ConfigError("run.sampler: cross mode uses the density sampler");
      break;
  }
  if (mode != RunMode::cross && !phase.empty())
    throw ConfigError("phase: only used in cross mode");

  if (!(run.acq_s > 0.0)) throw ConfigError("run.acq_s: must be positive");
  if (run.sampler == Sampler::thermal) {
    if (!(run.brightness > 0.0)) throw ConfigError("run.brightness: thermal sampler needs brightness > 0");
    if (run.brightness > 0.1) throw ConfigError("run.brightness: must be <= 0.1 (two-pair regime)");
  } else {
    if (!(run.pair_rate > 0.0)) throw ConfigError("run.pair_rate: density sampler needs pair_rate > 0");
    if (!(run.car > 1.0)) throw ConfigError("run.car: must exceed 1");
  }
  if (run.half_window < 0.0 || run.tau_half_span < 0.0 || run.tau_step < 0.0)
    throw ConfigError("run: window and grid settings must be >= 0");
  if (!(run.tolerance > 0.0)) throw ConfigError("run.tolerance: must be positive");
  if (pump.pulsed() && run.sampler == Sampler::thermal) {
    double hw = run.half_window > 0.0 ? run.half_window : mode_half_window(mode);
    if (pump.repetition_period < 2.0 * hw)
      throw ConfigError("pump.repetition_period_ns: must be at least twice run.half_window_ns");
  }
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: not valid JSON: ") + e.what());
  }
  Section top(j, "");
  ExperimentConfig cfg;
  cfg.mode = mode_from(top.text("mode"));
  cfg.comb = read_comb(Section(top.raw("comb"), "comb"));
  if (top.has("pump")) cfg.pump = read_pump(Section(top.raw("pump"), "pump"));
  if (top.has("modulation"))
    cfg.modulation = read_modulation(Section(top.raw("modulation"), "modulation"), cfg.comb.dimension);
  if (top.has("gaussian")) cfg.gaussian = read_gaussian(Section(top.raw("gaussian"), "gaussian"));
  if (top.has("detector")) cfg.detector = read_detector(Section(top.raw("detector"), "detector"));
  if (top.has("run")) cfg.run = read_run(Section(top.raw("run"), "run"));
  if (cfg.mode == RunMode::cross) cfg.run.sampler = Sampler::density;
  if (top.has("phase")) {
    const json& p = top.raw("phase");
    if (!p.is_array()) throw ConfigError("phase: expected an array of radians");
    for (const auto& e : p) {
      if (!e.is_number()) throw ConfigError("phase: entries must be numbers");
      cfg.phase.push_back(e.get<double>());
    }
  }
  top.finish();
  if (cfg.run.half_window == 0.0) cfg.run.half_window = mode_half_window(cfg.mode);
  if (cfg.run.tau_half_span == 0.0) cfg.run.tau_half_span = cfg.run.half_window;
  if (cfg.run.tau_step == 0.0) cfg.run.tau_step = ps(2.0);
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text);
}

namespace {

// Unit conversion round trips leave a few ulps behind; 15 digits keep the text stable.
double tidy(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.15g", x);
  return std::strtod(buf, nullptr);
}

}  // namespace

std::string config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["mode"] = to_string(cfg.mode);
  json amps = json::array();
  for (const auto& a : cfg.comb.amplitudes) amps.push_back({tidy(a.real()), tidy(a.imag())});
  j["comb"] = {{"pump_center_ghz", tidy(to_ghz(cfg.comb.pump_center))},
               {"fsr_ghz", tidy(to_ghz(cfg.comb.fsr))},
               {"linewidth_ghz", tidy(to_ghz(cfg.comb.linewidth))},
               {"first_bin", cfg.comb.first_bin},
               {"dimension", cfg.comb.dimension},
               {"amplitudes", amps}};
  json pump = {{"kind", pump_kind_name(cfg.pump.kind)}};
  if (cfg.pump.kind == PumpKind::gaussian_pulse) {
    pump["bandwidth_fwhm_ghz"] = tidy(to_ghz(cfg.pump.bandwidth_fwhm));
    pump["repetition_period_ns"] = tidy(to_ns(cfg.pump.repetition_period));
  } else if (cfg.pump.kind == PumpKind::rectangular_pulse) {
    pump["duration_ps"] = tidy(to_ps(cfg.pump.duration));
    pump["repetition_period_ns"] = tidy(to_ns(cfg.pump.repetition_period));
  }
  j["pump"] = pump;
  if (cfg.modulation)
    j["modulation"] = {{"rf_ghz", tidy(to_ghz(cfg.modulation->rf))},
                       {"index_rad", cfg.modulation->index},
                       {"center_bin", cfg.modulation->center_bin},
                       {"filter_halfwidth_ghz", tidy(to_ghz(cfg.modulation->filter_halfwidth))}};
  if (cfg.gaussian)
    j["gaussian"] = {{"sigma_p_ghz", tidy(to_ghz(cfg.gaussian->sigma_p))},
                     {"sigma_r_ghz", tidy(to_ghz(cfg.gaussian->sigma_r))},
                     {"max_sigma_fraction", cfg.gaussian->max_sigma_fraction}};
  j["detector"] = {{"jitter_fwhm_ps", tidy(to_ps(cfg.detector.jitter_fwhm))},
                   {"bin_width_ps", tidy(to_ps(cfg.detector.bin_width))},
                   {"efficiency", cfg.detector.efficiency},
                   {"accidental_rate_hz", cfg.detector.accidental_rate}};
  const auto& r = cfg.run;
  j["run"] = {{"acq_s", r.acq_s},
              {"pair_rate", r.pair_rate},
              {"brightness", r.brightness},
              {"car", r.car},
              {"seed", r.seed},
              {"sampler", r.sampler == Sampler::thermal ? "thermal" : "density"},
              {"half_window_ns", tidy(to_ns(r.half_window))},
              {"tau_half_span_ns", tidy(to_ns(r.tau_half_span))},
              {"tau_step_ps", tidy(to_ps(r.tau_step))},
              {"workers", r.workers},
              {"keep_tags", r.keep_tags},
              {"fit", r.fit},
              {"tolerance", r.tolerance}};
  if (!cfg.phase.empty()) j["phase"] = cfg.phase;
  return j.dump(2) + "\n";
}

}  // namespace bfc
