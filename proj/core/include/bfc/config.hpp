#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bfc/comb.hpp"
#include "bfc/eomod.hpp"
#include "bfc/photosim.hpp"

namespace bfc {

enum class RunMode { cw_auto, pulsed_auto, cross };

const char* to_string(RunMode mode);

struct GaussianSection {
  double sigma_p = 0.0;  // rad/s
  double sigma_r = 0.0;
  double max_sigma_fraction = 0.25;
};

enum class Sampler { thermal, density };

struct RunSection {
  double acq_s = 1e-3;
  double pair_rate = 0.0;   // s^-1
  double brightness = 0.0;  // photons per bin per coherence time (CW) or per pulse
  double car = 30.0;
  std::uint64_t seed = 1;
  Sampler sampler = Sampler::thermal;
  double half_window = 0.0;  // s, 0 picks a mode default
  double tau_half_span = 0.0;
  double tau_step = 0.0;
  unsigned workers = 1;
  bool keep_tags = false;
  bool fit = true;
  double tolerance = 2.0;  // reduced chi-square limit for compare
};

// Boundary units: GHz (ordinary frequency), ps, ns, rad.
struct ExperimentConfig {
  RunMode mode = RunMode::cw_auto;
  CombSpec comb;
  PumpSpec pump;
  std::optional<ModulationSpec> modulation;
  std::optional<GaussianSection> gaussian;
  DetectorModel detector;
  RunSection run;
  std::vector<double> phase;  // rad

  // Comb after Vernier mapping and filtering, or the parent comb.
  CombSpec effective_comb() const;
  GaussianJsaSpec gaussian_spec() const;
  void validate() const;
};

// Unknown keys, wrong types and failed invariants raise ConfigError naming the field.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string config_to_json(const ExperimentConfig& cfg);

}  // namespace bfc
