#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "bfc/config.hpp"
#include "bfc/correlator.hpp"
#include "bfc/fitkit.hpp"
#include "bfc/photosim.hpp"

namespace bfc {

struct RunOutput {
  std::vector<std::pair<std::string, CorrelationTrace>> traces;
  std::vector<std::pair<std::string, CoincidenceRecord>> records;
  std::vector<std::pair<std::string, std::string>> tables;  // file name, CSV text
  std::map<std::string, double> summary;
  std::map<std::string, std::string> notes;

  const CorrelationTrace& trace(const std::string& name) const;
};

// oracle adds the direct-quadrature cross-check (pulsed mode only).
RunOutput run_analytic(const ExperimentConfig& cfg, bool oracle = false);
RunOutput run_simulate(const ExperimentConfig& cfg);

// Writes <name>.csv/.meta.json per trace, record files, tables, summary.json
// and config.json into dir (created if missing).
void write_outputs(const RunOutput& out, const ExperimentConfig& cfg, const std::string& dir);

struct CompareOptions {
  double tolerance = 2.0;  // maximum reduced chi-square
  bool resample = false;   // interpolate the reference onto the estimate grid
};

struct CompareReport {
  std::size_t points = 0;
  double chi2 = 0.0;
  double reduced_chi2 = 0.0;
  double max_abs_residual = 0.0;
  bool pass = true;
  CorrelationTrace residuals;  // estimate - reference, with the error bars used
};

CompareReport run_compare(const CorrelationTrace& reference, const CorrelationTrace& estimate,
                          const CompareOptions& opt = {});
std::string compare_report_json(const CompareReport& rep);

// Exact model trace jitter-averaged and binned onto delays r * bin_width,
// |delay| <= half_span.
CorrelationTrace binned_model(const ExperimentConfig& cfg, const CorrelationTrace& fine);

// Cross-mode noise. pair_rate is per signal-idler bin pair and car is referred
// to a single pair over |tau| <= 1/gamma of its jittered trace; d bin pairs
// give d times the pairs and d times the uncorrelated singles.
struct CrossNoise {
  double pair_rate = 0.0;
  double extra_singles_rate = 0.0;
};
CrossNoise cross_noise_fixture(const CombSpec& comb, const DetectorModel& det,
                               double pair_rate_per_bin, double car);

struct FringePoint {
  double phi = 0.0;
  double counts = 0.0;    // coincidences in the zero-delay bin
  double peak_tau = 0.0;  // s, delay of the largest bin
};

// Density-sampler phase sweep; one record per phase with seed mixed by index.
// Each phase gets noise.pair_rate scaled by its trace area relative to d * 2/gamma.
std::vector<FringePoint> simulate_fringe(const CombSpec& comb, const std::vector<double>& phi,
                                         const DetectorModel& det, const CrossNoise& noise,
                                         double acq, std::uint64_t seed, double half_window,
                                         std::vector<CoincidenceRecord>* records = nullptr);

}  // namespace bfc
