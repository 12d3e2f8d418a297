#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bfc/correlator.hpp"

namespace bfc {

struct FitResult {
  double gamma = 0.0;        // rad/s
  double delta_omega = 0.0;  // rad/s
  double residual_rms = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

struct FitOptions {
  std::optional<std::pair<double, double>> init;  // (gamma, delta_omega)
  // When either is positive the model is jitter-averaged and binned onto the
  // trace samples before comparison.
  double jitter_fwhm = 0.0;
  double bin_width = 0.0;
  int budget = 500;
  int dimension = 0;  // 0 reads meta param "d"
};

// Least squares of the CW closed form: coarse grid over (gamma, delta_omega)
// followed by Nelder-Mead in log parameters.
FitResult fit_cw_model(const CorrelationTrace& trace, const FitOptions& opt = {});

struct VisibilityResult {
  double visibility = 0.0;
  double raw_visibility = 0.0;  // (max - min) / (max + min) of the samples
  double threshold = 0.0;
  bool violates = false;
  double phase_offset = 0.0;  // rad, fitted fringe origin
};

double bell_threshold(int d);
VisibilityResult visibility_and_threshold(const std::vector<double>& phi,
                                          const std::vector<double>& value, int d);

enum class FwhmTarget { central_peak, beat_feature };

struct FwhmResult {
  double width = 0.0;     // s
  double peak_tau = 0.0;  // s
  double baseline = 0.0;
  std::string baseline_source;
};

FwhmResult measure_fwhm(const CorrelationTrace& trace, FwhmTarget which);

}  // namespace bfc
