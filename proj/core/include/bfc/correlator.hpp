#pragma once

#include <map>
#include <string>
#include <vector>

#include "bfc/comb.hpp"

namespace bfc {

enum class TraceKind { g2, density, rate };

const char* to_string(TraceKind kind);
TraceKind trace_kind_from_string(const std::string& s);

struct TraceMeta {
  std::string model;
  std::map<std::string, double> params;
  std::map<std::string, std::string> notes;
};

// Sampled function of delay. Optional columns are empty when absent.
struct CorrelationTrace {
  std::vector<double> tau;  // s, uniform
  std::vector<double> value;
  TraceKind kind = TraceKind::g2;
  std::vector<double> stderr_;
  std::vector<double> envelope;
  std::vector<double> spike;
  TraceMeta meta;

  std::size_t size() const { return tau.size(); }
  double step() const;
  void validate() const;
};

// Symmetric delay grid -half..half that contains 0.
std::vector<double> tau_axis(double half_span, double step);

CorrelationTrace g2_cw(const CombSpec& comb, const std::vector<double>& tau);
double g2_cw_value(double gamma, double delta_omega, int d, double tau);

// Same quantity through the numeric engine on a CW joint spectrum; accepts
// unequal bin weights.
CorrelationTrace g2_cw_numeric(const CombSpec& comb, const std::vector<double>& tau,
                               const GridOptions& opt = {});

struct DensityOptions {
  bool check_aliasing = true;
};

CorrelationTrace g2_density_numeric(const JointSpectrum& jsa, const std::vector<double>& tau,
                                    const DensityOptions& opt = {});

// Direct nested quadrature of the pulse-integrated density on the dense grid of
// the joint spectrum; O(N^3) per delay. Slow cross-check for the engine.
CorrelationTrace g2_density_quadrature(const JointSpectrum& jsa, const std::vector<double>& tau,
                                       std::size_t max_points_per_axis = 256);

// Unnormalised two-time G2(t, t + tau) on the engine's periodic time grid; tau
// is rounded to the nearest grid lag.
struct TwoTimeSlice {
  std::vector<double> t;
  std::vector<double> value;
  double tau = 0.0;
  double period = 0.0;
};
TwoTimeSlice g2_two_time(const JointSpectrum& jsa, double tau);

// Gaussian-JSA closed form. envelope = Gamma(tau), spike = |lambda(tau)|^2.
CorrelationTrace g2_density_gaussian(const GaussianJsaSpec& spec, const std::vector<double>& tau);
double gaussian_envelope(double sigma_p, double sigma_r, double tau);
double gaussian_spike(double sigma_p, double sigma_r, double tau);

double integrated_g2(const CorrelationTrace& trace);

struct PhasePattern {
  double phi = 0.0;  // rad, canonical range [-pi, pi]
};

CorrelationTrace cross_correlation(const CombSpec& comb_after_filter, PhasePattern phase,
                                   const std::vector<double>& tau, bool equalized = false);

// Maps a finely sampled trace onto detector bins: Gaussian jitter of the given
// FWHM followed by box integration over bin_width. Rows are the bins.
class BinningKernel {
 public:
  BinningKernel(const std::vector<double>& fine_tau, const std::vector<double>& centers,
                double jitter_fwhm, double bin_width);
  std::vector<double> apply(const std::vector<double>& fine_value, double baseline) const;
  const std::vector<double>& centers() const { return centers_; }

 private:
  std::vector<double> centers_;
  std::vector<std::size_t> first_;
  std::vector<std::vector<double>> weights_;
};

// Bin centres r * bin_width whose kernel support fits inside the trace.
std::vector<double> bin_centers_within(const std::vector<double>& tau, double jitter_fwhm,
                                       double bin_width);

CorrelationTrace jitter_average(const CorrelationTrace& trace, double jitter_fwhm,
                                double bin_width);

}  // namespace bfc
