#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace bfc {

using cdouble = std::complex<double>;

struct UniformAxis {
  double start = 0.0;
  double step = 0.0;
  std::size_t size = 0;

  double operator[](std::size_t i) const { return start + static_cast<double>(i) * step; }
  double back() const { return (*this)[size - 1]; }
};

// Comb geometry. Line j (0 <= j < dimension) is bin k = first_bin + j at
// pump_center + k * fsr. Its idler partner sits at idler_line(j).
//
// Combs produced by Vernier mapping keep the parent geometry: parent_bins[j] is
// the parent bin that feeds line j, and the idler partner is
// parent_center - parent_bins[j] * parent_fsr. For such combs first_bin may be
// zero or negative.
struct CombSpec {
  double pump_center = 0.0;
  double fsr = 0.0;
  double linewidth = 0.0;
  int first_bin = 1;
  int dimension = 1;
  std::vector<cdouble> amplitudes;

  std::vector<int> parent_bins;
  double parent_center = 0.0;
  double parent_fsr = 0.0;
  double transmission = 1.0;  // parent power carried by these lines

  static CombSpec uniform(double pump_center, double fsr, double linewidth, int first_bin,
                          int dimension);

  bool derived() const { return !parent_bins.empty(); }
  double line(int j) const { return pump_center + (first_bin + j) * fsr; }
  double idler_line(int j) const;
  int parent_bin(int j) const { return derived() ? parent_bins[j] : first_bin + j; }
  // Frequency about which signal and idler are energy-conserving pairs.
  double energy_center() const { return derived() ? parent_center : pump_center; }
  // line + idler_line - 2 * energy_center; nonzero only for sideband-shifted lines.
  double pair_shift(int j) const { return line(j) + idler_line(j) - 2.0 * energy_center(); }
  bool equal_magnitudes(double rel_tol = 1e-9) const;

  void validate() const;
};

enum class PumpKind { monochromatic, gaussian_pulse, rectangular_pulse };

struct PumpSpec {
  PumpKind kind = PumpKind::monochromatic;
  double bandwidth_fwhm = 0.0;  // FWHM of the pump power spectrum, rad/s
  double duration = 0.0;        // s, rectangular pulses
  double repetition_period = 0.0;

  static PumpSpec monochromatic();
  static PumpSpec gaussian(double bandwidth_fwhm, double repetition_period);
  static PumpSpec rectangular(double duration, double repetition_period);

  bool pulsed() const { return kind != PumpKind::monochromatic; }
  // Power-spectrum FWHM; rectangular pulses map to the transform-limited
  // Gaussian with the same FWHM as their sinc^2 spectrum.
  double effective_bandwidth() const;
  // Spectral amplitude alpha_p at detuning x from the pump carrier, peak 1.
  double amplitude(double x) const;
  void validate() const;
};

std::complex<double> lorentzian_line(double center, double gamma, double omega);

struct SampledSpectrum {
  UniformAxis axis;
  std::vector<cdouble> value;
};

// sum_k alpha_k / [(gamma/2)^2 + (omega - omega_k)^2]
cdouble cw_marginal_at(const CombSpec& comb, double omega);
SampledSpectrum build_cw_marginal(const CombSpec& comb, double samples_per_linewidth = 32.0,
                                  double extent_linewidths = 5.0);

// F_p(x) = int dw alpha_p(w) l0(w) alpha_p(x - w) l0(x - w), x measured from
// twice the pump carrier, evaluated by trapezoid quadrature.
class PumpConvolution {
 public:
  PumpConvolution(const PumpSpec& pump, double resonance_linewidth);
  cdouble operator()(double x) const;
  double quadrature_step() const { return step_; }
  double support() const { return half_width_; }

 private:
  PumpSpec pump_;
  double gamma_;
  double sigma_;
  double step_;
  double half_width_;
};

SampledSpectrum compute_fp(const PumpSpec& pump, double resonance_linewidth);

struct JsaGrid {
  UniformAxis signal;
  UniformAxis idler;
  Eigen::MatrixXcd amplitude;  // rows: signal, cols: idler

  double norm() const;
  void validate() const;
};

// A joint spectrum stored as rectangular islands on one frequency lattice.
// Idler windows of different islands never overlap; signal windows may.
struct JointSpectrum {
  std::vector<JsaGrid> islands;

  JointSpectrum() = default;
  JointSpectrum(JsaGrid grid) { islands.push_back(std::move(grid)); }

  double step() const;
  double norm() const;
  void normalize();
  void validate() const;
  // Single rectangular grid spanning every island.
  JsaGrid dense() const;
};

struct GridOptions {
  double samples_per_linewidth = 16.0;
  double extent_linewidths = 5.0;
  double max_cells = 4e7;
};

JointSpectrum build_pulsed_jsa(const CombSpec& comb, const PumpSpec& pump,
                               const GridOptions& opt = {});

// Continuous-wave pumping: each signal frequency pairs with exactly one idler,
// so every island carries amplitude only on its energy-conserving anti-diagonal.
JointSpectrum build_cw_jsa(const CombSpec& comb, const GridOptions& opt = {});

struct GaussianJsaSpec {
  double sigma_p = 0.0;
  double sigma_r = 0.0;
  CombSpec comb;
  double max_sigma_fraction = 0.25;  // of fsr

  void validate() const;
};

struct GaussianGridOptions {
  double samples_per_sigma = 8.0;
  double extent_sigmas = 4.0;
  double max_cells = 4e7;
};

JointSpectrum build_gaussian_jsa(const GaussianJsaSpec& spec, const GaussianGridOptions& opt = {});

struct JsiResult {
  Eigen::MatrixXd jsi;  // (signal bin, idler bin), model mass normalised to 1
  double car = 0.0;
  bool car_infinite = false;
};

// Integrates |psi|^2 over each bin cell. floor is added to every cell.
JsiResult jsi_and_car(const JointSpectrum& jsa, const CombSpec& comb, double floor = 0.0);
// Uniform per-cell floor that brings the JSI to the requested CAR.
double floor_for_car(const Eigen::MatrixXd& jsi, double car);

}  // namespace bfc
