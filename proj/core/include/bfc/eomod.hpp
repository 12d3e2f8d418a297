#pragma once

#include <complex>
#include <vector>

#include "bfc/comb.hpp"

namespace bfc {

struct ModulationSpec {
  double rf = 0.0;               // drive Omega, rad/s
  double index = 0.0;            // m, rad
  int center_bin = 0;            // k_c
  double filter_halfwidth = 0.0; // W, rad/s; 0 selects the default for the comb

  void validate() const;
};

// Weight of sideband order n is J_n(m) i^n.
struct SidebandWeights {
  int max_order = 0;
  std::vector<std::complex<double>> weights;  // index n + max_order

  std::complex<double> operator()(int n) const;
  double captured() const;
};

SidebandWeights sideband_weights(double index, int max_order);

// Index making |J_0(m)| = |J_1(m)|; 0 for a single bin.
double equalizing_index(int num_bins);

struct SpectralLine {
  double omega = 0.0;
  std::complex<double> weight;
  int parent_bin = 0;
  int order = 0;
};

// Every sideband of every parent line (before filtering).
std::vector<SpectralLine> modulated_spectrum(const CombSpec& comb, const ModulationSpec& mod);

double vernier_detuning(const CombSpec& comb, const ModulationSpec& mod);
double default_filter_halfwidth(int dimension, double detuning);

// Lines of the cluster around bin k_c: parent k through order k_c - k. The
// returned comb has fsr |Delta omega - Omega| and is normalised; the carried
// parent power is kept in transmission.
CombSpec vernier_map(const CombSpec& comb, const ModulationSpec& mod);

// Keeps the lines inside [cluster - W, cluster + W] and renormalises.
CombSpec apply_filter(const CombSpec& rescaled, const ModulationSpec& mod);

}  // namespace bfc
