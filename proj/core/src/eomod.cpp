#include "bfc/eomod.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "bfc/errors.hpp"

namespace bfc {

namespace {

double bessel_j(int n, double m) {
  double v = std::cyl_bessel_j(static_cast<double>(std::abs(n)), m);
  return (n < 0 && (n % 2 != 0)) ? -v : v;
}

std::complex<double> i_pow(int n) {
  switch (((n % 4) + 4) % 4) {
    case 0: return {1.0, 0.0};
    case 1: return {0.0, 1.0};
    case 2: return {-1.0, 0.0};
    default: return {0.0, -1.0};
  }
}

SidebandWeights weights_until(double index, int max_order, double target) {
  SidebandWeights w;
  for (int order = max_order;; ++order) {
    w.max_order = order;
    w.weights.assign(2 * order + 1, 0.0);
    for (int n = -order; n <= order; ++n) w.weights[n + order] = bessel_j(n, index) * i_pow(n);
    if (w.captured() >= target || order > 200) return w;
  }
}

}  // namespace

void ModulationSpec::validate() const {
  if (!(std::isfinite(rf) && rf > 0.0)) throw InvalidParameter("modulation: rf must be positive");
  if (!(std::isfinite(index) && index >= 0.0))
    throw InvalidParameter("modulation: index must be >= 0");
  if (!(std::isfinite(filter_halfwidth) && filter_halfwidth >= 0.0))
    throw InvalidParameter("modulation: filter half-width must be >= 0");
}

std::complex<double> SidebandWeights::operator()(int n) const {
  if (n < -max_order || n > max_order) return 0.0;
  return weights[n + max_order];
}

double SidebandWeights::captured() const {
  double s = 0.0;
  for (const auto& w : weights) s += std::norm(w);
  return s;
}

SidebandWeights sideband_weights(double index, int max_order) {
  if (max_order < 1) throw InvalidParameter("sideband_weights: max_order must be >= 1");
  if (!(index >= 0.0)) throw InvalidParameter("sideband_weights: index must be >= 0");
  return weights_until(index, max_order, 0.999);
}

double equalizing_index(int num_bins) {
  if (num_bins < 1) throw InvalidParameter("equalizing_index: num_bins must be >= 1");
  if (num_bins == 1) return 0.0;
  if (num_bins <= 3) {
    // J0 - J1 changes sign once on [1, 2].
    double lo = 1.0, hi = 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
      double mid = 0.5 * (lo + hi);
      if (bessel_j(0, mid) - bessel_j(1, mid) > 0.0) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
  }
  // Best effort: maximise the weakest of the orders the cluster needs.
  int lo_order = -(num_bins - 1) / 2, hi_order = num_bins / 2;
  auto weakest = [&](double m) {
    double w = 1.0;
    for (int n = lo_order; n <= hi_order; ++n) w = std::min(w, std::abs(bessel_j(n, m)));
    return w;
  };
  double best = 0.0, best_w = -1.0;
  for (int i = 0; i <= 6000; ++i) {
    double m = i * 1e-3;
    double w = weakest(m);
    if (w > best_w) { best_w = w; best = m; }
  }
  std::ostringstream os;
  os << "equalizing_index: " << num_bins
     << " bins need amplitude shaping; best-effort index " << best;
  throw UnsupportedError(os.str(), best);
}

std::vector<SpectralLine> modulated_spectrum(const CombSpec& comb, const ModulationSpec& mod) {
  comb.validate();
  mod.validate();
  SidebandWeights w = weights_until(mod.index, 1, 1.0 - 1e-13);
  std::vector<SpectralLine> out;
  for (int j = 0; j < comb.dimension; ++j)
    for (int n = -w.max_order; n <= w.max_order; ++n)
      out.push_back({comb.line(j) + n * mod.rf, comb.amplitudes[j] * w(n), comb.parent_bin(j), n});
  return out;
}

double vernier_detuning(const CombSpec& comb, const ModulationSpec& mod) { return comb.fsr - mod.rf; }

double default_filter_halfwidth(int dimension, double detuning) {
  return 1.6 * dimension * std::abs(detuning) / 2.0;
}

CombSpec vernier_map(const CombSpec& comb, const ModulationSpec& mod) {
  comb.validate();
  mod.validate();
  if (comb.derived()) throw InvalidParameter("vernier_map: input comb is already rescaled");
  const double delta = vernier_detuning(comb, mod);
  if (std::abs(delta) <= 1e-9 * comb.fsr)
    throw DegenerateDetuning("vernier_map: rf equals the fsr, sidebands coincide");
  const int s = delta > 0.0 ? 1 : -1;
  const int kc = mod.center_bin;
  const int d = comb.dimension;

  struct Entry {
    int rel;
    int parent;
    std::complex<double> weight;
  };
  std::vector<Entry> lines;
  for (int j = 0; j < d; ++j) {
    int k = comb.first_bin + j;
    int n = kc - k;
    lines.push_back({s * (k - kc), k, comb.amplitudes[j] * bessel_j(n, mod.index) * i_pow(n)});
  }
  std::sort(lines.begin(), lines.end(), [](const Entry& a, const Entry& b) { return a.rel < b.rel; });

  CombSpec out;
  out.pump_center = comb.pump_center + kc * comb.fsr;  // cluster centre
  out.fsr = std::abs(delta);
  out.linewidth = comb.linewidth;
  out.first_bin = lines.front().rel;
  out.dimension = d;
  out.parent_center = comb.pump_center;
  out.parent_fsr = comb.fsr;
  double power = 0.0;
  for (const auto& e : lines) power += std::norm(e.weight);
  if (!(power > 0.0)) throw InvalidParameter("vernier_map: no parent power reaches the cluster");
  double scale = 1.0 / std::sqrt(power);
  for (const auto& e : lines) {
    out.amplitudes.push_back(e.weight * scale);
    out.parent_bins.push_back(e.parent);
  }
  out.transmission = comb.transmission * power;
  out.validate();
  return out;
}

CombSpec apply_filter(const CombSpec& rescaled, const ModulationSpec& mod) {
  rescaled.validate();
  mod.validate();
  if (!rescaled.derived()) throw InvalidParameter("apply_filter: comb has not been Vernier-mapped");
  const double w = mod.filter_halfwidth > 0.0
                       ? mod.filter_halfwidth
                       : default_filter_halfwidth(rescaled.dimension, rescaled.fsr);
  if (w >= mod.rf / 2.0)
    throw InvalidParameter("apply_filter: passband reaches the neighbouring sideband clusters");
  const double center = rescaled.pump_center;
  const double b = rescaled.linewidth / 2.0;

  int first = -1, last = -1;
  for (int j = 0; j < rescaled.dimension; ++j) {
    double off = std::abs(rescaled.line(j) - center);
    if (off > w) continue;
    double margin = w - off;
    double r = margin / b;
    double loss = (std::numbers::pi / 2.0 - std::atan(r) - r / (1.0 + r * r)) / std::numbers::pi;
    if (loss > 0.01) {
      std::ostringstream os;
      os << "apply_filter: passband edge removes " << loss * 100.0 << "% of line " << j;
      throw FilterClipping(os.str(), loss);
    }
    if (first < 0) first = j;
    last = j;
  }
  if (first < 0) throw InvalidParameter("apply_filter: no line inside the passband");

  CombSpec out = rescaled;
  out.first_bin = rescaled.first_bin + first;
  out.dimension = last - first + 1;
  out.amplitudes.assign(rescaled.amplitudes.begin() + first, rescaled.amplitudes.begin() + last + 1);
  out.parent_bins.assign(rescaled.parent_bins.begin() + first,
                         rescaled.parent_bins.begin() + last + 1);
  double power = 0.0;
  for (const auto& a : out.amplitudes) power += std::norm(a);
  if (!(power > 0.0)) throw InvalidParameter("apply_filter: retained lines carry no power");
  for (auto& a : out.amplitudes) a /= std::sqrt(power);
  out.transmission = rescaled.transmission * power;
  out.validate();
  return out;
}

}  // namespace bfc
