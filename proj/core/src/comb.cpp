#include "bfc/comb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "bfc/errors.hpp"
#include "bfc/units.hpp"

namespace bfc {

namespace {

bool finite_positive(double x) { return std::isfinite(x) && x > 0.0; }

// Sinc^2 power spectrum of a rectangular pulse of length T has FWHM 0.8859/T (Hz).
constexpr double sinc2_fwhm_product = 0.88589294;

// Lattice point at or below x, on the lattice origin + n * h. The tolerance in
// cells covers rounding of absolute optical frequencies (~1e15 rad/s).
double snap_down(double x, double origin, double h) {
  return origin + std::floor((x - origin) / h + 1e-6) * h;
}

UniformAxis window_axis(double center, double half, double origin, double h) {
  UniformAxis ax;
  ax.step = h;
  ax.start = snap_down(center - half, origin, h);
  ax.size = static_cast<std::size_t>(std::ceil((center + half - ax.start) / h - 1e-6)) + 1;
  return ax;
}

void check_cells(const std::vector<std::pair<std::size_t, std::size_t>>& shapes, double cap,
                 double resolution, const char* what) {
  double cells = 0.0;
  for (auto [ns, ni] : shapes) cells += static_cast<double>(ns) * static_cast<double>(ni);
  if (cells > cap) {
    double suggested = resolution * std::sqrt(cap / cells);
    std::ostringstream os;
    os << what << ": " << cells << " grid cells exceed cap " << cap
       << "; try resolution " << suggested;
    throw ResourceError(os.str(), suggested);
  }
}

double idler_spacing(const CombSpec& comb) { return comb.derived() ? comb.parent_fsr : comb.fsr; }

}  // namespace

CombSpec CombSpec::uniform(double pump_center, double fsr, double linewidth, int first_bin,
                           int dimension) {
  CombSpec c;
  c.pump_center = pump_center;
  c.fsr = fsr;
  c.linewidth = linewidth;
  c.first_bin = first_bin;
  c.dimension = dimension;
  if (dimension >= 1)
    c.amplitudes.assign(dimension, cdouble(1.0 / std::sqrt(static_cast<double>(dimension)), 0.0));
  return c;
}

double CombSpec::idler_line(int j) const {
  if (derived()) return parent_center - parent_bins[j] * parent_fsr;
  return pump_center - (first_bin + j) * fsr;
}

bool CombSpec::equal_magnitudes(double rel_tol) const {
  if (amplitudes.empty()) return false;
  double ref = std::abs(amplitudes.front());
  for (const auto& a : amplitudes)
    if (std::abs(std::abs(a) - ref) > rel_tol * ref) return false;
  return true;
}

void CombSpec::validate() const {
  if (!finite_positive(fsr)) throw InvalidParameter("comb: fsr must be positive");
  if (!finite_positive(linewidth)) throw InvalidParameter("comb: linewidth must be positive");
  if (linewidth >= fsr) throw InvalidParameter("comb: linewidth must be smaller than fsr");
  if (!std::isfinite(pump_center)) throw InvalidParameter("comb: pump_center must be finite");
  if (dimension < 1) throw InvalidParameter("comb: dimension must be >= 1");
  if (!derived() && first_bin < 1) throw InvalidParameter("comb: first_bin must be >= 1");
  if (static_cast<int>(amplitudes.size()) != dimension)
    throw InvalidParameter("comb: need one amplitude per bin");
  double total = 0.0;
  for (const auto& a : amplitudes) {
    if (!std::isfinite(a.real()) || !std::isfinite(a.imag()))
      throw InvalidParameter("comb: amplitudes must be finite");
    total += std::norm(a);
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidParameter("comb: sum |alpha_k|^2 must be 1");
  if (derived()) {
    if (static_cast<int>(parent_bins.size()) != dimension)
      throw InvalidParameter("comb: parent_bins length must equal dimension");
    if (!finite_positive(parent_fsr)) throw InvalidParameter("comb: parent_fsr must be positive");
  }
}

PumpSpec PumpSpec::monochromatic() { return PumpSpec{}; }

PumpSpec PumpSpec::gaussian(double bandwidth_fwhm, double repetition_period) {
  PumpSpec p;
  p.kind = PumpKind::gaussian_pulse;
  p.bandwidth_fwhm = bandwidth_fwhm;
  p.repetition_period = repetition_period;
  return p;
}

PumpSpec PumpSpec::rectangular(double duration, double repetition_period) {
  PumpSpec p;
  p.kind = PumpKind::rectangular_pulse;
  p.duration = duration;
  p.repetition_period = repetition_period;
  return p;
}

double PumpSpec::effective_bandwidth() const {
  switch (kind) {
    case PumpKind::monochromatic:
      return 0.0;
    case PumpKind::gaussian_pulse:
      return bandwidth_fwhm;
    case PumpKind::rectangular_pulse:
      return bandwidth_fwhm > 0.0 ? bandwidth_fwhm : two_pi * sinc2_fwhm_product / duration;
  }
  return 0.0;
}

double PumpSpec::amplitude(double x) const {
  if (!pulsed()) return x == 0.0 ? 1.0 : 0.0;
  double s = effective_bandwidth() / fwhm_per_sigma;
  return std::exp(-x * x / (4.0 * s * s));
}

void PumpSpec::validate() const {
  switch (kind) {
    case PumpKind::monochromatic:
      if (bandwidth_fwhm != 0.0 || duration != 0.0)
        throw InvalidParameter("pump: monochromatic pump has no bandwidth or duration");
      return;
    case PumpKind::gaussian_pulse:
      if (!finite_positive(bandwidth_fwhm))
        throw InvalidParameter("pump: gaussian pulse needs a positive bandwidth");
      break;
    case PumpKind::rectangular_pulse:
      if (!finite_positive(duration) && !finite_positive(bandwidth_fwhm))
        throw InvalidParameter("pump: rectangular pulse needs a positive duration or bandwidth");
      break;
  }
  if (!finite_positive(repetition_period))
    throw InvalidParameter("pump: pulsed pump needs a positive repetition period");
}

cdouble lorentzian_line(double center, double gamma, double omega) {
  if (!(gamma > 0.0)) throw InvalidParameter("lorentzian_line: gamma must be positive");
  double norm = std::sqrt(gamma / two_pi);
  return norm / cdouble(gamma / 2.0, -(omega - center));
}

cdouble cw_marginal_at(const CombSpec& comb, double omega) {
  double hw2 = 0.25 * comb.linewidth * comb.linewidth;
  cdouble sum = 0.0;
  for (int j = 0; j < comb.dimension; ++j) {
    double x = omega - comb.line(j);
    sum += comb.amplitudes[j] / (hw2 + x * x);
  }
  return sum;
}

SampledSpectrum build_cw_marginal(const CombSpec& comb, double samples_per_linewidth,
                                  double extent_linewidths) {
  comb.validate();
  if (!(samples_per_linewidth >= 8.0))
    throw ResolutionError("build_cw_marginal: fewer than 8 samples per linewidth");
  double h = comb.linewidth / samples_per_linewidth;
  double lo = comb.line(0), hi = comb.line(comb.dimension - 1);
  if (lo > hi) std::swap(lo, hi);
  double margin = extent_linewidths * comb.linewidth;
  SampledSpectrum out;
  out.axis.start = lo - margin;
  out.axis.step = h;
  out.axis.size = static_cast<std::size_t>(std::ceil((hi - lo + 2.0 * margin) / h)) + 1;
  out.value.resize(out.axis.size);
  for (std::size_t i = 0; i < out.axis.size; ++i) out.value[i] = cw_marginal_at(comb, out.axis[i]);
  return out;
}

PumpConvolution::PumpConvolution(const PumpSpec& pump, double resonance_linewidth)
    : pump_(pump), gamma_(resonance_linewidth) {
  pump_.validate();
  if (!pump_.pulsed())
    throw RegimeError("pump convolution needs a pulsed pump; CW uses build_cw_marginal");
  if (!(gamma_ > 0.0)) throw InvalidParameter("pump convolution: linewidth must be positive");
  double bw = pump_.effective_bandwidth();
  sigma_ = bw / fwhm_per_sigma;
  step_ = std::min(gamma_, sigma_) / 8.0;
  half_width_ = 4.0 * (bw + 2.0 * gamma_);
}

cdouble PumpConvolution::operator()(double x) const {
  // alpha(w) alpha(x - w) is a Gaussian in u = w - x/2 with standard deviation sigma.
  int n = static_cast<int>(std::ceil(9.0 * sigma_ / step_));
  double hw = gamma_ / 2.0;
  cdouble sum = 0.0;
  for (int i = -n; i <= n; ++i) {
    double w = 0.5 * x + i * step_;
    double a = pump_.amplitude(w) * pump_.amplitude(x - w);
    if (a == 0.0) continue;
    sum += a / (cdouble(hw, -w) * cdouble(hw, -(x - w)));
  }
  return sum * step_ * (gamma_ / two_pi);
}

SampledSpectrum compute_fp(const PumpSpec& pump, double resonance_linewidth) {
  PumpConvolution fp(pump, resonance_linewidth);
  double half = fp.support();
  double step = std::max(fp.quadrature_step() / 2.0, 2.0 * half / 100000.0);
  SampledSpectrum out;
  out.axis.size = 2 * static_cast<std::size_t>(std::ceil(half / step)) + 1;
  out.axis.step = step;
  out.axis.start = -step * static_cast<double>(out.axis.size / 2);
  out.value.resize(out.axis.size);
  for (std::size_t i = 0; i < out.axis.size; ++i) out.value[i] = fp(out.axis[i]);
  return out;
}

double JsaGrid::norm() const {
  return amplitude.squaredNorm() * signal.step * idler.step;
}

void JsaGrid::validate() const {
  if (signal.size < 1 || idler.size < 1) throw InvalidParameter("jsa: empty axis");
  if (!finite_positive(signal.step) || !finite_positive(idler.step))
    throw InvalidParameter("jsa: axis steps must be positive");
  if (static_cast<std::size_t>(amplitude.rows()) != signal.size ||
      static_cast<std::size_t>(amplitude.cols()) != idler.size)
    throw InvalidParameter("jsa: amplitude shape does not match axes");
  if (!amplitude.allFinite()) throw InvalidParameter("jsa: amplitude not finite");
  if (!(norm() > 0.0)) throw InvalidParameter("jsa: zero norm");
}

double JointSpectrum::step() const {
  if (islands.empty()) throw InvalidParameter("joint spectrum: no islands");
  return islands.front().signal.step;
}

double JointSpectrum::norm() const {
  double n = 0.0;
  for (const auto& g : islands) n += g.norm();
  return n;
}

void JointSpectrum::normalize() {
  double n = norm();
  if (!(n > 0.0)) throw InvalidParameter("joint spectrum: zero norm");
  double s = 1.0 / std::sqrt(n);
  for (auto& g : islands) g.amplitude *= s;
}

void JointSpectrum::validate() const {
  if (islands.empty()) throw InvalidParameter("joint spectrum: no islands");
  double h = step();
  for (const auto& g : islands) {
    if (g.signal.size < 1 || g.idler.size < 1 || !finite_positive(g.signal.step) ||
        static_cast<std::size_t>(g.amplitude.rows()) != g.signal.size ||
        static_cast<std::size_t>(g.amplitude.cols()) != g.idler.size)
      throw InvalidParameter("joint spectrum: malformed island");
    if (!g.amplitude.allFinite()) throw InvalidParameter("joint spectrum: amplitude not finite");
    if (std::abs(g.signal.step - h) > 1e-9 * h || std::abs(g.idler.step - h) > 1e-9 * h)
      throw InvalidParameter("joint spectrum: islands must share one frequency step");
  }
  std::vector<std::pair<double, double>> spans;
  for (const auto& g : islands) spans.emplace_back(g.idler.start, g.idler.back());
  std::sort(spans.begin(), spans.end());
  for (std::size_t i = 1; i < spans.size(); ++i)
    if (spans[i].first <= spans[i - 1].second + 0.5 * h)
      throw InvalidParameter("joint spectrum: idler windows overlap");
  if (!(norm() > 0.0)) throw InvalidParameter("joint spectrum: zero norm");
}

JsaGrid JointSpectrum::dense() const {
  validate();
  double h = step();
  double s0 = islands.front().signal.start, s1 = islands.front().signal.back();
  double i0 = islands.front().idler.start, i1 = islands.front().idler.back();
  for (const auto& g : islands) {
    s0 = std::min(s0, g.signal.start);
    s1 = std::max(s1, g.signal.back());
    i0 = std::min(i0, g.idler.start);
    i1 = std::max(i1, g.idler.back());
  }
  JsaGrid out;
  out.signal = {s0, h, static_cast<std::size_t>(std::llround((s1 - s0) / h)) + 1};
  out.idler = {i0, h, static_cast<std::size_t>(std::llround((i1 - i0) / h)) + 1};
  out.amplitude = Eigen::MatrixXcd::Zero(out.signal.size, out.idler.size);
  for (const auto& g : islands) {
    auto r = std::llround((g.signal.start - s0) / h);
    auto c = std::llround((g.idler.start - i0) / h);
    out.amplitude.block(r, c, g.amplitude.rows(), g.amplitude.cols()) += g.amplitude;
  }
  return out;
}

JointSpectrum build_pulsed_jsa(const CombSpec& comb, const PumpSpec& pump, const GridOptions& opt) {
  comb.validate();
  pump.validate();
  if (!pump.pulsed()) throw RegimeError("build_pulsed_jsa: pump must be pulsed");
  if (pump.effective_bandwidth() >= comb.fsr / 2.0)
    throw RegimeError("build_pulsed_jsa: pump bandwidth must be well below the fsr");
  if (!(opt.samples_per_linewidth >= 2.0))
    throw ResolutionError("build_pulsed_jsa: fewer than 2 samples per linewidth");

  const double gamma = comb.linewidth;
  const double h = gamma / opt.samples_per_linewidth;
  const double w0 = comb.energy_center();
  const double half = opt.extent_linewidths * gamma;
  const double ihalf = std::min(half, idler_spacing(comb) / 2.0 - h);
  const int d = comb.dimension;

  std::vector<UniformAxis> sig(d), idl(d);
  std::vector<std::pair<std::size_t, std::size_t>> shapes;
  for (int j = 0; j < d; ++j) {
    sig[j] = window_axis(comb.line(j), half, w0, h);
    idl[j] = window_axis(comb.idler_line(j), ihalf, w0, h);
    shapes.emplace_back(sig[j].size, idl[j].size);
  }
  check_cells(shapes, opt.max_cells, opt.samples_per_linewidth, "build_pulsed_jsa");

  PumpConvolution fp(pump, gamma);
  JointSpectrum js;
  for (int j = 0; j < d; ++j) {
    JsaGrid g;
    g.signal = sig[j];
    g.idler = idl[j];
    const auto ns = static_cast<Eigen::Index>(g.signal.size);
    const auto ni = static_cast<Eigen::Index>(g.idler.size);
    g.amplitude = Eigen::MatrixXcd::Zero(ns, ni);
    for (int k = 0; k < d; ++k) {
      if (std::abs(comb.line(k) - comb.line(j)) > half + 40.0 * gamma) continue;
      double x0 = g.signal.start + g.idler.start - 2.0 * w0 - comb.pair_shift(k);
      std::vector<cdouble> f(ns + ni - 1);
      for (std::size_t n = 0; n < f.size(); ++n) f[n] = fp(x0 + static_cast<double>(n) * h);
      std::vector<cdouble> ls(ns), li(ni);
      for (Eigen::Index a = 0; a < ns; ++a)
        ls[a] = comb.amplitudes[k] * lorentzian_line(comb.line(k), gamma, g.signal[a]);
      for (Eigen::Index m = 0; m < ni; ++m)
        li[m] = lorentzian_line(comb.idler_line(k), gamma, g.idler[m]);
      for (Eigen::Index m = 0; m < ni; ++m)
        for (Eigen::Index a = 0; a < ns; ++a) g.amplitude(a, m) += f[a + m] * ls[a] * li[m];
    }
    js.islands.push_back(std::move(g));
  }
  js.normalize();
  return js;
}

JointSpectrum build_cw_jsa(const CombSpec& comb, const GridOptions& opt) {
  comb.validate();
  if (!(opt.samples_per_linewidth >= 2.0))
    throw ResolutionError("build_cw_jsa: fewer than 2 samples per linewidth");
  const double gamma = comb.linewidth;
  const double h = gamma / opt.samples_per_linewidth;
  const double w0 = comb.energy_center();
  const double want = opt.extent_linewidths * gamma;
  const double half = std::min(want, idler_spacing(comb) / 2.0 - h);
  const double hw2 = 0.25 * gamma * gamma;

  JointSpectrum js;
  std::vector<std::pair<std::size_t, std::size_t>> shapes;
  if (half < want && !comb.derived()) {
    // Lines too close for disjoint windows: one island over the whole marginal.
    JsaGrid g;
    g.signal = window_axis(0.5 * (comb.line(0) + comb.line(comb.dimension - 1)),
                           0.5 * (comb.dimension - 1) * comb.fsr + want, w0, h);
    const std::size_t n = g.signal.size;
    g.idler = {2.0 * w0 - g.signal.back(), h, n};
    shapes.emplace_back(n, n);
    check_cells(shapes, opt.max_cells, opt.samples_per_linewidth, "build_cw_jsa");
    g.amplitude = Eigen::MatrixXcd::Zero(n, n);
    for (std::size_t a = 0; a < n; ++a) g.amplitude(a, n - 1 - a) = cw_marginal_at(comb, g.signal[a]);
    js.islands.push_back(std::move(g));
    js.normalize();
    return js;
  }
  for (int j = 0; j < comb.dimension; ++j) {
    JsaGrid g;
    g.signal = window_axis(comb.line(j), half, w0, h);
    const std::size_t n = g.signal.size;
    // Idler axis mirrors the signal axis through the energy-conservation line.
    g.idler = {2.0 * w0 + comb.pair_shift(j) - g.signal.back(), h, n};
    shapes.emplace_back(n, n);
    check_cells(shapes, opt.max_cells, opt.samples_per_linewidth, "build_cw_jsa");
    g.amplitude = Eigen::MatrixXcd::Zero(n, n);
    for (std::size_t a = 0; a < n; ++a) {
      double x = g.signal[a] - comb.line(j);
      g.amplitude(a, n - 1 - a) = comb.amplitudes[j] / (hw2 + x * x);
    }
    js.islands.push_back(std::move(g));
  }
  js.normalize();
  return js;
}

void GaussianJsaSpec::validate() const {
  comb.validate();
  if (!finite_positive(sigma_p) || !finite_positive(sigma_r))
    throw InvalidParameter("gaussian jsa: sigma_p and sigma_r must be positive");
  double cap = max_sigma_fraction * comb.fsr;
  if (sigma_p >= cap || sigma_r >= cap)
    throw RegimeError("gaussian jsa: sigma must stay below the configured fraction of the fsr");
}

JointSpectrum build_gaussian_jsa(const GaussianJsaSpec& spec, const GaussianGridOptions& opt) {
  spec.validate();
  const CombSpec& comb = spec.comb;
  const double h = std::min(spec.sigma_p, spec.sigma_r) / opt.samples_per_sigma;
  const double w0 = comb.energy_center();
  const double half = std::min(opt.extent_sigmas * spec.sigma_r, comb.fsr / 2.0);
  const double ihalf = std::min(opt.extent_sigmas * spec.sigma_r, idler_spacing(comb) / 2.0 - h);
  const double sp2 = spec.sigma_p * spec.sigma_p, sr2 = spec.sigma_r * spec.sigma_r;
  const int d = comb.dimension;

  std::vector<UniformAxis> sig(d), idl(d);
  std::vector<std::pair<std::size_t, std::size_t>> shapes;
  for (int j = 0; j < d; ++j) {
    sig[j] = window_axis(comb.line(j), half, w0, h);
    idl[j] = window_axis(comb.idler_line(j), ihalf, w0, h);
    shapes.emplace_back(sig[j].size, idl[j].size);
  }
  check_cells(shapes, opt.max_cells, opt.samples_per_sigma, "build_gaussian_jsa");

  JointSpectrum js;
  for (int j = 0; j < d; ++j) {
    JsaGrid g;
    g.signal = sig[j];
    g.idler = idl[j];
    const auto ns = static_cast<Eigen::Index>(g.signal.size);
    const auto ni = static_cast<Eigen::Index>(g.idler.size);
    g.amplitude = Eigen::MatrixXcd::Zero(ns, ni);
    for (int k = 0; k < d; ++k) {
      if (std::abs(comb.line(k) - comb.line(j)) > half + 10.0 * spec.sigma_r) continue;
      double x0 = g.signal.start + g.idler.start - 2.0 * w0 - comb.pair_shift(k);
      std::vector<double> f(ns + ni - 1), ls(ns), li(ni);
      for (std::size_t n = 0; n < f.size(); ++n) {
        double x = x0 + static_cast<double>(n) * h;
        f[n] = std::exp(-x * x / sp2);
      }
      for (Eigen::Index a = 0; a < ns; ++a) {
        double x = g.signal[a] - comb.line(k);
        ls[a] = std::exp(-x * x / sr2);
      }
      for (Eigen::Index m = 0; m < ni; ++m) {
        double x = g.idler[m] - comb.idler_line(k);
        li[m] = std::exp(-x * x / sr2);
      }
      for (Eigen::Index m = 0; m < ni; ++m)
        for (Eigen::Index a = 0; a < ns; ++a)
          g.amplitude(a, m) += comb.amplitudes[k] * (f[a + m] * ls[a] * li[m]);
    }
    js.islands.push_back(std::move(g));
  }
  js.normalize();
  return js;
}

JsiResult jsi_and_car(const JointSpectrum& jsa, const CombSpec& comb, double floor) {
  jsa.validate();
  comb.validate();
  const int d = comb.dimension;
  const double sspace = comb.fsr / 2.0;
  const double ispace = idler_spacing(comb) / 2.0;
  auto nearest = [&](double w, bool signal) {
    for (int j = 0; j < d; ++j) {
      double c = signal ? comb.line(j) : comb.idler_line(j);
      if (std::abs(w - c) < (signal ? sspace : ispace)) return j;
    }
    return -1;
  };

  JsiResult out;
  out.jsi = Eigen::MatrixXd::Zero(d, d);
  for (const auto& g : jsa.islands) {
    std::vector<int> sb(g.signal.size), ib(g.idler.size);
    for (std::size_t a = 0; a < g.signal.size; ++a) sb[a] = nearest(g.signal[a], true);
    for (std::size_t m = 0; m < g.idler.size; ++m) ib[m] = nearest(g.idler[m], false);
    double cell = g.signal.step * g.idler.step;
    for (std::size_t m = 0; m < g.idler.size; ++m) {
      if (ib[m] < 0) continue;
      for (std::size_t a = 0; a < g.signal.size; ++a)
        if (sb[a] >= 0) out.jsi(sb[a], ib[m]) += std::norm(g.amplitude(a, m)) * cell;
    }
  }
  double total = out.jsi.sum();
  if (!(total > 0.0)) throw PreconditionError("jsi_and_car: grid does not cover the comb bins");
  out.jsi /= total;
  out.jsi.array() += floor;

  if (d == 1) {
    out.car_infinite = true;
    out.car = std::numeric_limits<double>::infinity();
    return out;
  }
  double diag = out.jsi.diagonal().mean();
  double off = (out.jsi.sum() - out.jsi.diagonal().sum()) / static_cast<double>(d * (d - 1));
  if (off <= 0.0) {
    out.car_infinite = true;
    out.car = std::numeric_limits<double>::infinity();
  } else {
    out.car = diag / off;
  }
  return out;
}

double floor_for_car(const Eigen::MatrixXd& jsi, double car) {
  const auto d = jsi.rows();
  if (d < 2) throw InvalidParameter("floor_for_car: needs at least two bins");
  if (!(car > 1.0)) throw InvalidParameter("floor_for_car: car must exceed 1");
  double diag = jsi.diagonal().mean();
  double off = (jsi.sum() - jsi.diagonal().sum()) / static_cast<double>(d * (d - 1));
  double f = (diag - car * off) / (car - 1.0);
  if (f < 0.0) throw InvalidParameter("floor_for_car: model CAR is already below the target");
  return f;
}

}  // namespace bfc
