#include "bfc/correlator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "bfc/errors.hpp"
#include "bfc/units.hpp"
#include "fft.hpp"

namespace bfc {

const char* to_string(TraceKind kind) {
  switch (kind) {
    case TraceKind::g2: return "dimensionless-g2";
    case TraceKind::density: return "density-per-second";
    case TraceKind::rate: return "coincidence-rate-arb";
  }
  return "";
}

TraceKind trace_kind_from_string(const std::string& s) {
  if (s == "dimensionless-g2") return TraceKind::g2;
  if (s == "density-per-second") return TraceKind::density;
  if (s == "coincidence-rate-arb") return TraceKind::rate;
  throw InvalidParameter("unknown trace kind '" + s + "'");
}

double CorrelationTrace::step() const {
  if (tau.size() < 2) throw InvalidParameter("trace: fewer than two samples");
  return (tau.back() - tau.front()) / static_cast<double>(tau.size() - 1);
}

void CorrelationTrace::validate() const {
  if (tau.size() < 2) throw InvalidParameter("trace: fewer than two samples");
  if (value.size() != tau.size()) throw InvalidParameter("trace: value/tau length mismatch");
  auto optional_ok = [&](const std::vector<double>& c) { return c.empty() || c.size() == tau.size(); };
  if (!optional_ok(stderr_) || !optional_ok(envelope) || !optional_ok(spike))
    throw InvalidParameter("trace: optional column length mismatch");
  double h = step();
  if (!(h > 0.0)) throw InvalidParameter("trace: tau must increase");
  for (std::size_t i = 1; i < tau.size(); ++i)
    if (std::abs(tau[i] - tau[i - 1] - h) > 1e-6 * h)
      throw InvalidParameter("trace: tau grid is not uniform");
  for (double v : value)
    if (!std::isfinite(v) || v < 0.0) throw InvalidParameter("trace: values must be finite and >= 0");
}

std::vector<double> tau_axis(double half_span, double step) {
  if (!(step > 0.0) || !(half_span >= 0.0)) throw InvalidParameter("tau_axis: bad span or step");
  auto n = static_cast<long long>(std::floor(half_span / step + 1e-9));
  std::vector<double> t;
  t.reserve(2 * n + 1);
  for (long long i = -n; i <= n; ++i) t.push_back(static_cast<double>(i) * step);
  return t;
}

namespace {

double fringe_factor(int d, double dw, double tau) {
  cdouble s = 0.0;
  for (int k = 1; k <= d; ++k) s += std::polar(1.0, k * dw * tau);
  return std::norm(s) / (static_cast<double>(d) * d);
}

double cw_envelope(double gamma, double tau) {
  double x = gamma * std::abs(tau);
  double f = 1.0 + 0.5 * x;
  return std::exp(-x) * f * f;
}

// Coherence kernel of a joint spectrum on a periodic time grid of M samples.
struct Kernel {
  std::size_t m = 0;
  double h = 0.0;
  double period = 0.0;
  double dt = 0.0;
  double norm = 0.0;
  std::vector<Eigen::MatrixXcd> rho;  // per island, rho(n1, n2) without carrier
  std::vector<double> g1;
  std::vector<double> carrier;        // signal start of each island
};

Kernel build_kernel(const JointSpectrum& js) {
  js.validate();
  Kernel k;
  k.h = js.step();
  std::size_t ns_max = 0;
  for (const auto& g : js.islands) ns_max = std::max(ns_max, g.signal.size);
  k.m = detail::fft_size_at_least(2 * ns_max);
  k.period = two_pi / k.h;
  k.dt = k.period / static_cast<double>(k.m);
  const auto M = static_cast<Eigen::Index>(k.m);

  double bytes = static_cast<double>(js.islands.size()) * static_cast<double>(k.m) *
                 static_cast<double>(k.m) * 16.0;
  if (bytes > 3e9)
    throw ResourceError("coherence kernel needs more than 3 GB; coarsen the grid", 0.0);

  k.g1.assign(k.m, 0.0);
  const double scale = k.h / std::sqrt(two_pi);
  for (const auto& g : js.islands) {
    const auto ns = static_cast<Eigen::Index>(g.signal.size);
    const auto ni = static_cast<Eigen::Index>(g.idler.size);
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(M, ni);
    for (Eigen::Index c = 0; c < ni; ++c) {
      a.col(c).head(ns) = g.amplitude.col(c);
      detail::fft_inplace(a.col(c).data(), k.m, -1);
    }
    a *= scale;
    Eigen::MatrixXcd rho = g.idler.step * (a * a.adjoint());
    for (std::size_t n = 0; n < k.m; ++n) k.g1[n] += rho(n, n).real();
    k.rho.push_back(std::move(rho));
    k.carrier.push_back(g.signal.start);
  }
  double s = 0.0;
  for (double v : k.g1) s += v;
  k.norm = s * k.dt;
  return k;
}

// Full width of G1 above half its maximum, in seconds.
double marginal_width(const Kernel& k) {
  double mx = *std::max_element(k.g1.begin(), k.g1.end());
  std::size_t count = 0;
  for (double v : k.g1)
    if (v >= 0.5 * mx) ++count;
  return static_cast<double>(count) * k.dt;
}

// Fourier coefficients c_q of a periodic sequence, q in [-M/2, M/2).
std::vector<cdouble> trig_coefficients(std::vector<cdouble> x) {
  const std::size_t m = x.size();
  detail::fft_inplace(x.data(), m, -1);
  std::vector<cdouble> c(m);
  for (std::size_t q = 0; q < m; ++q) {
    std::size_t idx = (q + m / 2) % m;  // position of q - m/2
    c[q] = x[idx] / static_cast<double>(m);
  }
  return c;
}

struct TrigSeries {
  long long qmin = 0;
  std::vector<cdouble> coef;
  double h = 0.0;

  void add(const std::vector<cdouble>& c, long long shift, double weight) {
    const long long m = static_cast<long long>(c.size());
    long long lo = -m / 2 + shift, hi = lo + m - 1;
    if (coef.empty()) {
      qmin = lo;
      coef.assign(m, 0.0);
    }
    long long cur_hi = qmin + static_cast<long long>(coef.size()) - 1;
    if (lo < qmin) {
      coef.insert(coef.begin(), static_cast<std::size_t>(qmin - lo), 0.0);
      qmin = lo;
    }
    if (hi > cur_hi) coef.resize(static_cast<std::size_t>(hi - qmin + 1), 0.0);
    for (long long i = 0; i < m; ++i) coef[static_cast<std::size_t>(lo + i - qmin)] += weight * c[i];
  }

  double eval(double tau) const {
    cdouble z = std::polar(1.0, h * tau);
    cdouble w = std::polar(1.0, static_cast<double>(qmin) * h * tau);
    cdouble sum = 0.0;
    for (std::size_t i = 0; i < coef.size(); ++i) {
      sum += coef[i] * w;
      w *= z;
      if ((i & 1023) == 1023) {
        w = std::polar(1.0, static_cast<double>(qmin + static_cast<long long>(i) + 1) * h * tau);
      }
    }
    return sum.real();
  }
};

std::vector<double> engine_values(const Kernel& k, const std::vector<double>& tau) {
  const std::size_t m = k.m;
  const std::size_t nb = k.rho.size();

  // G1 autocorrelation.
  std::vector<cdouble> t1(m, 0.0);
  for (std::size_t l = 0; l < m; ++l) {
    double s = 0.0;
    for (std::size_t n = 0; n < m; ++n) s += k.g1[n] * k.g1[(n + l) % m];
    t1[l] = s * k.dt;
  }
  TrigSeries series;
  series.h = k.h;
  series.add(trig_coefficients(t1), 0, 1.0);

  struct Loose {
    double shift;
    std::vector<cdouble> coef;
  };
  std::vector<Loose> loose;

  // |rho(t, t + tau)|^2 expanded over island pairs.
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t c = b; c < nb; ++c) {
      std::vector<cdouble> cc(m, 0.0);
      const auto& rb = k.rho[b];
      const auto& rc = k.rho[c];
      for (std::size_t n = 0; n < m; ++n) {
        const cdouble* colb = rb.col(n).data();
        const cdouble* colc = rc.col(n).data();
        // rho(n, j) = conj(rho(j, n)); lag l = j - n.
        for (std::size_t j = 0; j < m; ++j) {
          std::size_t l = (j + m - n) % m;
          cc[l] += std::conj(colb[j]) * colc[j];
        }
      }
      for (auto& v : cc) v *= k.dt;
      double weight = (b == c) ? 1.0 : 2.0;
      double ds = (k.carrier[b] - k.carrier[c]) / k.h;
      double ri = std::round(ds);
      auto coef = trig_coefficients(std::move(cc));
      if (std::abs(ds - ri) < 1e-6) {
        series.add(coef, static_cast<long long>(ri), weight);
      } else {
        for (auto& v : coef) v *= weight;
        loose.push_back({k.carrier[b] - k.carrier[c], std::move(coef)});
      }
    }
  }

  const double inv = 1.0 / (k.norm * k.norm);
  std::vector<double> out(tau.size());
  for (std::size_t i = 0; i < tau.size(); ++i) {
    double v = series.eval(tau[i]);
    for (const auto& lp : loose) {
      TrigSeries s1;
      s1.h = k.h;
      s1.add(lp.coef, 0, 1.0);
      cdouble car = std::polar(1.0, lp.shift * tau[i]);
      // Real part of carrier * series; evaluate series as complex.
      cdouble sum = 0.0;
      for (std::size_t q = 0; q < s1.coef.size(); ++q)
        sum += s1.coef[q] * std::polar(1.0, static_cast<double>(s1.qmin + static_cast<long long>(q)) *
                                                k.h * tau[i]);
      v += (car * sum).real();
    }
    out[i] = std::max(0.0, v * inv);
  }
  return out;
}

void check_window(const Kernel& k, const std::vector<double>& tau, bool envelope_check) {
  double tmax = 0.0;
  for (double t : tau) tmax = std::max(tmax, std::abs(t));
  if (tmax > k.period / 2.0) {
    std::ostringstream os;
    os << "delay " << tmax << " s exceeds half the periodic window " << k.period / 2.0 << " s";
    throw AliasingError(os.str());
  }
  if (envelope_check) {
    double w = marginal_width(k);
    if (k.period < 5.0 * w) {
      std::ostringstream os;
      os << "time window " << k.period << " s is shorter than 5 envelope widths (" << w << " s)";
      throw AliasingError(os.str());
    }
  }
}

}  // namespace

double g2_cw_value(double gamma, double delta_omega, int d, double tau) {
  return 1.0 + cw_envelope(gamma, tau) * fringe_factor(d, delta_omega, tau);
}

CorrelationTrace g2_cw(const CombSpec& comb, const std::vector<double>& tau) {
  comb.validate();
  if (!comb.equal_magnitudes(1e-9))
    throw PreconditionError("g2_cw: closed form needs equal bin weights; use g2_cw_numeric");
  CorrelationTrace tr;
  tr.kind = TraceKind::g2;
  tr.tau = tau;
  tr.value.resize(tau.size());
  const int d = comb.dimension;
  for (std::size_t i = 0; i < tau.size(); ++i)
    tr.value[i] = g2_cw_value(comb.linewidth, comb.fsr, d, tau[i]);
  tr.meta.model = "cw-closed-form";
  tr.meta.params = {{"gamma_ghz", to_ghz(comb.linewidth)},
                    {"fsr_ghz", to_ghz(comb.fsr)},
                    {"d", static_cast<double>(d)}};
  return tr;
}

CorrelationTrace g2_cw_numeric(const CombSpec& comb, const std::vector<double>& tau,
                               const GridOptions& opt) {
  JointSpectrum js = build_cw_jsa(comb, opt);
  Kernel k = build_kernel(js);
  check_window(k, tau, false);
  CorrelationTrace tr;
  tr.kind = TraceKind::g2;
  tr.tau = tau;
  tr.value = engine_values(k, tau);
  // Stationary field: the density over one period is g2 / period.
  for (auto& v : tr.value) v *= k.period;
  tr.meta.model = "cw-numeric";
  tr.meta.params = {{"gamma_ghz", to_ghz(comb.linewidth)},
                    {"fsr_ghz", to_ghz(comb.fsr)},
                    {"d", static_cast<double>(comb.dimension)},
                    {"period_s", k.period}};
  return tr;
}

CorrelationTrace g2_density_numeric(const JointSpectrum& jsa, const std::vector<double>& tau,
                                    const DensityOptions& opt) {
  Kernel k = build_kernel(jsa);
  check_window(k, tau, opt.check_aliasing);
  CorrelationTrace tr;
  tr.kind = TraceKind::density;
  tr.tau = tau;
  tr.value = engine_values(k, tau);
  tr.meta.model = "density-reduced-kernel";
  tr.meta.params = {{"period_s", k.period},
                    {"time_samples", static_cast<double>(k.m)},
                    {"islands", static_cast<double>(jsa.islands.size())}};
  return tr;
}

CorrelationTrace g2_density_quadrature(const JointSpectrum& jsa, const std::vector<double>& tau,
                                       std::size_t max_points_per_axis) {
  jsa.validate();
  {
    double s0 = std::numeric_limits<double>::infinity(), s1 = -s0, i0 = s0, i1 = -s0;
    for (const auto& g : jsa.islands) {
      s0 = std::min(s0, g.signal.start);
      s1 = std::max(s1, g.signal.back());
      i0 = std::min(i0, g.idler.start);
      i1 = std::max(i1, g.idler.back());
    }
    double h = jsa.step();
    if ((s1 - s0) / h + 1.5 > static_cast<double>(max_points_per_axis) ||
        (i1 - i0) / h + 1.5 > static_cast<double>(max_points_per_axis))
      throw ResourceError("g2_density_quadrature: dense grid exceeds the point cap", 0.0);
  }
  const JsaGrid g = jsa.dense();
  const double h = g.signal.step;
  const auto ns = static_cast<Eigen::Index>(g.signal.size);
  // R(a, b) = h sum_i psi(a, i) conj(psi(b, i))
  Eigen::MatrixXcd r = g.idler.step * (g.amplitude * g.amplitude.adjoint());
  const double norm = g.norm();
  const double pre = h * h * h / two_pi / (norm * norm);

  CorrelationTrace tr;
  tr.kind = TraceKind::density;
  tr.tau = tau;
  for (double t : tau) {
    std::vector<cdouble> ph(2 * ns + 1);
    for (Eigen::Index q = -ns; q <= ns; ++q) ph[q + ns] = std::polar(1.0, static_cast<double>(q) * h * t);
    cdouble t1 = 0.0, t2 = 0.0;
    for (Eigen::Index a = 0; a < ns; ++a) {
      for (Eigen::Index b = 0; b < ns; ++b) {
        const Eigen::Index s = a - b;
        cdouble inner1 = 0.0, inner2 = 0.0;
        for (Eigen::Index c = std::max<Eigen::Index>(0, -s); c < ns && c + s < ns; ++c) {
          cdouble v = r(c, c + s);
          inner1 += v;
          inner2 += v * ph[b - c + ns];
        }
        t1 += r(a, b) * std::conj(ph[b - a + ns]) * inner1;
        t2 += r(a, b) * inner2;
      }
    }
    tr.value.push_back(std::max(0.0, pre * (t1 + t2).real()));
  }
  tr.meta.model = "density-direct-quadrature";
  tr.meta.params = {{"points_per_axis", static_cast<double>(std::max(g.signal.size, g.idler.size))}};
  return tr;
}

TwoTimeSlice g2_two_time(const JointSpectrum& jsa, double tau) {
  Kernel k = build_kernel(jsa);
  const auto m = static_cast<long long>(k.m);
  long long l = std::llround(tau / k.dt);
  double tl = static_cast<double>(l) * k.dt;
  long long lw = ((l % m) + m) % m;
  TwoTimeSlice out;
  out.tau = tl;
  out.period = k.period;
  for (long long n = 0; n < m; ++n) {
    long long n2 = (n + lw) % m;
    cdouble r = 0.0;
    for (std::size_t b = 0; b < k.rho.size(); ++b)
      r += std::polar(1.0, (k.carrier[b] - k.carrier[0]) * tl) * k.rho[b](n, n2);
    out.t.push_back(static_cast<double>(n) * k.dt);
    out.value.push_back(k.g1[n] * k.g1[n2] + std::norm(r));
  }
  return out;
}

double gaussian_envelope(double sigma_p, double sigma_r, double tau) {
  double c = 1.0 + sigma_r * sigma_r / (sigma_p * sigma_p);
  return sigma_r / std::sqrt(4.0 * std::numbers::pi * c) *
         std::exp(-sigma_r * sigma_r * tau * tau / (4.0 * c));
}

double gaussian_spike(double sigma_p, double sigma_r, double tau) {
  double p = sigma_p * sigma_p, r = sigma_r * sigma_r;
  return std::exp(-r * r * r * tau * tau / (4.0 * (p + r) * (p + 2.0 * r)));
}

CorrelationTrace g2_density_gaussian(const GaussianJsaSpec& spec, const std::vector<double>& tau) {
  spec.validate();
  CorrelationTrace tr;
  tr.kind = TraceKind::density;
  tr.tau = tau;
  const int d = spec.comb.dimension;
  for (double t : tau) {
    double env = gaussian_envelope(spec.sigma_p, spec.sigma_r, t);
    double sp = gaussian_spike(spec.sigma_p, spec.sigma_r, t);
    tr.envelope.push_back(env);
    tr.spike.push_back(sp);
    tr.value.push_back(env * (1.0 + sp * fringe_factor(d, spec.comb.fsr, t)));
  }
  tr.meta.model = "density-gaussian-closed-form";
  tr.meta.params = {{"sigma_p_ghz", to_ghz(spec.sigma_p)},
                    {"sigma_r_ghz", to_ghz(spec.sigma_r)},
                    {"fsr_ghz", to_ghz(spec.comb.fsr)},
                    {"d", static_cast<double>(d)}};
  return tr;
}

double integrated_g2(const CorrelationTrace& trace) {
  trace.validate();
  if (trace.kind != TraceKind::density)
    throw PreconditionError("integrated_g2: trace must be a density");
  const auto& v = trace.value;
  const std::size_t n = v.size();
  double peak = *std::max_element(v.begin(), v.end());
  double edge = std::max(v.front(), v.back());
  double h = trace.step();
  if (edge > 1e-3 * peak) {
    // Exponential extrapolation of the larger tail.
    bool right = v.back() >= v.front();
    std::size_t back = std::max<std::size_t>(1, n / 20);
    double inner = right ? v[n - 1 - back] : v[back];
    double bound = edge * (trace.tau.back() - trace.tau.front());
    if (inner > edge && edge > 0.0) bound = edge * back * h / std::log(inner / edge);
    std::ostringstream os;
    os << "integrated_g2: tails not converged (edge/peak = " << edge / peak
       << "), missing area up to ~" << bound;
    throw TruncationError(os.str(), bound);
  }
  double s = 0.5 * (v.front() + v.back());
  for (std::size_t i = 1; i + 1 < n; ++i) s += v[i];
  return s * h;
}

CorrelationTrace cross_correlation(const CombSpec& comb, PhasePattern phase,
                                   const std::vector<double>& tau, bool equalized) {
  comb.validate();
  if (!comb.equal_magnitudes(1e-6))
    throw PreconditionError("cross_correlation: model assumes equal bin weights");
  const int d = comb.dimension;
  if (d > 3 && !equalized)
    throw PreconditionError("cross_correlation: d > 3 requires amplitude equalization");
  if (!(phase.phi >= -std::numbers::pi - 1e-12 && phase.phi <= std::numbers::pi + 1e-12))
    throw InvalidParameter("cross_correlation: phase must lie in [-pi, pi]");
  CorrelationTrace tr;
  tr.kind = TraceKind::rate;
  tr.tau = tau;
  for (double t : tau) {
    cdouble s = 0.0;
    for (int j = 0; j < d; ++j)
      s += ((j % 2) ? -1.0 : 1.0) * std::polar(1.0, j * (phase.phi - comb.fsr * t));
    tr.value.push_back(std::exp(-comb.linewidth * std::abs(t)) * std::norm(s));
  }
  tr.meta.model = "cross-correlation";
  tr.meta.params = {{"phi_rad", phase.phi},
                    {"gamma_ghz", to_ghz(comb.linewidth)},
                    {"fsr_ghz", to_ghz(comb.fsr)},
                    {"d", static_cast<double>(d)}};
  tr.meta.notes["normalization"] = "envelope peak 1; maximum over phase and delay is d^2";
  return tr;
}

namespace {

// Antiderivative of the Gaussian CDF Phi(u / sigma).
double cdf_integral(double u, double sigma) {
  if (sigma <= 0.0) return std::max(u, 0.0);
  double z = u / sigma;
  double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
  double pdf = std::exp(-0.5 * z * z) / std::sqrt(two_pi);
  return u * cdf + sigma * pdf;
}

}  // namespace

std::vector<double> bin_centers_within(const std::vector<double>& tau, double jitter_fwhm,
                                       double bin_width) {
  double reach = bin_width / 2.0 + 8.0 * jitter_fwhm / fwhm_per_sigma;
  double lo = tau.front() + reach, hi = tau.back() - reach;
  auto rlo = static_cast<long long>(std::ceil(lo / bin_width - 1e-9));
  auto rhi = static_cast<long long>(std::floor(hi / bin_width + 1e-9));
  std::vector<double> c;
  for (long long r = rlo; r <= rhi; ++r) c.push_back(static_cast<double>(r) * bin_width);
  return c;
}

BinningKernel::BinningKernel(const std::vector<double>& fine_tau,
                             const std::vector<double>& centers, double jitter_fwhm,
                             double bin_width)
    : centers_(centers) {
  if (!(jitter_fwhm >= 0.0)) throw InvalidParameter("jitter must be >= 0");
  if (fine_tau.size() < 2) throw InvalidParameter("binning: grid too short");
  const double dt = (fine_tau.back() - fine_tau.front()) / static_cast<double>(fine_tau.size() - 1);
  if (bin_width < dt * (1.0 - 1e-9))
    throw GridError("bin width is narrower than the delay grid spacing");
  const double sigma = jitter_fwhm / fwhm_per_sigma;
  const double reach = bin_width / 2.0 + 8.0 * sigma + dt;
  const auto n = static_cast<long long>(fine_tau.size());
  for (double c : centers) {
    double lo = c - bin_width / 2.0, hi = c + bin_width / 2.0;
    long long i0 = std::max<long long>(0, static_cast<long long>(std::floor((c - reach - fine_tau.front()) / dt)));
    long long i1 = std::min<long long>(n - 1, static_cast<long long>(std::ceil((c + reach - fine_tau.front()) / dt)));
    std::vector<double> w;
    for (long long i = i0; i <= i1; ++i) {
      double a = fine_tau[i] - dt / 2.0, b = fine_tau[i] + dt / 2.0;
      w.push_back(cdf_integral(hi - a, sigma) - cdf_integral(hi - b, sigma) -
                  cdf_integral(lo - a, sigma) + cdf_integral(lo - b, sigma));
    }
    first_.push_back(static_cast<std::size_t>(i0));
    weights_.push_back(std::move(w));
  }
  for (auto& w : weights_)
    for (auto& x : w) x /= bin_width;
}

std::vector<double> BinningKernel::apply(const std::vector<double>& fine, double baseline) const {
  std::vector<double> out(centers_.size());
  for (std::size_t r = 0; r < centers_.size(); ++r) {
    double s = 0.0;
    const auto& w = weights_[r];
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * (fine[first_[r] + i] - baseline);
    out[r] = baseline + s;
  }
  return out;
}

CorrelationTrace jitter_average(const CorrelationTrace& trace, double jitter_fwhm,
                                double bin_width) {
  trace.validate();
  if (!(jitter_fwhm >= 0.0)) throw InvalidParameter("jitter_average: jitter must be >= 0");
  if (!(bin_width > 0.0)) throw InvalidParameter("jitter_average: bin width must be positive");
  if (bin_width < trace.step() * (1.0 - 1e-9))
    throw GridError("jitter_average: bin width is narrower than the delay grid spacing");
  auto centers = bin_centers_within(trace.tau, jitter_fwhm, bin_width);
  if (centers.size() < 2) throw GridError("jitter_average: trace too short for the kernel");
  BinningKernel kern(trace.tau, centers, jitter_fwhm, bin_width);
  const double base = trace.kind == TraceKind::g2 ? 1.0 : 0.0;
  CorrelationTrace out;
  out.kind = trace.kind;
  out.tau = centers;
  out.value = kern.apply(trace.value, base);
  for (auto& v : out.value) v = std::max(v, 0.0);
  if (!trace.envelope.empty()) out.envelope = kern.apply(trace.envelope, 0.0);
  if (!trace.spike.empty()) out.spike = kern.apply(trace.spike, 0.0);
  out.meta = trace.meta;
  out.meta.params["jitter_fwhm_ps"] = to_ps(jitter_fwhm);
  out.meta.params["bin_width_ps"] = to_ps(bin_width);
  return out;
}

}  // namespace bfc
