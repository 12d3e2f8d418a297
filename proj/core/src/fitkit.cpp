#include "bfc/fitkit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>

#include "bfc/errors.hpp"
#include "bfc/units.hpp"

namespace bfc {

namespace {

constexpr double pi = std::numbers::pi;

int trace_dimension(const CorrelationTrace& t, int requested) {
  if (requested > 0) return requested;
  auto it = t.meta.params.find("d");
  if (it == t.meta.params.end() || it->second < 1.0)
    throw PreconditionError("fit: bin count d not given and not in trace metadata");
  return static_cast<int>(std::lround(it->second));
}

// Dominant angular frequency of the fringe. First differences suppress the
// slowly varying envelope relative to the fringe.
double periodogram_peak(const CorrelationTrace& t) {
  const std::size_t n = t.size();
  const double span = t.tau.back() - t.tau.front();
  const double dt = t.step();
  std::vector<double> x(n - 1), xt(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    x[i] = t.value[i + 1] - t.value[i];
    xt[i] = 0.5 * (t.tau[i + 1] + t.tau[i]);
  }
  const double w_lo = two_pi / span, w_hi = pi / dt, dw = two_pi / (8.0 * span);
  auto power = [&](double w) {
    cdouble s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * std::polar(1.0, -w * xt[i]);
    return std::norm(s);
  };
  double best_w = w_lo, best_p = -1.0;
  for (double w = w_lo; w <= w_hi; w += dw) {
    double p = power(w);
    if (p > best_p) {
      best_p = p;
      best_w = w;
    }
  }
  // Parabolic refinement on the three samples around the maximum.
  double pl = power(best_w - dw), pr = power(best_w + dw);
  double den = pl - 2.0 * best_p + pr;
  if (den < 0.0) best_w += 0.5 * dw * (pl - pr) / den;
  return best_w;
}

struct Model {
  const CorrelationTrace& trace;
  int d;
  std::vector<double> fine;
  std::optional<BinningKernel> kernel;
  mutable std::vector<double> buf;

  Model(const CorrelationTrace& t, int dim, double jitter, double bin) : trace(t), d(dim) {
    if (jitter > 0.0 || bin > 0.0) {
      const double w = bin > 0.0 ? bin : t.step();
      const double step = std::min(ps(4.0), w / 4.0);
      const double reach = w / 2.0 + 8.0 * jitter / fwhm_per_sigma + 2.0 * step;
      const double lo = t.tau.front() - reach, hi = t.tau.back() + reach;
      auto count = static_cast<std::size_t>(std::ceil((hi - lo) / step)) + 1;
      for (std::size_t i = 0; i < count; ++i) fine.push_back(lo + static_cast<double>(i) * step);
      kernel.emplace(fine, t.tau, jitter, w);
      buf.resize(fine.size());
    }
  }

  double sse(double gamma, double dw) const {
    std::vector<double> m;
    if (kernel) {
      for (std::size_t i = 0; i < fine.size(); ++i) buf[i] = g2_cw_value(gamma, dw, d, fine[i]);
      m = kernel->apply(buf, 1.0);
    } else {
      m.resize(trace.size());
      for (std::size_t i = 0; i < trace.size(); ++i) m[i] = g2_cw_value(gamma, dw, d, trace.tau[i]);
    }
    double s = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      double r = trace.value[i] - m[i];
      s += r * r;
    }
    return s;
  }
};

}  // namespace

FitResult fit_cw_model(const CorrelationTrace& trace, const FitOptions& opt) {
  trace.validate();
  if (trace.kind != TraceKind::g2) throw PreconditionError("fit_cw_model: trace must be a g2 trace");
  if (opt.budget < 10) throw InvalidParameter("fit_cw_model: budget too small");
  const int d = trace_dimension(trace, opt.dimension);
  const double span = trace.tau.back() - trace.tau.front();

  double dw0 = 0.0, gamma0 = 0.0;
  if (opt.init) {
    gamma0 = opt.init->first;
    dw0 = opt.init->second;
    if (!(gamma0 > 0.0 && dw0 > 0.0)) throw InvalidParameter("fit_cw_model: init must be positive");
  } else {
    double contrast = 0.0;
    for (double v : trace.value) contrast = std::max(contrast, std::abs(v - 1.0));
    if (contrast < 1e-12) throw FitError("fit_cw_model: trace has no structure to fit", 0.0, 0.0, 0.0);
    if (d == 1) {
      // No fringe: only gamma is identifiable.
      dw0 = two_pi / span;
    } else {
      dw0 = periodogram_peak(trace);
    }
  }
  if (d > 1 && span * dw0 / two_pi < 3.0) {
    std::ostringstream os;
    os << "fit_cw_model: trace spans " << span * dw0 / two_pi << " fringe periods, need >= 3";
    throw PreconditionError(os.str());
  }

  Model model(trace, d, opt.jitter_fwhm, opt.bin_width);
  // Without a fringe gamma is bounded by the trace span and sampling instead.
  const double g_lo = d == 1 ? 0.1 / span : dw0 * 1e-3;
  const double g_hi = d == 1 ? pi / trace.step() : dw0;
  const double w_lo = dw0 * 0.9, w_hi = dw0 * 1.1;
  auto objective = [&](double lg, double lw) {
    double g = std::exp(lg), w = std::exp(lw);
    if (g < g_lo || g > g_hi || w < w_lo || w > w_hi) return std::numeric_limits<double>::infinity();
    return model.sse(g, w);
  };

  // Coarse grid.
  double best = std::numeric_limits<double>::infinity();
  std::array<double, 2> x0{};
  if (opt.init) {
    x0 = {std::log(gamma0), std::log(dw0)};
    best = objective(x0[0], x0[1]);
  } else {
    for (int i = 0; i < 24; ++i) {
      double lg = std::log(g_lo) + (std::log(g_hi) - std::log(g_lo)) * (i + 0.5) / 24.0;
      for (int j = 0; j < 21; ++j) {
        double lw = std::log(dw0 * (0.97 + 0.003 * j));
        if (d == 1 && j != 10) continue;
        double f = objective(lg, lw);
        if (f < best) {
          best = f;
          x0 = {lg, lw};
        }
      }
    }
  }

  // Nelder-Mead in (log gamma, log delta_omega).
  using Pt = std::array<double, 2>;
  std::array<Pt, 3> s{x0, Pt{x0[0] + 0.1, x0[1]}, Pt{x0[0], x0[1] + (d == 1 ? 0.0 : 0.002)}};
  if (d == 1) s[2] = {x0[0] - 0.1, x0[1]};
  std::array<double, 3> f{};
  int evals = 0;
  auto eval = [&](const Pt& p) {
    ++evals;
    return d == 1 ? objective(p[0], x0[1]) : objective(p[0], p[1]);
  };
  for (int i = 0; i < 3; ++i) f[i] = eval(s[i]);
  int iters = 0;
  bool stopped = false;
  while (evals < opt.budget) {
    std::array<int, 3> idx{0, 1, 2};
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return f[a] < f[b]; });
    std::array<Pt, 3> s2{s[idx[0]], s[idx[1]], s[idx[2]]};
    std::array<double, 3> f2{f[idx[0]], f[idx[1]], f[idx[2]]};
    s = s2;
    f = f2;
    double diam = 0.0;
    for (int i = 1; i < 3; ++i)
      diam = std::max({diam, std::abs(s[i][0] - s[0][0]), std::abs(s[i][1] - s[0][1])});
    if (diam < 1e-9 || (std::isfinite(f[2]) && f[2] - f[0] <= 1e-15 * (f[0] + 1e-300))) {
      stopped = true;
      break;
    }
    ++iters;
    Pt c{(s[0][0] + s[1][0]) / 2.0, (s[0][1] + s[1][1]) / 2.0};
    auto along = [&](double t) { return Pt{c[0] + t * (s[2][0] - c[0]), c[1] + t * (s[2][1] - c[1])}; };
    Pt xr = along(-1.0);
    double fr = eval(xr);
    if (fr < f[0]) {
      Pt xe = along(-2.0);
      double fe = eval(xe);
      if (fe < fr) { s[2] = xe; f[2] = fe; } else { s[2] = xr; f[2] = fr; }
    } else if (fr < f[1]) {
      s[2] = xr;
      f[2] = fr;
    } else {
      Pt xc = fr < f[2] ? along(-0.5) : along(0.5);
      double fc = eval(xc);
      if (fc < std::min(fr, f[2])) {
        s[2] = xc;
        f[2] = fc;
      } else {
        for (int i = 1; i < 3; ++i) {
          s[i] = {s[0][0] + 0.5 * (s[i][0] - s[0][0]), s[0][1] + 0.5 * (s[i][1] - s[0][1])};
          f[i] = eval(s[i]);
        }
      }
    }
  }
  int ib = static_cast<int>(std::min_element(f.begin(), f.end()) - f.begin());
  FitResult r;
  r.gamma = std::exp(s[ib][0]);
  r.delta_omega = d == 1 ? dw0 : std::exp(s[ib][1]);
  r.residual_rms = std::sqrt(f[ib] / static_cast<double>(trace.size()));
  r.iterations = iters;
  r.evaluations = evals;
  const bool at_bound = r.gamma > 0.99 * g_hi || r.gamma < 1.01 * g_lo ||
                        (d > 1 && (r.delta_omega > 0.999 * w_hi || r.delta_omega < 1.001 * w_lo));
  r.converged = stopped && !at_bound && std::isfinite(f[ib]);
  if (!r.converged) {
    std::ostringstream os;
    os << "fit_cw_model: no convergence within " << opt.budget << " evaluations"
       << (at_bound ? " (solution at a parameter bound)" : "") << "; best gamma/2pi = "
       << to_ghz(r.gamma) << " GHz, delta/2pi = " << to_ghz(r.delta_omega) << " GHz";
    throw FitError(os.str(), r.gamma, r.delta_omega, r.residual_rms);
  }
  return r;
}

double bell_threshold(int d) {
  if (d == 2) return 0.71;
  if (d == 3) return 0.77;
  throw InvalidParameter("bell_threshold: thresholds are defined for d = 2 and 3");
}

VisibilityResult visibility_and_threshold(const std::vector<double>& phi,
                                          const std::vector<double>& value, int d) {
  if (phi.size() != value.size() || phi.size() < 3)
    throw InvalidParameter("visibility: need matching phase and value samples");
  const double threshold = bell_threshold(d);
  for (double v : value)
    if (!std::isfinite(v) || v < 0.0) throw InvalidParameter("visibility: values must be finite and >= 0");
  auto [pmin, pmax] = std::minmax_element(phi.begin(), phi.end());
  const double range = *pmax - *pmin;
  const double step = range / static_cast<double>(phi.size() - 1);
  if (!(step > 0.0) || range + step < two_pi * (1.0 - 1e-9))
    throw SamplingError("visibility: fringe does not cover a full phase period");
  if (two_pi / step < 8.0 - 1e-9) throw SamplingError("visibility: fewer than 8 samples per period");

  auto shape = [&](double x) {
    cdouble s = 0.0;
    for (int j = 0; j < d; ++j) s += ((j % 2) ? -1.0 : 1.0) * std::polar(1.0, j * x);
    return std::norm(s);
  };
  // Linear least squares for floor F and scale C at a fixed origin.
  struct Lin {
    double f, c, sse;
  };
  auto solve = [&](double p0) {
    double s11 = 0, s1x = 0, sxx = 0, sy = 0, sxy = 0;
    const auto n = static_cast<double>(phi.size());
    std::vector<double> x(phi.size());
    for (std::size_t i = 0; i < phi.size(); ++i) {
      x[i] = shape(phi[i] - p0);
      s11 += 1.0;
      s1x += x[i];
      sxx += x[i] * x[i];
      sy += value[i];
      sxy += x[i] * value[i];
    }
    double det = s11 * sxx - s1x * s1x;
    Lin l{sy / n, 0.0, 0.0};
    if (det > 0.0) {
      l.f = (sxx * sy - s1x * sxy) / det;
      l.c = (s11 * sxy - s1x * sy) / det;
    }
    if (l.f < 0.0) {
      l.f = 0.0;
      l.c = sxx > 0.0 ? sxy / sxx : 0.0;
    }
    if (l.c < 0.0) {
      l.c = 0.0;
      l.f = sy / n;
    }
    for (std::size_t i = 0; i < phi.size(); ++i) {
      double r = value[i] - l.f - l.c * x[i];
      l.sse += r * r;
    }
    return l;
  };
  const int scan = 720;
  double best_p = 0.0, best_sse = std::numeric_limits<double>::infinity();
  for (int k = 0; k < scan; ++k) {
    double p0 = -pi + two_pi * k / scan;
    double e = solve(p0).sse;
    if (e < best_sse) {
      best_sse = e;
      best_p = p0;
    }
  }
  // Golden-section refinement within one scan step.
  double a = best_p - two_pi / scan, b = best_p + two_pi / scan;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double c1 = b - g * (b - a), c2 = a + g * (b - a);
  double e1 = solve(c1).sse, e2 = solve(c2).sse;
  for (int it = 0; it < 60; ++it) {
    if (e1 < e2) {
      b = c2; c2 = c1; e2 = e1; c1 = b - g * (b - a); e1 = solve(c1).sse;
    } else {
      a = c1; c1 = c2; e1 = e2; c2 = a + g * (b - a); e2 = solve(c2).sse;
    }
  }
  double p0 = 0.5 * (a + b);
  Lin l = solve(p0);

  VisibilityResult r;
  double top = l.c * d * d;
  r.visibility = (top + 2.0 * l.f) > 0.0 ? top / (top + 2.0 * l.f) : 0.0;
  auto [vmin, vmax] = std::minmax_element(value.begin(), value.end());
  r.raw_visibility = (*vmax + *vmin) > 0.0 ? (*vmax - *vmin) / (*vmax + *vmin) : 0.0;
  r.threshold = threshold;
  r.violates = r.visibility > threshold;
  r.phase_offset = std::remainder(p0, two_pi);
  return r;
}

FwhmResult measure_fwhm(const CorrelationTrace& trace, FwhmTarget which) {
  trace.validate();
  const auto& v = trace.value;
  const auto& t = trace.tau;
  const std::size_t n = v.size();
  std::vector<std::size_t> maxima;
  for (std::size_t i = 1; i + 1 < n; ++i)
    if (v[i] >= v[i - 1] && v[i] > v[i + 1]) maxima.push_back(i);
  if (maxima.empty()) throw PreconditionError("measure_fwhm: trace has no interior peak");

  std::size_t peak = 0;
  auto ambiguous = [&](const std::vector<std::size_t>& c) {
    std::ostringstream os;
    os << "measure_fwhm: ambiguous peak, candidates at";
    std::vector<double> taus;
    for (auto i : c) {
      os << " " << to_ps(t[i]) << " ps";
      taus.push_back(t[i]);
    }
    throw AmbiguityError(os.str(), taus);
  };
  if (which == FwhmTarget::central_peak) {
    double best = std::numeric_limits<double>::infinity();
    for (auto i : maxima) best = std::min(best, std::abs(t[i]));
    std::vector<std::size_t> c;
    for (auto i : maxima)
      if (std::abs(t[i]) <= best + 1e-3 * trace.step()) c.push_back(i);
    if (c.size() > 1 && std::abs(v[c[0]] - v[c[1]]) <= 1e-3 * std::abs(v[c[0]])) ambiguous(c);
    peak = c.size() > 1 && v[c[1]] > v[c[0]] ? c[1] : c[0];
  } else {
    double top = 0.0;
    for (auto i : maxima) top = std::max(top, v[i]);
    std::vector<std::size_t> c;
    for (auto i : maxima)
      if (v[i] >= top - 1e-3 * std::abs(top)) c.push_back(i);
    if (c.size() > 1) ambiguous(c);
    peak = c.front();
  }

  FwhmResult r;
  r.peak_tau = t[peak];
  if (trace.kind == TraceKind::g2) {
    r.baseline = 1.0;
    r.baseline_source = "asymptote";
  } else if (!trace.envelope.empty()) {
    r.baseline = trace.envelope[peak];
    r.baseline_source = "envelope";
  } else {
    std::size_t lo = peak, hi = peak;
    while (lo > 0 && v[lo - 1] <= v[lo]) --lo;
    while (hi + 1 < n && v[hi + 1] <= v[hi]) ++hi;
    r.baseline = 0.5 * (v[lo] + v[hi]);
    r.baseline_source = "bracketing-minima";
  }
  const double height = v[peak] - r.baseline;
  if (!(height > 0.2 * std::abs(r.baseline)) || !(height > 0.0))
    throw PreconditionError("measure_fwhm: peak is less than 20% above the baseline");
  const double half = r.baseline + 0.5 * height;
  std::size_t lo = peak, hi = peak;
  while (lo > 0 && v[lo] >= half) --lo;
  while (hi + 1 < n && v[hi] >= half) ++hi;
  if (v[lo] >= half || v[hi] >= half)
    throw PreconditionError("measure_fwhm: half maximum not reached inside the trace");
  auto cross = [&](std::size_t i, std::size_t j) {
    return t[i] + (half - v[i]) * (t[j] - t[i]) / (v[j] - v[i]);
  };
  r.width = cross(hi - 1, hi) - cross(lo, lo + 1);
  return r;
}

}  // namespace bfc
