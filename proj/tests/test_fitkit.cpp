#include <cmath>

#include <gtest/gtest.h>

#include "bfc/correlator.hpp"
#include "bfc/errors.hpp"
#include "bfc/fitkit.hpp"
#include "bfc/units.hpp"

using namespace bfc;

namespace {

std::vector<double> phases(int n = 25) {
  std::vector<double> p;
  for (int i = 0; i < n; ++i) p.push_back(-std::numbers::pi + i * two_pi / (n - 1));
  return p;
}

// Ideal d-bin fringe at zero delay plus a constant floor giving visibility v.
std::vector<double> fringe(int d, double v, const std::vector<double>& phi) {
  double top = d * d, floor = top * (1.0 - v) / (2.0 * v);
  std::vector<double> out;
  for (double p : phi) {
    std::complex<double> s = 0.0;
    for (int k = 0; k < d; ++k) s += (k % 2 ? -1.0 : 1.0) * std::polar(1.0, k * p);
    out.push_back(std::norm(s) + floor);
  }
  return out;
}

CorrelationTrace gaussian_peak(double fwhm, double step) {
  CorrelationTrace t;
  t.kind = TraceKind::rate;
  t.tau = tau_axis(ns(2), step);
  for (double x : t.tau) t.value.push_back(std::exp(-0.5 * std::pow(x * fwhm_per_sigma / fwhm, 2)));
  return t;
}

}  // namespace

TEST(Fit, RecoversNoiselessParameters) {
  for (int d : {2, 3}) {
    CombSpec c = CombSpec::uniform(0.0, ghz(1.0065), ghz(0.25), 1, d);
    CorrelationTrace t = g2_cw(c, tau_axis(ns(5), ps(16)));
    FitResult r = fit_cw_model(t);
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(to_ghz(r.gamma), 0.25, 0.005 * 0.25) << d;
    EXPECT_NEAR(to_ghz(r.delta_omega), 1.0065, 0.005 * 1.0065) << d;
  }
}

TEST(Fit, RecoversJitteredBinnedParameters) {
  CombSpec c = CombSpec::uniform(0.0, ghz(1.0065), ghz(0.25), 1, 3);
  CorrelationTrace t = jitter_average(g2_cw(c, tau_axis(ns(6), ps(1))), ps(110), ps(64));
  FitOptions o;
  o.jitter_fwhm = ps(110);
  o.bin_width = ps(64);
  o.dimension = 3;
  FitResult r = fit_cw_model(t, o);
  EXPECT_NEAR(to_ghz(r.gamma), 0.25, 0.005 * 0.25);
  EXPECT_NEAR(to_ghz(r.delta_omega), 1.0065, 0.005 * 1.0065);
}

TEST(Fit, FlatTraceDoesNotConverge) {
  CorrelationTrace t;
  t.tau = tau_axis(ns(3), ps(16));
  t.value.assign(t.tau.size(), 1.0);
  FitOptions o;
  o.dimension = 2;
  EXPECT_THROW(fit_cw_model(t, o), FitError);
}

TEST(Fit, NeedsTheBinCount) {
  CorrelationTrace t = g2_cw(CombSpec::uniform(0.0, ghz(1.0), ghz(0.25), 1, 2), tau_axis(ns(3), ps(16)));
  t.meta.params.clear();
  EXPECT_THROW(fit_cw_model(t), PreconditionError);
}

TEST(Visibility, IdealFringe) {
  auto phi = phases();
  for (int d : {2, 3}) {
    VisibilityResult r = visibility_and_threshold(phi, fringe(d, 1.0, phi), d);
    EXPECT_NEAR(r.visibility, 1.0, 1e-9);
    EXPECT_TRUE(r.violates);
  }
}

TEST(Visibility, PaperValuesAndThresholds) {
  auto phi = phases();
  EXPECT_DOUBLE_EQ(bell_threshold(2), 0.71);
  EXPECT_DOUBLE_EQ(bell_threshold(3), 0.77);
  VisibilityResult a = visibility_and_threshold(phi, fringe(2, 0.94, phi), 2);
  EXPECT_NEAR(a.visibility, 0.94, 1e-6);
  EXPECT_TRUE(a.violates);
  VisibilityResult b = visibility_and_threshold(phi, fringe(3, 0.89, phi), 3);
  EXPECT_NEAR(b.visibility, 0.89, 1e-6);
  EXPECT_TRUE(b.violates);
  VisibilityResult c = visibility_and_threshold(phi, fringe(2, 0.70, phi), 2);
  EXPECT_NEAR(c.visibility, 0.70, 1e-6);
  EXPECT_FALSE(c.violates);
  VisibilityResult e = visibility_and_threshold(phi, fringe(3, 0.76, phi), 3);
  EXPECT_FALSE(e.violates);
}

TEST(Visibility, ScaleInvariant) {
  auto phi = phases();
  auto v = fringe(3, 0.85, phi);
  auto w = v;
  for (auto& x : w) x *= 37.5;
  EXPECT_NEAR(visibility_and_threshold(phi, v, 3).visibility,
              visibility_and_threshold(phi, w, 3).visibility, 1e-12);
}

TEST(Visibility, UndersampledFringe) {
  auto phi = phases(7);
  EXPECT_THROW(visibility_and_threshold(phi, fringe(2, 0.9, phi), 2), SamplingError);
  std::vector<double> half;
  for (int i = 0; i < 13; ++i) half.push_back(i * std::numbers::pi / 12.0);
  EXPECT_THROW(visibility_and_threshold(half, fringe(2, 0.9, half), 2), SamplingError);
}

TEST(Fwhm, GaussianWithinGridResolution) {
  double step = ps(2);
  FwhmResult r = measure_fwhm(gaussian_peak(ps(300), step), FwhmTarget::central_peak);
  EXPECT_NEAR(r.width, ps(300), step);
  EXPECT_NEAR(r.peak_tau, 0.0, 1e-15);
}

TEST(Fwhm, AffineInvariantAboveBaseline) {
  CombSpec c = CombSpec::uniform(0.0, ghz(1.0065), ghz(0.25), 1, 2);
  CorrelationTrace t = g2_cw(c, tau_axis(ns(3), ps(2)));
  double w = measure_fwhm(t, FwhmTarget::central_peak).width;
  CorrelationTrace s = t;
  for (auto& v : s.value) v = 1.0 + 3.7 * (v - 1.0);
  EXPECT_NEAR(measure_fwhm(s, FwhmTarget::central_peak).width, w, 1e-15);
}

TEST(Fwhm, VernierBeatWidthForTwoBins) {
  CombSpec c = CombSpec::uniform(0.0, ghz(1.0065), ghz(0.25), 1, 2);
  double w = measure_fwhm(g2_cw(c, tau_axis(ns(3), ps(1))), FwhmTarget::central_peak).width;
  EXPECT_NEAR(to_ps(w), 480.0, 20.0);
}

TEST(Fwhm, TwoEqualPeaksAreAmbiguous) {
  CorrelationTrace t;
  t.kind = TraceKind::rate;
  t.tau = tau_axis(ns(2), ps(2));
  for (double x : t.tau)
    t.value.push_back(std::exp(-std::pow((x - ns(0.5)) / ps(100), 2)) +
                      std::exp(-std::pow((x + ns(0.5)) / ps(100), 2)));
  try {
    measure_fwhm(t, FwhmTarget::central_peak);
    FAIL() << "expected AmbiguityError";
  } catch (const AmbiguityError& e) {
    EXPECT_EQ(e.candidates.size(), 2u);
  }
}

TEST(Fwhm, WeakPeakIsRejected) {
  CorrelationTrace t;
  t.kind = TraceKind::g2;
  t.tau = tau_axis(ns(2), ps(2));
  for (double x : t.tau) t.value.push_back(1.0 + 0.1 * std::exp(-std::pow(x / ps(100), 2)));
  EXPECT_THROW(measure_fwhm(t, FwhmTarget::central_peak), PreconditionError);
}
