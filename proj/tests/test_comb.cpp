#include <cmath>

#include <gtest/gtest.h>

#include "bfc/comb.hpp"
#include "bfc/correlator.hpp"
#include "bfc/errors.hpp"
#include "bfc/schmidt.hpp"
#include "bfc/units.hpp"

using namespace bfc;

namespace {

CombSpec paper_pulsed_comb(int d) { return CombSpec::uniform(0.0, ghz(40.5), ghz(0.2), 1, d); }
PumpSpec paper_pump() { return PumpSpec::gaussian(ghz(1.1), ns(20)); }

// Half-maximum width of |f|^2 sampled on a uniform grid.
double power_fwhm(const SampledSpectrum& s) {
  std::size_t peak = 0;
  for (std::size_t i = 0; i < s.value.size(); ++i)
    if (std::norm(s.value[i]) > std::norm(s.value[peak])) peak = i;
  double half = 0.5 * std::norm(s.value[peak]);
  std::size_t lo = peak, hi = peak;
  while (std::norm(s.value[lo]) > half) --lo;
  while (std::norm(s.value[hi]) > half) ++hi;
  auto at = [&](std::size_t i, std::size_t j) {
    double a = std::norm(s.value[i]), b = std::norm(s.value[j]);
    return s.axis[i] + (half - a) / (b - a) * (s.axis[j] - s.axis[i]);
  };
  return at(hi - 1, hi) - at(lo, lo + 1);
}

}  // namespace

TEST(Lorentzian, RealPeakAndHalfWidth) {
  double g = ghz(0.2), c = ghz(3.0);
  cdouble peak = lorentzian_line(c, g, c);
  EXPECT_EQ(peak.imag(), 0.0);
  EXPECT_NEAR(peak.real(), 2.0 * std::sqrt(g / two_pi) / g, 1e-15 * peak.real());
  EXPECT_NEAR(std::norm(lorentzian_line(c, g, c + g / 2)), 0.5 * std::norm(peak), 1e-12 * std::norm(peak));
  EXPECT_NEAR(std::norm(lorentzian_line(c, g, c - g / 2)), 0.5 * std::norm(peak), 1e-12 * std::norm(peak));
}

TEST(Lorentzian, UnitPowerNormalisation) {
  double g = ghz(0.2);
  // |l|^2 integrates in closed form on [-L, L]: (2/pi) atan(2L/g).
  double h = g / 200.0, L = 2000.0 * g, sum = 0.0;
  for (double w = -L; w <= L; w += h) sum += std::norm(lorentzian_line(0.0, g, w)) * h;
  EXPECT_NEAR(sum, 2.0 / std::numbers::pi * std::atan(2.0 * L / g), 1e-6);
  EXPECT_NEAR(sum, 1.0, 1e-3);
}

TEST(Lorentzian, RejectsNonPositiveGamma) {
  EXPECT_THROW(lorentzian_line(0.0, 0.0, 1.0), InvalidParameter);
  EXPECT_THROW(lorentzian_line(0.0, -1.0, 1.0), InvalidParameter);
}

TEST(CwMarginal, SinglePeakAtFirstBin) {
  CombSpec c = CombSpec::uniform(ghz(193000), ghz(40.5), ghz(0.25), 13, 1);
  SampledSpectrum s = build_cw_marginal(c);
  ASSERT_GE(c.linewidth / s.axis.step, 32.0 - 1e-9);
  std::size_t peak = 0;
  for (std::size_t i = 0; i < s.value.size(); ++i)
    if (std::abs(s.value[i]) > std::abs(s.value[peak])) peak = i;
  EXPECT_NEAR(s.axis[peak], c.line(0), s.axis.step);
}

TEST(CwMarginal, ThreeEqualPeaksOnThePaperBins) {
  CombSpec c = CombSpec::uniform(0.0, ghz(40.5), ghz(0.25), 12, 3);
  SampledSpectrum s = build_cw_marginal(c);
  // Outer lines see one neighbour's tail, the middle line two: (gamma / 2 fsr)^2 ~ 1e-5.
  double outer = std::abs(cw_marginal_at(c, c.line(0)));
  EXPECT_NEAR(std::abs(cw_marginal_at(c, c.line(2))), outer, 1e-9 * outer);
  for (int j = 0; j < 3; ++j) {
    EXPECT_NEAR(c.line(j), ghz(40.5) * (12 + j), 1.0);
    EXPECT_NEAR(std::abs(cw_marginal_at(c, c.line(j))), outer, 1e-4 * outer);
  }
  EXPECT_LE(s.axis.start, c.line(0) - 5 * c.linewidth + s.axis.step);
  EXPECT_GE(s.axis.back(), c.line(2) + 5 * c.linewidth - s.axis.step);
}

TEST(CwMarginal, CoarseGridIsAResolutionError) {
  CombSpec c = CombSpec::uniform(0.0, ghz(40.5), ghz(0.25), 1, 2);
  EXPECT_THROW(build_cw_marginal(c, 4.0), ResolutionError);
}

TEST(PumpConvolution, MonochromaticIsWrongRegime) {
  EXPECT_THROW(compute_fp(PumpSpec::monochromatic(), ghz(0.2)), RegimeError);
}

TEST(PumpConvolution, GridCoversEightWidths) {
  PumpSpec p = paper_pump();
  SampledSpectrum f = compute_fp(p, ghz(0.2));
  EXPECT_GE(f.axis.back() - f.axis.start, 8.0 * (p.effective_bandwidth() + 2 * ghz(0.2)) * (1 - 1e-9));
}

TEST(PumpConvolution, MatchesFineRiemannSum) {
  PumpSpec p = paper_pump();
  double g = ghz(0.2);
  PumpConvolution fp(p, g);
  double h = fp.quadrature_step() / 4.0;
  double L = 12.0 * p.effective_bandwidth();
  for (double x : {0.0, ghz(0.1), ghz(-0.37), ghz(0.9), ghz(2.0)}) {
    cdouble sum = 0.0;
    for (double w = -L; w <= L; w += h)
      sum += p.amplitude(w) * lorentzian_line(0.0, g, w) * p.amplitude(x - w) *
             lorentzian_line(0.0, g, x - w);
    sum *= h;
    EXPECT_LE(std::abs(fp(x) - sum), 1e-6 * std::abs(sum)) << "x = " << to_ghz(x) << " GHz";
  }
}

TEST(PumpConvolution, NarrowPumpCollapsesToALine) {
  double g = ghz(0.2);
  PumpSpec wide = PumpSpec::gaussian(ghz(1.1), ns(20));
  PumpSpec narrow = PumpSpec::gaussian(ghz(0.01), ns(20));
  PumpConvolution fw(wide, g), fn(narrow, g);
  double x = ghz(0.05);
  EXPECT_LT(std::abs(fn(x)) / std::abs(fn(0.0)), 1e-4);
  EXPECT_GT(std::abs(fw(x)) / std::abs(fw(0.0)), 0.5);
}

TEST(PulsedJsa, SingleIslandForOneBin) {
  JointSpectrum js = build_pulsed_jsa(paper_pulsed_comb(1), paper_pump());
  ASSERT_EQ(js.islands.size(), 1u);
  EXPECT_NEAR(js.norm(), 1.0, 1e-12);
}

TEST(PulsedJsa, DiagonalIslandsOnly) {
  CombSpec c = paper_pulsed_comb(3);
  JsiResult r = jsi_and_car(build_pulsed_jsa(c, paper_pump()), c);
  double min_diag = r.jsi.diagonal().minCoeff(), max_off = 0.0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      if (a != b) max_off = std::max(max_off, r.jsi(a, b));
  EXPECT_GT(min_diag, 0.3);
  EXPECT_LT(max_off, 1e-6);
}

TEST(PulsedJsa, ResourceCapGivesSuggestion) {
  GridOptions opt;
  opt.max_cells = 1000;
  try {
    build_pulsed_jsa(paper_pulsed_comb(2), paper_pump(), opt);
    FAIL() << "expected ResourceError";
  } catch (const ResourceError& e) {
    EXPECT_GT(e.suggested, 0.0);
    EXPECT_LT(e.suggested, opt.samples_per_linewidth);
  }
}

TEST(PulsedJsa, GridDoublingMovesGbarLessThanHalfPercent) {
  CombSpec c = paper_pulsed_comb(1);
  auto gbar = [&](double spl) {
    GridOptions o;
    o.samples_per_linewidth = spl;
    auto tr = g2_density_numeric(build_pulsed_jsa(c, paper_pump(), o), tau_axis(ns(8), ps(4)));
    return integrated_g2(tr);
  };
  double a = gbar(8.0), b = gbar(16.0);
  EXPECT_LT(std::abs(a - b) / b, 5e-3);
}

TEST(PulsedJsa, RigidPumpShiftLeavesTracesUnchanged) {
  CombSpec a = paper_pulsed_comb(2), b = a;
  b.pump_center = ghz(193414.0);
  auto tau = tau_axis(ns(2), ps(50));
  auto ta = g2_density_numeric(build_pulsed_jsa(a, paper_pump()), tau);
  auto tb = g2_density_numeric(build_pulsed_jsa(b, paper_pump()), tau);
  for (std::size_t i = 0; i < tau.size(); ++i)
    EXPECT_NEAR(ta.value[i], tb.value[i], 1e-6 * ta.value[tau.size() / 2]);
}

TEST(PulsedJsa, GaussianSubstituteWithMatchedWidthsWithinFivePercent) {
  double g = ghz(0.2);
  PumpSpec p = paper_pump();
  CombSpec c = paper_pulsed_comb(1);
  double lorentz = integrated_g2(g2_density_numeric(build_pulsed_jsa(c, p), tau_axis(ns(8), ps(4))));

  // Match the power FWHM of the pump factor F_p and of each resonance line:
  // exp(-2 x^2 / s^2) has FWHM s * sqrt(2 ln 2).
  const double k = std::sqrt(2.0 * std::log(2.0));
  GaussianJsaSpec gs;
  gs.sigma_p = power_fwhm(compute_fp(p, g)) / k;
  gs.sigma_r = g / k;
  gs.comb = c;
  double gauss = integrated_g2(g2_density_numeric(build_gaussian_jsa(gs), tau_axis(ns(8), ps(4))));
  EXPECT_LT(std::abs(gauss - lorentz) / lorentz, 0.05);
}

TEST(GaussianJsa, SigmaAboveQuarterFsrIsWrongRegime) {
  GaussianJsaSpec gs;
  gs.comb = CombSpec::uniform(0.0, ghz(1.0), ghz(0.2), 1, 2);
  gs.sigma_p = ghz(0.2);
  gs.sigma_r = ghz(0.3);
  EXPECT_THROW(build_gaussian_jsa(gs), RegimeError);
}

TEST(GaussianJsa, BroadPumpLimitIsSeparable) {
  GaussianJsaSpec gs;
  gs.comb = CombSpec::uniform(0.0, ghz(100.0), ghz(0.2), 1, 1);
  gs.sigma_r = ghz(0.2);
  gs.sigma_p = ghz(20.0);
  EXPECT_NEAR(schmidt_number(build_gaussian_jsa(gs)).schmidt_number, 1.0, 5e-3);
}

TEST(Jsi, SingleBinHasInfiniteCar) {
  CombSpec c = paper_pulsed_comb(1);
  JsiResult r = jsi_and_car(build_pulsed_jsa(c, paper_pump()), c);
  EXPECT_EQ(r.jsi.rows(), 1);
  EXPECT_TRUE(r.car_infinite);
  EXPECT_TRUE(std::isinf(r.car));
}

TEST(Jsi, CwModelIsDiagonalDominant) {
  CombSpec c = CombSpec::uniform(0.0, ghz(40.5), ghz(0.25), 12, 3);
  JsiResult r = jsi_and_car(build_cw_jsa(c), c);
  double min_diag = r.jsi.diagonal().minCoeff(), max_off = 0.0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      if (a != b) max_off = std::max(max_off, r.jsi(a, b));
  EXPECT_GT(min_diag, max_off);
}

TEST(Jsi, AccidentalFloorSetsTheCar) {
  CombSpec c = paper_pulsed_comb(3);
  JointSpectrum js = build_pulsed_jsa(c, paper_pump());
  JsiResult clean = jsi_and_car(js, c);
  for (double car : {27.0, 30.0}) {
    JsiResult r = jsi_and_car(js, c, floor_for_car(clean.jsi, car));
    EXPECT_FALSE(r.car_infinite);
    EXPECT_NEAR(r.car, car, 0.01 * car);
  }
}
