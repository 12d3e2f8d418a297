#include <cmath>

#include <gtest/gtest.h>

#include "bfc/comb.hpp"
#include "bfc/correlator.hpp"
#include "bfc/errors.hpp"
#include "bfc/schmidt.hpp"
#include "bfc/units.hpp"

using namespace bfc;

namespace {

GaussianJsaSpec gaussian_spec(double sp_ghz, double sr_ghz, int d = 1) {
  GaussianJsaSpec g;
  g.sigma_p = ghz(sp_ghz);
  g.sigma_r = ghz(sr_ghz);
  g.comb = CombSpec::uniform(0.0, ghz(1.0), ghz(0.2), 1, d);
  return g;
}

double analytic_k(double sp, double sr) {
  double a = 1.0 / (sp * sp) + 1.0 / (sr * sr), b = 1.0 / (sp * sp);
  return a / std::sqrt(a * a - b * b);
}

JointSpectrum paper_pulsed(double spl = 16.0) {
  GridOptions o;
  o.samples_per_linewidth = spl;
  return build_pulsed_jsa(CombSpec::uniform(0.0, ghz(40.5), ghz(0.2), 1, 1),
                          PumpSpec::gaussian(ghz(1.1), ns(20)), o);
}

}  // namespace

TEST(Schmidt, SeparableProductHasKOne) {
  JsaGrid g;
  g.signal = {0.0, 1e8, 60};
  g.idler = {-3e9, 1e8, 50};
  g.amplitude.resize(60, 50);
  for (int a = 0; a < 60; ++a)
    for (int m = 0; m < 50; ++m)
      g.amplitude(a, m) = std::exp(-0.01 * (a - 30) * (a - 30)) * cdouble(std::cos(0.2 * m), 0.3 + m * 0.01);
  JointSpectrum js(g);
  js.normalize();
  SchmidtResult r = schmidt_number(js);
  EXPECT_NEAR(r.schmidt_number, 1.0, 5e-3);
  EXPECT_EQ(r.retained, 1);
}

TEST(Schmidt, GaussianAnalyticValues) {
  for (auto [sp, sr] : {std::pair{0.2, 0.2}, std::pair{0.025, 0.2}, std::pair{0.1, 0.15}}) {
    SchmidtResult r = schmidt_number(build_gaussian_jsa(gaussian_spec(sp, sr)));
    EXPECT_NEAR(r.schmidt_number, analytic_k(sp, sr), 0.01 * analytic_k(sp, sr)) << sp << " " << sr;
  }
  EXPECT_NEAR(analytic_k(0.2, 0.2), 2.0 / std::sqrt(3.0), 1e-12);
}

TEST(Schmidt, WeightsSortedAndComplete) {
  SchmidtResult r = schmidt_number(build_gaussian_jsa(gaussian_spec(0.025, 0.2)));
  double s = 0.0;
  for (std::size_t i = 0; i < r.weights.size(); ++i) {
    s += r.weights[i];
    if (i) EXPECT_LE(r.weights[i], r.weights[i - 1]);
  }
  EXPECT_GE(s, 0.999);
  EXPECT_LE(s, 1.0 + 1e-9);
  EXPECT_GE(r.schmidt_number, 1.0);
}

TEST(Schmidt, IndependentBinsAddUp) {
  double k1 = schmidt_number(build_gaussian_jsa(gaussian_spec(0.2, 0.2, 1))).schmidt_number;
  double k3 = schmidt_number(build_gaussian_jsa(gaussian_spec(0.2, 0.2, 3))).schmidt_number;
  EXPECT_NEAR(k3, 3.0 * k1, 1e-3 * k3);
}

TEST(Schmidt, LorentzianPulsedModel) {
  SchmidtResult r = schmidt_number(paper_pulsed());
  EXPECT_NEAR(gbar_from_k(r.schmidt_number, 1), 1.90, 0.02);
}

TEST(Schmidt, RefinementConverges) {
  SchmidtResult r = schmidt_number_refined([](double f) { return paper_pulsed(8.0 * f); });
  EXPECT_NEAR(r.schmidt_number, schmidt_number(paper_pulsed(16.0)).schmidt_number, 0.01 * r.schmidt_number);
}

TEST(Schmidt, RefinementFailureIsReported) {
  auto unstable = [](double f) {
    return build_gaussian_jsa(f > 1.5 ? gaussian_spec(0.025, 0.2) : gaussian_spec(0.2, 0.2));
  };
  EXPECT_THROW(schmidt_number_refined(unstable), ResolutionError);
}

TEST(Schmidt, ConsistentWithIntegratedDensity) {
  JointSpectrum lor = paper_pulsed();
  double k = schmidt_number(lor).schmidt_number;
  double gbar = integrated_g2(g2_density_numeric(lor, tau_axis(ns(8), ps(4))));
  EXPECT_NEAR(gbar, gbar_from_k(k, 1), 0.02 * gbar);

  JointSpectrum gau = build_gaussian_jsa(gaussian_spec(0.025, 0.2));
  k = schmidt_number(gau).schmidt_number;
  gbar = integrated_g2(g2_density_numeric(gau, tau_axis(ns(60), ps(10))));
  EXPECT_NEAR(gbar, gbar_from_k(k, 1), 0.02 * gbar);
}

TEST(Schmidt, InvariantUnderGlobalPhaseAndAxisShifts) {
  JointSpectrum js = build_gaussian_jsa(gaussian_spec(0.025, 0.2));
  double k = schmidt_number(js).schmidt_number;
  JointSpectrum moved = js;
  for (auto& g : moved.islands) {
    g.amplitude *= std::polar(1.0, 0.7);
    g.signal.start += 17 * g.signal.step;
    g.idler.start -= 5 * g.idler.step;
  }
  EXPECT_NEAR(schmidt_number(moved).schmidt_number, k, 1e-9 * k);
}

TEST(Schmidt, GbarFromK) {
  EXPECT_DOUBLE_EQ(gbar_from_k(1.0, 1), 2.0);
  EXPECT_NEAR(gbar_from_k(1.14, 1), 1.877, 5e-4);
  EXPECT_NEAR(gbar_from_k(1.14, 2), 1.439, 5e-4);
  EXPECT_NEAR(gbar_from_k(1.14, 3), 1.292, 5e-4);
  EXPECT_NEAR(gbar_from_k(5.88, 1), 1.170, 5e-4);
  EXPECT_THROW(gbar_from_k(0.5, 1), InvalidParameter);
}
