#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "bfc/correlator.hpp"
#include "bfc/eomod.hpp"
#include "bfc/errors.hpp"
#include "bfc/units.hpp"

using namespace bfc;

namespace {

ModulationSpec mod(double rf_ghz, double index, int center, double w_ghz = 0.0) {
  ModulationSpec m;
  m.rf = ghz(rf_ghz);
  m.index = index;
  m.center_bin = center;
  m.filter_halfwidth = ghz(w_ghz);
  return m;
}

}  // namespace

TEST(Sidebands, NoModulationKeepsTheCarrier) {
  SidebandWeights w = sideband_weights(0.0, 3);
  EXPECT_DOUBLE_EQ(std::abs(w(0)), 1.0);
  for (int n = 1; n <= 3; ++n) {
    EXPECT_EQ(std::abs(w(n)), 0.0);
    EXPECT_EQ(std::abs(w(-n)), 0.0);
  }
}

// Known difference: J0/J1 at 1.43 is 1.0061, just outside a 0.5% balance;
// the balance point itself is 1.4347.
TEST(Sidebands, OrdersZeroAndOneBalanceNearOnePointFourThree) {
  SidebandWeights w = sideband_weights(1.43, 2);
  double r = std::abs(w(0)) / std::abs(w(1));
  EXPECT_NEAR(r, std::cyl_bessel_j(0, 1.43) / std::cyl_bessel_j(1, 1.43), 1e-12);
  EXPECT_GT(r - 1.0, 5e-3);
  EXPECT_LT(r - 1.0, 1e-2);
  SidebandWeights at_root = sideband_weights(1.4347, 2);
  EXPECT_NEAR(std::abs(at_root(0)) / std::abs(at_root(1)), 1.0, 1e-4);
}

TEST(Sidebands, PhaseFactorIsIToTheN) {
  SidebandWeights w = sideband_weights(1.0, 3);
  for (int n = -3; n <= 3; ++n) {
    cdouble expect = std::cyl_bessel_j(std::abs(n), 1.0) * (n < 0 && n % 2 ? -1.0 : 1.0) *
                     std::pow(cdouble(0, 1), n);
    EXPECT_NEAR(std::abs(w(n) - expect), 0.0, 1e-14) << n;
  }
}

TEST(Sidebands, UnitarityAndAutoExtension) {
  for (double m : {0.5, 1.43, 3.0}) {
    SidebandWeights w = sideband_weights(m, 1);
    EXPECT_GE(w.captured(), 0.999) << m;
    double total = 0.0;
    SidebandWeights wide = sideband_weights(m, 30);
    for (int n = -30; n <= 30; ++n) total += std::norm(wide(n));
    EXPECT_NEAR(total, 1.0, 1e-12) << m;
  }
  EXPECT_GT(sideband_weights(3.0, 1).max_order, 1);
}

TEST(EqualizingIndex, KnownRoots) {
  EXPECT_EQ(equalizing_index(1), 0.0);
  for (int d : {2, 3}) {
    double m = equalizing_index(d);
    EXPECT_NEAR(m, 1.435, 5e-3);
    EXPECT_NEAR(std::cyl_bessel_j(0.0, m), std::cyl_bessel_j(1.0, m), 1e-12);
  }
}

TEST(EqualizingIndex, LargerCombsNeedShaping) {
  try {
    equalizing_index(5);
    FAIL() << "expected UnsupportedError";
  } catch (const UnsupportedError& e) {
    EXPECT_GT(e.best_effort, 0.0);
  }
}

TEST(Vernier, DetuningOfBothDevices) {
  CombSpec a = CombSpec::uniform(0.0, ghz(40.5), ghz(0.25), 12, 3);
  CombSpec b = CombSpec::uniform(0.0, ghz(40.4), ghz(0.335), 3, 2);
  EXPECT_NEAR(to_ghz(vernier_detuning(a, mod(39.5, 1.43, 13))), 1.0, 1e-9);
  EXPECT_NEAR(to_ghz(vernier_detuning(b, mod(39.4, 1.43, 3))), 1.0, 1e-9);
  CombSpec r = vernier_map(a, mod(39.5, 1.43, 13));
  EXPECT_NEAR(to_ghz(r.fsr), 1.0, 1e-9);
  EXPECT_EQ(r.linewidth, a.linewidth);
}

TEST(Vernier, DegenerateDriveIsRejected) {
  CombSpec a = CombSpec::uniform(0.0, ghz(40.5), ghz(0.25), 12, 3);
  EXPECT_THROW(vernier_map(a, mod(40.5, 1.43, 13)), DegenerateDetuning);
}

TEST(Vernier, LinesLandAtTheSidebandFrequencies) {
  CombSpec a = CombSpec::uniform(ghz(193000), ghz(40.5), ghz(0.25), 12, 3);
  ModulationSpec m = mod(39.5, 1.43, 13);
  CombSpec r = vernier_map(a, m);
  for (int j = 0; j < r.dimension; ++j) {
    int k = r.parent_bin(j);
    double expect = a.pump_center + 13 * m.rf + k * (a.fsr - m.rf);
    EXPECT_NEAR(r.line(j), expect, 1e-6 * a.fsr) << j;
    // Idler partner stays on the parent grid.
    EXPECT_NEAR(r.idler_line(j), a.pump_center - k * a.fsr, 1e-6 * a.fsr) << j;
  }
}

TEST(Vernier, ParentUniquenessOverRandomDrives) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> fsr(20.0, 60.0), frac(0.005, 0.08), u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    int d = 1 + trial % 3;
    double f = fsr(rng);
    double delta = frac(rng) * f / d * (u(rng) < 0.5 ? 1.0 : -1.0);
    CombSpec a = CombSpec::uniform(0.0, ghz(f), ghz(0.25 * std::abs(delta)), 5, d);
    CombSpec r = vernier_map(a, mod(f - delta, 1.0 + u(rng), 5 + d / 2));
    std::set<int> parents(r.parent_bins.begin(), r.parent_bins.end());
    EXPECT_EQ(static_cast<int>(parents.size()), d);
    for (int j = 0; j + 1 < d; ++j) EXPECT_NEAR(r.line(j + 1) - r.line(j), ghz(std::abs(delta)), 1e-3);
  }
}

TEST(Vernier, EqualizedWeightsForThreeBins) {
  CombSpec a = CombSpec::uniform(0.0, ghz(40.5), ghz(0.25), 12, 3);
  CombSpec r = vernier_map(a, mod(39.5, equalizing_index(3), 13));
  for (int j = 1; j < 3; ++j)
    EXPECT_NEAR(std::abs(r.amplitudes[j]) / std::abs(r.amplitudes[0]), 1.0, 5e-3);
}

TEST(Vernier, ModulationConservesPower) {
  CombSpec a = CombSpec::uniform(0.0, ghz(40.5), ghz(0.25), 12, 3);
  for (double m : {0.0, 0.5, 1.43, 3.0}) {
    double total = 0.0;
    for (const auto& l : modulated_spectrum(a, mod(39.5, m, 13))) total += std::norm(l.weight);
    EXPECT_NEAR(total, 1.0, 1e-12) << m;
  }
}

TEST(Filter, DefaultWindowKeepsThreeLines) {
  CombSpec a = CombSpec::uniform(0.0, ghz(40.5), ghz(0.25), 12, 3);
  ModulationSpec m = mod(39.5, 1.43, 13);
  EXPECT_NEAR(to_ghz(default_filter_halfwidth(3, ghz(1.0))), 2.4, 1e-12);
  CombSpec f = apply_filter(vernier_map(a, m), mod(39.5, 1.43, 13, 1.6));
  ASSERT_EQ(f.dimension, 3);
  EXPECT_NEAR(to_ghz(f.line(1) - f.line(0)), 1.0, 1e-9);
  EXPECT_NEAR(to_ghz(f.line(2) - f.line(1)), 1.0, 1e-9);
  EXPECT_EQ(f.parent_bins.size(), 3u);
}

TEST(Filter, SingleBinRenormalises) {
  CombSpec a = CombSpec::uniform(0.0, ghz(40.5), ghz(0.25), 13, 1);
  CombSpec f = apply_filter(vernier_map(a, mod(39.5, 1.43, 13)), mod(39.5, 1.43, 13));
  ASSERT_EQ(f.dimension, 1);
  EXPECT_NEAR(std::abs(f.amplitudes[0]), 1.0, 1e-12);
  EXPECT_LT(f.transmission, 1.0);
}

TEST(Filter, NarrowWindowLeavesTheCentralLine) {
  CombSpec a = CombSpec::uniform(0.0, ghz(40.5), ghz(0.25), 12, 3);
  CombSpec f = apply_filter(vernier_map(a, mod(39.5, 1.43, 13)), mod(39.5, 1.43, 13, 0.4));
  ASSERT_EQ(f.dimension, 1);
  EXPECT_EQ(f.parent_bins[0], 13);
  auto tau = tau_axis(ns(2), ps(10));
  CorrelationTrace t = g2_cw(f, tau);
  EXPECT_NEAR(t.value[tau.size() / 2], 2.0, 1e-12);
  for (std::size_t i = 0; i < tau.size(); ++i)
    EXPECT_NEAR(t.value[i], g2_cw_value(f.linewidth, f.fsr, 1, tau[i]), 1e-12);
}

TEST(Filter, ClippedLineIsReported) {
  CombSpec a = CombSpec::uniform(0.0, ghz(40.5), ghz(0.25), 12, 3);
  try {
    apply_filter(vernier_map(a, mod(39.5, 1.43, 13)), mod(39.5, 1.43, 13, 1.05));
    FAIL() << "expected FilterClipping";
  } catch (const FilterClipping& e) {
    EXPECT_GT(e.loss, 0.01);
  }
}

TEST(Vernier, MagnificationMapsParentTraces) {
  // The rescaled comb (gamma_r, delta) is the parent (gamma_r * s, delta * s)
  // with the delay axis compressed by s = Delta omega / delta.
  double dw = ghz(40.5), delta = ghz(1.0), s = dw / delta, g = ghz(0.25);
  for (int d : {1, 2, 3})
    for (double t = -3e-9; t <= 3e-9; t += 37e-12)
      EXPECT_NEAR(g2_cw_value(g, delta, d, t), g2_cw_value(g * s, dw, d, t / s), 1e-12);
}
