#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "bfc/comb.hpp"
#include "bfc/correlator.hpp"
#include "bfc/errors.hpp"
#include "bfc/photosim.hpp"
#include "bfc/units.hpp"

using namespace bfc;

namespace {

CombSpec cw_comb(int d) { return CombSpec::uniform(0.0, ghz(40.5), ghz(0.25), 13, d); }

DetectorModel detector(double jitter_ps = 0.0) {
  DetectorModel det;
  det.jitter_fwhm = ps(jitter_ps);
  det.bin_width = ps(64);
  return det;
}

CorrelationTrace d1_trace() { return g2_cw(cw_comb(1), tau_axis(ns(12), ps(2))); }

CorrelationTrace d1_density() {
  CorrelationTrace t = d1_trace();
  t.kind = TraceKind::density;
  for (auto& v : t.value) v -= 1.0;
  return t;
}

double mean(const std::vector<double>& x) { return std::accumulate(x.begin(), x.end(), 0.0) / x.size(); }

double stdev(const std::vector<double>& x) {
  double m = mean(x), s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / (x.size() - 1));
}

}  // namespace

TEST(Thermal, SingleBinBunching) {
  SimOptions o;
  o.half_window = ns(2);
  CoincidenceRecord rec = simulate_thermal_signal(cw_comb(1), PumpSpec::monochromatic(), 0.05,
                                                  detector(), 0.004, 7, o);
  CorrelationTrace g = estimate_g2_cw(rec);
  int z = rec.half_bins;
  // The 64 ps bin averages the cusp slightly below 2.
  double model = 0.0;
  for (int i = -32; i < 32; ++i) model += g2_cw_value(ghz(0.25), ghz(40.5), 1, ps(i + 0.5)) / 64.0;
  EXPECT_NEAR(g.value[z], model, 4.0 * g.stderr_[z]);
  EXPECT_GT(rec.total(), 10000u);
}

TEST(Thermal, DeterministicAcrossWorkers) {
  SimOptions o;
  o.half_window = ns(1);
  o.keep_tags = true;
  CoincidenceRecord a = simulate_thermal_signal(cw_comb(2), PumpSpec::monochromatic(), 0.05,
                                                detector(110), 0.0005, 99, o);
  o.workers = 3;
  CoincidenceRecord b = simulate_thermal_signal(cw_comb(2), PumpSpec::monochromatic(), 0.05,
                                                detector(110), 0.0005, 99, o);
  EXPECT_EQ(a.histogram, b.histogram);
  EXPECT_EQ(a.singles_a, b.singles_a);
  EXPECT_EQ(a.singles_b, b.singles_b);
  ASSERT_EQ(a.tags.size(), b.tags.size());
  for (std::size_t i = 0; i < a.tags.size(); ++i) {
    EXPECT_EQ(a.tags[i].arm, b.tags[i].arm);
    EXPECT_EQ(a.tags[i].time_ps, b.tags[i].time_ps);
  }
}

TEST(Thermal, ZeroBrightnessHasNoData) {
  CoincidenceRecord rec = simulate_thermal_signal(cw_comb(1), PumpSpec::monochromatic(), 0.0,
                                                  detector(), 0.001, 1);
  EXPECT_EQ(rec.total(), 0u);
  EXPECT_THROW(estimate_g2_cw(rec), NoDataError);
}

TEST(Thermal, BrightnessOutsideTwoPairRegime) {
  EXPECT_THROW(simulate_thermal_signal(cw_comb(1), PumpSpec::monochromatic(), 0.2, detector(), 0.001, 1),
               RegimeError);
}

TEST(Thermal, PulsedAreaAndRepetitionScaling) {
  CombSpec c = CombSpec::uniform(0.0, ghz(40.5), ghz(0.2), 1, 1);
  PumpSpec p = PumpSpec::gaussian(ghz(1.1), ns(20));
  SimOptions o;
  o.half_window = ns(8);
  JointSpectrum js = build_pulsed_jsa(c, p);
  CoincidenceRecord rec = simulate_thermal_signal(js, p, 1, 0.05, detector(110), 0.1, 5, o);
  ASSERT_TRUE(rec.rep_period.has_value());
  CorrelationTrace g = estimate_g2_density(rec);
  double area = 0.0;
  for (double v : g.value) area += v * g.step();
  EXPECT_NEAR(area, 1.90, 4.0 * area / std::sqrt(static_cast<double>(rec.total()))) << rec.total();

  CoincidenceRecord twice = rec;
  twice.rep_period = 2.0 * *rec.rep_period;
  CorrelationTrace h = estimate_g2_density(twice);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_DOUBLE_EQ(h.value[i], 0.5 * g.value[i]);
  EXPECT_THROW(estimate_g2_cw(rec), PreconditionError);
}

TEST(Density, DeterministicAcrossWorkers) {
  SimOptions o;
  o.half_window = ns(2);
  CoincidenceRecord a = simulate_from_density(d1_density(), 2e6, 30, detector(110), 0.05, 4, o);
  o.workers = 4;
  CoincidenceRecord b = simulate_from_density(d1_density(), 2e6, 30, detector(110), 0.05, 4, o);
  EXPECT_EQ(a.histogram, b.histogram);
  EXPECT_EQ(a.singles_a, b.singles_a);
}

TEST(Density, FlatTraceGivesFlatEstimate) {
  CorrelationTrace flat = d1_trace();
  flat.kind = TraceKind::rate;
  for (auto& v : flat.value) v = 1.0;
  const double span = flat.size() * flat.step();
  SimOptions o;
  o.half_window = ns(2);
  o.extra_singles_rate = 1e6;
  for (double pairs : {0.0, 1e4}) {
    CoincidenceRecord rec = simulate_from_density(flat, pairs, 2.0, detector(), 1.0, 8, o);
    CorrelationTrace g = estimate_g2_cw(rec);
    // Pairs spread evenly over the trace span sit on top of the accidentals.
    double s = 1e6 + pairs, expect = 1.0 + pairs / (s * s * span);
    double m = mean(g.value), chi2 = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) chi2 += std::pow((g.value[i] - m) / g.stderr_[i], 2);
    EXPECT_LT(chi2 / (g.size() - 1), 1.5) << pairs;
    EXPECT_NEAR(m, expect, 4.0 * m / std::sqrt(static_cast<double>(rec.total()))) << pairs;
  }
}

TEST(Density, CarMatchesConfiguredValue) {
  for (double car : {27.0, 30.0}) {
    CorrelationTrace t = d1_density();
    DetectorModel det = detector(110);
    SimOptions o;
    o.half_window = ns(10);
    CoincidenceRecord rec = simulate_from_density(t, 2e5, car, det, 1.0, 11, o);
    CarEstimate e = estimate_car(rec, car_window_for(t, det));
    EXPECT_FALSE(e.infinite);
    EXPECT_NEAR(e.car, car, 0.1 * car);
  }
}

TEST(Density, PureAccidentalsGiveUnitCar) {
  CorrelationTrace t = d1_density();
  SimOptions o;
  o.half_window = ns(10);
  o.extra_singles_rate = 2e6;
  CoincidenceRecord rec = simulate_from_density(t, 0.0, 30, detector(110), 0.2, 3, o);
  CarEstimate e = estimate_car(rec, car_window_for(t, detector(110)));
  EXPECT_NEAR(e.car, 1.0, 3.0 * e.stderr_);
}

TEST(Density, CarNotAboveOneIsRejected) {
  EXPECT_THROW(simulate_from_density(d1_density(), 1e5, 0.0, detector(), 0.01, 1), InvalidParameter);
  EXPECT_THROW(simulate_from_density(d1_density(), 1e5, -3.0, detector(), 0.01, 1), InvalidParameter);
}

TEST(Density, PeakErrorScalesAsInverseRootN) {
  SimOptions o;
  o.half_window = ns(1);
  auto peak_spread = [&](double acq) {
    std::vector<double> peaks;
    for (std::uint64_t s = 0; s < 100; ++s) {
      CoincidenceRecord rec = simulate_from_density(d1_trace(), 1e5, 30, detector(), acq, 1000 + s, o);
      peaks.push_back(estimate_g2_cw(rec).value[rec.half_bins]);
    }
    return stdev(peaks) / mean(peaks);
  };
  double ratio = peak_spread(0.02) / peak_spread(0.04);
  EXPECT_NEAR(ratio, std::sqrt(2.0), 0.25 * std::sqrt(2.0));
}

TEST(Density, EstimateConvergesToTheTrace) {
  CorrelationTrace t = d1_trace();
  DetectorModel det = detector(110);
  CorrelationTrace ref = jitter_average(t, det.jitter_fwhm, det.bin_width);
  SimOptions o;
  o.half_window = ns(2);
  double prev = 1e9;
  for (double acq : {0.005, 0.02, 0.08}) {
    CoincidenceRecord rec = simulate_from_density(t, 1e6, 30, det, acq, 77, o);
    CorrelationTrace g = estimate_g2_cw(rec);
    double worst = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t j = 0; j < ref.size(); ++j)
        if (std::abs(ref.tau[j] - g.tau[i]) < 1e-15) worst = std::max(worst, std::abs(g.value[i] - ref.value[j]));
    EXPECT_LT(worst, prev) << acq;
    prev = worst;
  }
}

TEST(Estimator, UniformHistogramIsOne) {
  CoincidenceRecord rec;
  rec.half_bins = 5;
  rec.bin_width = ps(64);
  rec.acq_time = 1.0;
  rec.singles_a = 1000000;
  rec.singles_b = 2000000;
  double per_bin = 1e6 * 2e6 * ps(64) / 1.0;
  rec.histogram.assign(11, static_cast<std::uint64_t>(std::llround(per_bin)));
  for (double v : estimate_g2_cw(rec).value) EXPECT_NEAR(v, 1.0, 1e-6);

  CoincidenceRecord twice = rec;
  for (auto& n : twice.histogram) n *= 2;
  auto a = estimate_g2_cw(rec), b = estimate_g2_cw(twice);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_DOUBLE_EQ(b.value[i], 2.0 * a.value[i]);
}

TEST(Estimator, NoSinglesIsNoData) {
  CoincidenceRecord rec;
  rec.half_bins = 1;
  rec.bin_width = ps(64);
  rec.acq_time = 1.0;
  rec.histogram.assign(3, 0);
  EXPECT_THROW(estimate_g2_cw(rec), NoDataError);
}
