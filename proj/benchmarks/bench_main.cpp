#include <benchmark/benchmark.h>

#include "bfc/comb.hpp"
#include "bfc/correlator.hpp"
#include "bfc/photosim.hpp"
#include "bfc/schmidt.hpp"
#include "bfc/units.hpp"

using namespace bfc;

namespace {

CombSpec pulsed_comb(int d) { return CombSpec::uniform(0.0, ghz(40.5), ghz(0.2), 1, d); }
PumpSpec pulsed_pump() { return PumpSpec::gaussian(ghz(1.1), ns(20)); }

DetectorModel detector() {
  DetectorModel det;
  det.jitter_fwhm = ps(110);
  det.bin_width = ps(64);
  return det;
}

}  // namespace

static void BM_PulsedJsa(benchmark::State& state) {
  CombSpec c = pulsed_comb(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(build_pulsed_jsa(c, pulsed_pump()));
}
BENCHMARK(BM_PulsedJsa)->Arg(1)->Arg(3)->Unit(benchmark::kMillisecond);

static void BM_DensityEngine(benchmark::State& state) {
  JointSpectrum js = build_pulsed_jsa(pulsed_comb(static_cast<int>(state.range(0))), pulsed_pump());
  auto tau = tau_axis(ns(8), ps(4));
  for (auto _ : state) benchmark::DoNotOptimize(g2_density_numeric(js, tau));
}
BENCHMARK(BM_DensityEngine)->Arg(1)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

static void BM_SchmidtSvd(benchmark::State& state) {
  JointSpectrum js = build_pulsed_jsa(pulsed_comb(1), pulsed_pump());
  for (auto _ : state) benchmark::DoNotOptimize(schmidt_number(js));
}
BENCHMARK(BM_SchmidtSvd)->Unit(benchmark::kMillisecond);

static void BM_JitterAverage(benchmark::State& state) {
  CorrelationTrace t = g2_cw(CombSpec::uniform(0.0, ghz(40.5), ghz(0.25), 12, 3), tau_axis(ns(3), ps(0.25)));
  for (auto _ : state) benchmark::DoNotOptimize(jitter_average(t, ps(110), ps(64)));
}
BENCHMARK(BM_JitterAverage)->Unit(benchmark::kMillisecond);

static void BM_DensitySampler(benchmark::State& state) {
  CorrelationTrace t = g2_cw(CombSpec::uniform(0.0, ghz(40.5), ghz(0.25), 13, 1), tau_axis(ns(12), ps(2)));
  SimOptions o;
  o.half_window = ns(2);
  std::uint64_t seed = 1;
  for (auto _ : state) {
    CoincidenceRecord rec = simulate_from_density(t, 1e6, 30, detector(), 0.01, seed++, o);
    state.counters["coincidences"] = static_cast<double>(rec.total());
  }
}
BENCHMARK(BM_DensitySampler)->Unit(benchmark::kMillisecond);

static void BM_ThermalSampler(benchmark::State& state) {
  CombSpec c = CombSpec::uniform(0.0, ghz(40.5), ghz(0.25), 13, 1);
  SimOptions o;
  o.half_window = ns(1);
  std::uint64_t seed = 1;
  for (auto _ : state) {
    CoincidenceRecord rec = simulate_thermal_signal(c, PumpSpec::monochromatic(), 0.1, detector(), 0.001, seed++, o);
    state.counters["coincidences"] = static_cast<double>(rec.total());
  }
}
BENCHMARK(BM_ThermalSampler)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
