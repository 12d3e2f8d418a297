#include "bfc/photosim.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "bfc/errors.hpp"
#include "bfc/schmidt.hpp"
#include "bfc/units.hpp"
#include "fft.hpp"

namespace bfc {

void DetectorModel::validate() const {
  if (!(bin_width > 0.0) || !std::isfinite(bin_width))
    throw InvalidParameter("detector: bin_width must be positive");
  if (!(jitter_fwhm >= 0.0) || !std::isfinite(jitter_fwhm))
    throw InvalidParameter("detector: jitter must be >= 0");
  if (!(efficiency > 0.0 && efficiency <= 1.0))
    throw InvalidParameter("detector: efficiency must be in (0, 1]");
  if (!(accidental_rate >= 0.0) || !std::isfinite(accidental_rate))
    throw InvalidParameter("detector: accidental rate must be >= 0");
}

std::uint64_t CoincidenceRecord::total() const {
  return std::accumulate(histogram.begin(), histogram.end(), std::uint64_t{0});
}

void CoincidenceRecord::validate() const {
  if (half_bins < 0 || histogram.size() != static_cast<std::size_t>(2 * half_bins + 1))
    throw InvalidParameter("record: histogram must have 2 * half_bins + 1 bins");
  if (!(bin_width > 0.0)) throw InvalidParameter("record: bin_width must be positive");
  if (!(acq_time > 0.0)) throw InvalidParameter("record: acq_time must be positive");
  if (rep_period && !(*rep_period > 0.0)) throw InvalidParameter("record: rep_period must be positive");
  long double cap = static_cast<long double>(singles_a) * static_cast<long double>(singles_b);
  if (static_cast<long double>(total()) > cap)
    throw InvalidParameter("record: more coincidences than singles pairs");
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t chunk, std::uint64_t tag)
    : key_(splitmix64(splitmix64(splitmix64(seed) ^ chunk) ^ (tag * 0x632be59bd9b4e019ULL))) {}

CounterRng::result_type CounterRng::operator()() { return splitmix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

namespace {

constexpr std::uint64_t tag_field = 1, tag_arm_a = 2, tag_arm_b = 3, tag_noise = 4, tag_pairs = 5;

struct ChunkResult {
  std::vector<std::uint64_t> hist;
  std::uint64_t na = 0, nb = 0;
  std::vector<TimeTag> tags;
};

struct Histogrammer {
  double bin;
  int half;

  // Circular delays t_b - t_a on a segment of length len.
  void add(std::vector<double>& a, std::vector<double>& b, double len,
           std::vector<std::uint64_t>& hist) const {
    if (a.empty() || b.empty()) return;
    std::sort(b.begin(), b.end());
    const double reach = (half + 0.5) * bin;
    auto count_range = [&](double ta, double lo, double hi, double shift) {
      auto it = std::lower_bound(b.begin(), b.end(), lo);
      for (; it != b.end() && *it < hi; ++it) {
        double dly = *it + shift - ta;
        long long r = std::llround(dly / bin);
        if (r >= -half && r <= half) ++hist[static_cast<std::size_t>(r + half)];
      }
    };
    for (double ta : a) {
      double lo = ta - reach, hi = ta + reach;
      count_range(ta, std::max(lo, 0.0), std::min(hi, len), 0.0);
      if (lo < 0.0) count_range(ta, lo + len, len, -len);
      if (hi > len) count_range(ta, 0.0, hi - len, len);
    }
  }
};

// Runs fn over chunks with a fixed assignment; merge order is chunk order.
ChunkResult run_chunks(std::size_t nchunks, unsigned workers, std::size_t nbins,
                       const std::function<void(std::size_t, ChunkResult&)>& fn) {
  std::vector<ChunkResult> parts(nchunks);
  for (auto& p : parts) p.hist.assign(nbins, 0);
  unsigned w = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(nchunks)));
  if (w == 1) {
    for (std::size_t c = 0; c < nchunks; ++c) fn(c, parts[c]);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(w);
    for (unsigned t = 0; t < w; ++t)
      pool.emplace_back([&, t] {
        try {
          for (std::size_t c = t; c < nchunks; c += w) fn(c, parts[c]);
        } catch (...) {
          errs[t] = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    for (auto& e : errs)
      if (e) std::rethrow_exception(e);
  }
  ChunkResult out;
  out.hist.assign(nbins, 0);
  for (auto& p : parts) {
    for (std::size_t i = 0; i < nbins; ++i) out.hist[i] += p.hist[i];
    out.na += p.na;
    out.nb += p.nb;
    out.tags.insert(out.tags.end(), p.tags.begin(), p.tags.end());
  }
  return out;
}

double jitter_sigma(const DetectorModel& det) {
  return det.jitter_fwhm / fwhm_per_sigma / std::sqrt(2.0);
}

double wrap(double t, double len) {
  double x = std::fmod(t, len);
  return x < 0.0 ? x + len : x;
}

// Jitter and wrap each event onto the segment.
void finish_events(std::vector<double>& ev, double sigma, double len, CounterRng& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  for (auto& t : ev) t = wrap(sigma > 0.0 ? t + sigma * nd(rng) : t, len);
}

void add_uniform(std::vector<double>& ev, double rate, double len, CounterRng& rng) {
  if (rate <= 0.0) return;
  std::poisson_distribution<long long> pd(rate * len);
  std::uniform_real_distribution<double> ud(0.0, len);
  long long n = pd(rng);
  for (long long i = 0; i < n; ++i) ev.push_back(ud(rng));
}

void record_tags(ChunkResult& res, const std::vector<double>& a, const std::vector<double>& b,
                 double origin) {
  for (int arm = 0; arm < 2; ++arm)
    for (double t : arm == 0 ? a : b)
      res.tags.push_back({arm, static_cast<std::int64_t>(std::llround((origin + t) * 1e12))});
}

// Draws count events from the piecewise-constant intensity I on cells of dt.
void place_events(const std::vector<double>& cdf, double dt, long long count, double offset,
                  CounterRng& rng, std::vector<double>& out) {
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  const double total = cdf.back();
  for (long long i = 0; i < count; ++i) {
    double u = ud(rng) * total;
    auto n = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    n = std::min(n, cdf.size() - 1);
    out.push_back(offset + (static_cast<double>(n) + ud(rng)) * dt);
  }
}

CoincidenceRecord make_record(const DetectorModel& det, const SimOptions& opt, double acq,
                              std::uint64_t seed, ChunkResult&& res) {
  CoincidenceRecord rec;
  rec.half_bins = static_cast<int>(std::llround(opt.half_window / det.bin_width));
  rec.histogram = std::move(res.hist);
  rec.singles_a = res.na;
  rec.singles_b = res.nb;
  rec.acq_time = acq;
  rec.bin_width = det.bin_width;
  rec.seed = seed;
  rec.tags = std::move(res.tags);
  std::stable_sort(rec.tags.begin(), rec.tags.end(),
                   [](const TimeTag& x, const TimeTag& y) { return x.time_ps < y.time_ps; });
  return rec;
}

void check_common(const DetectorModel& det, double acq, const SimOptions& opt) {
  det.validate();
  if (!(acq > 0.0) || !std::isfinite(acq)) throw InvalidParameter("simulate: acq must be positive");
  if (!(opt.half_window >= det.bin_width)) throw InvalidParameter("simulate: window narrower than a bin");
}

void check_brightness(double b) {
  if (!(b >= 0.0) || !std::isfinite(b)) throw InvalidParameter("simulate: brightness must be >= 0");
  if (b > 0.1)
    throw RegimeError("simulate: brightness above 0.1 photons per mode leaves the two-pair regime");
}

// Signal power spectral density of the CW field, unnormalised.
double cw_psd(const CombSpec& comb, double omega) {
  if (!comb.derived()) return std::norm(cw_marginal_at(comb, omega));
  // Rescaled lines pair with distinct parent idlers and add incoherently.
  double hw2 = 0.25 * comb.linewidth * comb.linewidth, s = 0.0;
  for (int j = 0; j < comb.dimension; ++j) {
    double x = omega - comb.line(j);
    s += std::norm(comb.amplitudes[j]) / ((hw2 + x * x) * (hw2 + x * x));
  }
  return s;
}

CoincidenceRecord simulate_cw(const CombSpec& comb, double brightness, const DetectorModel& det,
                              double acq, std::uint64_t seed, const SimOptions& opt) {
  const double gamma = comb.linewidth;
  const double len = 64.0 / gamma;
  if (opt.half_window > len / 2.0) throw InvalidParameter("simulate: window exceeds half a block");
  const double f_lo = comb.line(0) - 10.0 * gamma;
  const double f_hi = comb.line(comb.dimension - 1) + 10.0 * gamma;
  const double span = f_hi - f_lo;
  const double dt_target = std::min(det.bin_width / 4.0, std::numbers::pi / span);
  const std::size_t n = detail::fft_size_at_least(static_cast<std::size_t>(std::ceil(len / dt_target)));
  const double dt = len / static_cast<double>(n);
  const double df = two_pi / len;
  const double fc = 0.5 * (f_lo + f_hi);

  std::vector<std::pair<std::size_t, double>> bins;
  double wsum = 0.0;
  auto mmax = static_cast<long long>(std::ceil(0.5 * span / df));
  for (long long m = -mmax; m <= mmax; ++m) {
    double w = cw_psd(comb, fc + static_cast<double>(m) * df);
    bins.emplace_back(static_cast<std::size_t>((m % static_cast<long long>(n) + static_cast<long long>(n)) %
                                               static_cast<long long>(n)),
                      w);
    wsum += w;
  }
  for (auto& b : bins) b.second = std::sqrt(b.second / wsum);

  const double rate = brightness * comb.dimension * gamma * det.efficiency / 2.0;
  const auto nblocks = static_cast<std::size_t>(std::max(1.0, std::ceil(acq / len)));
  constexpr std::size_t per_chunk = 256;
  const std::size_t nchunks = (nblocks + per_chunk - 1) / per_chunk;
  const double sigma = jitter_sigma(det);
  Histogrammer hg{det.bin_width, static_cast<int>(std::llround(opt.half_window / det.bin_width))};
  const std::size_t nbins = static_cast<std::size_t>(2 * hg.half + 1);

  auto work = [&](std::size_t chunk, ChunkResult& res) {
    CounterRng rf(seed, chunk, tag_field), ra(seed, chunk, tag_arm_a), rb(seed, chunk, tag_arm_b),
        rn(seed, chunk, tag_noise);
    std::normal_distribution<double> nd(0.0, std::sqrt(0.5));
    std::vector<cdouble> field(n);
    std::vector<double> cdf(n), a, b;
    std::size_t first = chunk * per_chunk, last = std::min(nblocks, first + per_chunk);
    for (std::size_t blk = first; blk < last; ++blk) {
      std::fill(field.begin(), field.end(), cdouble(0.0));
      double power = 0.0;
      for (auto [idx, amp] : bins) {
        cdouble c(nd(rf), nd(rf));
        field[idx] += amp * c;
        power += std::norm(amp * c);
      }
      // Parseval: sum_n I_n = n * power.
      double mean_count = rate * dt * static_cast<double>(n) * power;
      std::poisson_distribution<long long> pd(mean_count > 0.0 ? mean_count : 1.0);
      long long ka = mean_count > 0.0 ? pd(ra) : 0;
      long long kb = mean_count > 0.0 ? pd(rb) : 0;
      a.clear();
      b.clear();
      if (ka > 0 || kb > 0) {
        detail::fft_inplace(field.data(), n, +1);
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          acc += std::norm(field[i]);
          cdf[i] = acc;
        }
        place_events(cdf, dt, ka, 0.0, ra, a);
        place_events(cdf, dt, kb, 0.0, rb, b);
      }
      finish_events(a, sigma, len, ra);
      finish_events(b, sigma, len, rb);
      add_uniform(a, det.accidental_rate, len, rn);
      add_uniform(b, det.accidental_rate, len, rn);
      res.na += a.size();
      res.nb += b.size();
      if (opt.keep_tags) record_tags(res, a, b, static_cast<double>(blk) * len);
      hg.add(a, b, len, res.hist);
    }
  };
  ChunkResult res = run_chunks(nchunks, opt.workers, nbins, work);
  return make_record(det, opt, static_cast<double>(nblocks) * len, seed, std::move(res));
}

}  // namespace

CoincidenceRecord simulate_thermal_signal(const CombSpec& comb, const PumpSpec& pump,
                                          double brightness, const DetectorModel& det,
                                          double acq, std::uint64_t seed, const SimOptions& opt) {
  comb.validate();
  pump.validate();
  check_common(det, acq, opt);
  check_brightness(brightness);
  if (pump.pulsed())
    return simulate_thermal_signal(build_pulsed_jsa(comb, pump), pump, comb.dimension, brightness,
                                   det, acq, seed, opt);
  return simulate_cw(comb, brightness, det, acq, seed, opt);
}

CoincidenceRecord simulate_thermal_signal(const JointSpectrum& jsa, const PumpSpec& pump,
                                          int dimension, double brightness,
                                          const DetectorModel& det, double acq,
                                          std::uint64_t seed, const SimOptions& opt) {
  pump.validate();
  check_common(det, acq, opt);
  check_brightness(brightness);
  if (!pump.pulsed()) throw RegimeError("simulate: joint-spectrum sampler needs a pulsed pump");
  if (dimension < 1) throw InvalidParameter("simulate: dimension must be >= 1");
  const double trep = pump.repetition_period;
  if (trep < 2.0 * opt.half_window)
    throw InvalidParameter("simulate: repetition period shorter than twice the histogram window");

  SignalModes sm = signal_modes(jsa);
  const double h = sm.axis.step;
  const double period = two_pi / h;
  const std::size_t m = detail::fft_size_at_least(
      std::max<std::size_t>(2 * sm.axis.size,
                            static_cast<std::size_t>(std::ceil(period / (det.bin_width / 4.0)))));
  const double dt = period / static_cast<double>(m);
  const auto nmodes = static_cast<std::size_t>(sm.modes.cols());
  // Mode waveforms, sum_n |u_k(t_n)|^2 = 1.
  std::vector<std::vector<cdouble>> wave(nmodes, std::vector<cdouble>(m, 0.0));
  for (std::size_t k = 0; k < nmodes; ++k) {
    for (std::size_t i = 0; i < sm.axis.size; ++i)
      wave[k][i] = sm.modes(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
    detail::fft_inplace(wave[k].data(), m, -1);
    for (auto& v : wave[k]) v /= std::sqrt(static_cast<double>(m));
  }

  const double mu = brightness * dimension * det.efficiency / 2.0;
  const auto npulses = static_cast<std::size_t>(std::max(1.0, std::round(acq / trep)));
  constexpr std::size_t per_chunk = 4096;
  const std::size_t nchunks = (npulses + per_chunk - 1) / per_chunk;
  const double sigma = jitter_sigma(det);
  Histogrammer hg{det.bin_width, static_cast<int>(std::llround(opt.half_window / det.bin_width))};
  const std::size_t nbins = static_cast<std::size_t>(2 * hg.half + 1);

  auto work = [&](std::size_t chunk, ChunkResult& res) {
    CounterRng rf(seed, chunk, tag_field), ra(seed, chunk, tag_arm_a), rb(seed, chunk, tag_arm_b),
        rn(seed, chunk, tag_noise);
    std::normal_distribution<double> nd(0.0, std::sqrt(0.5));
    std::vector<cdouble> c(nmodes), field(m);
    std::vector<double> cdf(m), a, b;
    std::size_t first = chunk * per_chunk, last = std::min(npulses, first + per_chunk);
    for (std::size_t p = first; p < last; ++p) {
      double w = 0.0;
      for (std::size_t k = 0; k < nmodes; ++k) {
        c[k] = std::sqrt(sm.weights[k]) * cdouble(nd(rf), nd(rf));
        w += std::norm(c[k]);
      }
      long long ka = 0, kb = 0;
      if (mu * w > 0.0) {
        std::poisson_distribution<long long> pd(mu * w);
        ka = pd(ra);
        kb = pd(rb);
      }
      a.clear();
      b.clear();
      // The intensity shape only matters when both arms can pair or tags are kept.
      if ((ka > 0 && kb > 0) || (opt.keep_tags && (ka > 0 || kb > 0))) {
        std::fill(field.begin(), field.end(), cdouble(0.0));
        for (std::size_t k = 0; k < nmodes; ++k)
          for (std::size_t i = 0; i < m; ++i) field[i] += c[k] * wave[k][i];
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          acc += std::norm(field[i]);
          cdf[i] = acc;
        }
        place_events(cdf, dt, ka, 0.0, ra, a);
        place_events(cdf, dt, kb, 0.0, rb, b);
        // Centre the periodic engine window on the pulse.
        for (auto& t : a) t = t >= period / 2.0 ? t - period : t;
        for (auto& t : b) t = t >= period / 2.0 ? t - period : t;
      } else {
        // Unpaired events still count as singles.
        for (long long i = 0; i < ka; ++i) a.push_back(0.0);
        for (long long i = 0; i < kb; ++i) b.push_back(0.0);
      }
      finish_events(a, sigma, trep, ra);
      finish_events(b, sigma, trep, rb);
      add_uniform(a, det.accidental_rate, trep, rn);
      add_uniform(b, det.accidental_rate, trep, rn);
      res.na += a.size();
      res.nb += b.size();
      if (opt.keep_tags) record_tags(res, a, b, static_cast<double>(p) * trep);
      hg.add(a, b, trep, res.hist);
    }
  };
  ChunkResult res = run_chunks(nchunks, opt.workers, nbins, work);
  CoincidenceRecord rec = make_record(det, opt, static_cast<double>(npulses) * trep, seed, std::move(res));
  rec.rep_period = trep;
  return rec;
}

namespace {

struct DelayLaw {
  std::vector<double> cdf;
  double first_tau = 0.0;
  double dt = 0.0;
  double area = 0.0;  // integral of the sampled weight, s
};

DelayLaw delay_law(const CorrelationTrace& trace) {
  DelayLaw law;
  law.dt = trace.step();
  law.first_tau = trace.tau.front();
  double acc = 0.0;
  for (double v : trace.value) {
    double w = trace.kind == TraceKind::g2 ? std::max(v - 1.0, 0.0) : v;
    acc += w;
    law.cdf.push_back(acc);
  }
  law.area = acc * law.dt;
  return law;
}

std::vector<double> unit_density(const CorrelationTrace& trace) {
  DelayLaw law = delay_law(trace);
  if (!(law.area > 0.0)) throw InvalidParameter("density sampler: trace has no weight");
  std::vector<double> p;
  double prev = 0.0;
  for (double c : law.cdf) {
    p.push_back((c - prev) / law.area);
    prev = c;
  }
  return p;
}

}  // namespace

CarWindow car_window_for(const CorrelationTrace& trace, const DetectorModel& det) {
  CorrelationTrace t = trace;
  t.kind = TraceKind::density;
  t.value = unit_density(trace);
  CorrelationTrace binned = jitter_average(t, det.jitter_fwhm, det.bin_width);
  auto it = std::max_element(binned.value.begin(), binned.value.end());
  auto peak = static_cast<std::size_t>(it - binned.value.begin());
  double half = *it / 2.0;
  std::size_t lo = peak, hi = peak;
  while (lo > 0 && binned.value[lo - 1] >= half) --lo;
  while (hi + 1 < binned.value.size() && binned.value[hi + 1] >= half) ++hi;
  CarWindow w;
  w.center = binned.tau[peak];
  w.peak_halfwidth = std::max(binned.tau[peak] - binned.tau[lo], binned.tau[hi] - binned.tau[peak]);
  w.peak_halfwidth = std::max(w.peak_halfwidth, 0.5 * det.bin_width);
  // Floor starts where the correlation has decayed to 1e-3 of its peak.
  const double tail = 1e-3 * *it;
  lo = peak;
  hi = peak;
  while (lo > 0 && binned.value[lo] >= tail) --lo;
  while (hi + 1 < binned.size() && binned.value[hi] >= tail) ++hi;
  w.floor_min_offset = std::max({binned.tau[peak] - binned.tau[lo], binned.tau[hi] - binned.tau[peak],
                                 3.0 * w.peak_halfwidth});
  return w;
}

double window_pdf_mean(const CorrelationTrace& trace, const DetectorModel& det,
                       const CarWindow& window) {
  CorrelationTrace t = trace;
  t.kind = TraceKind::density;
  t.value = unit_density(trace);
  CorrelationTrace binned = jitter_average(t, det.jitter_fwhm, det.bin_width);
  double s = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < binned.size(); ++i)
    if (std::abs(binned.tau[i] - window.center) <= window.peak_halfwidth + 1e-6 * det.bin_width) {
      s += binned.value[i];
      ++n;
    }
  if (n == 0) throw InvalidParameter("car window contains no bins");
  return s / n;
}

double uncorrelated_singles_for_car(double pair_rate, double efficiency, double pdf_mean,
                                    double car) {
  if (!(car > 1.0)) throw InvalidParameter("car must exceed 1");
  if (std::isinf(car)) return 0.0;
  double singles = std::sqrt(pair_rate * efficiency * efficiency * pdf_mean / (car - 1.0));
  double extra = singles - pair_rate * efficiency;
  if (extra < 0.0) {
    std::ostringstream os;
    os << "car " << car << " is above what pair members alone allow at this pair rate";
    throw InvalidParameter(os.str());
  }
  return extra;
}

CoincidenceRecord simulate_from_density(const CorrelationTrace& trace, double pair_rate,
                                        double car, const DetectorModel& det, double acq,
                                        std::uint64_t seed, const SimOptions& opt) {
  trace.validate();
  check_common(det, acq, opt);
  if (!(car > 0.0)) throw InvalidParameter("simulate_from_density: car must be positive");
  if (!(car > 1.0)) throw InvalidParameter("simulate_from_density: car must exceed 1");
  if (!(pair_rate >= 0.0) || !std::isfinite(pair_rate))
    throw InvalidParameter("simulate_from_density: pair rate must be >= 0");
  const double eta = det.efficiency;
  DelayLaw law = delay_law(trace);

  double extra = 0.0;  // uncorrelated singles per arm, s^-1
  if (trace.kind == TraceKind::g2) {
    if (law.area > 0.0 && pair_rate > 0.0) {
      double singles = std::sqrt(pair_rate * eta * eta / law.area);
      extra = singles - pair_rate * eta - det.accidental_rate;
      if (extra < 0.0)
        throw InvalidParameter("simulate_from_density: pair rate too high for this g2 contrast");
    }
  } else if (opt.extra_singles_rate >= 0.0) {
    extra = opt.extra_singles_rate;
  } else if (pair_rate > 0.0 && law.area > 0.0) {
    CarWindow w = opt.car_window.peak_halfwidth > 0.0 ? opt.car_window : car_window_for(trace, det);
    extra = uncorrelated_singles_for_car(pair_rate, eta, window_pdf_mean(trace, det, w), car);
    extra = std::max(0.0, extra - det.accidental_rate);
  }
  if (!(law.area > 0.0)) pair_rate = 0.0;

  // Segments of ~2^16 expected events per arm, at least 8 windows long.
  const double per_arm = pair_rate * eta + extra + det.accidental_rate;
  double seg = per_arm > 0.0 ? 65536.0 / per_arm : acq;
  seg = std::max(seg, 8.0 * opt.half_window);
  const auto nseg = static_cast<std::size_t>(std::max(1.0, std::ceil(acq / seg)));
  const double len = acq / static_cast<double>(nseg);
  if (len < 2.0 * opt.half_window) throw InvalidParameter("simulate_from_density: acq shorter than the window");
  const double sigma = jitter_sigma(det);
  Histogrammer hg{det.bin_width, static_cast<int>(std::llround(opt.half_window / det.bin_width))};
  const std::size_t nbins = static_cast<std::size_t>(2 * hg.half + 1);

  auto work = [&](std::size_t chunk, ChunkResult& res) {
    CounterRng rp(seed, chunk, tag_pairs), ra(seed, chunk, tag_arm_a), rb(seed, chunk, tag_arm_b),
        rn(seed, chunk, tag_noise);
    std::vector<double> a, b;
    if (pair_rate > 0.0) {
      std::poisson_distribution<long long> pd(pair_rate * len);
      std::uniform_real_distribution<double> ud(0.0, 1.0);
      long long npairs = pd(rp);
      for (long long i = 0; i < npairs; ++i) {
        double t = ud(rp) * len;
        double u = ud(rp) * law.cdf.back();
        auto cell = static_cast<std::size_t>(std::upper_bound(law.cdf.begin(), law.cdf.end(), u) -
                                             law.cdf.begin());
        cell = std::min(cell, law.cdf.size() - 1);
        double tau = law.first_tau + (static_cast<double>(cell) - 0.5 + ud(rp)) * law.dt;
        if (ud(rp) < eta) a.push_back(t);
        if (ud(rp) < eta) b.push_back(t + tau);
      }
    }
    finish_events(a, sigma, len, ra);
    finish_events(b, sigma, len, rb);
    add_uniform(a, extra + det.accidental_rate, len, rn);
    add_uniform(b, extra + det.accidental_rate, len, rn);
    res.na += a.size();
    res.nb += b.size();
    if (opt.keep_tags) record_tags(res, a, b, static_cast<double>(chunk) * len);
    hg.add(a, b, len, res.hist);
  };
  ChunkResult res = run_chunks(nseg, opt.workers, nbins, work);
  return make_record(det, opt, acq, seed, std::move(res));
}

namespace {

CorrelationTrace estimate(const CoincidenceRecord& rec, double scale, TraceKind kind) {
  CorrelationTrace tr;
  tr.kind = kind;
  const double na = static_cast<double>(rec.singles_a), nb = static_cast<double>(rec.singles_b);
  for (int r = -rec.half_bins; r <= rec.half_bins; ++r) {
    double n = static_cast<double>(rec.at(r));
    double f = scale / (na * nb);
    tr.tau.push_back(rec.delay(r));
    tr.value.push_back(f * n);
    tr.stderr_.push_back(f * std::sqrt(std::max(n, 1.0)));
  }
  tr.meta.model = "histogram-estimate";
  tr.meta.params = {{"acq_s", rec.acq_time},
                    {"bin_width_ps", to_ps(rec.bin_width)},
                    {"singles_a", na},
                    {"singles_b", nb},
                    {"coincidences", static_cast<double>(rec.total())},
                    {"seed", static_cast<double>(rec.seed)}};
  if (rec.rep_period) tr.meta.params["rep_period_ps"] = to_ps(*rec.rep_period);
  return tr;
}

void require_data(const CoincidenceRecord& rec) {
  rec.validate();
  if (rec.singles_a == 0 || rec.singles_b == 0)
    throw NoDataError("estimator: no singles in one of the arms");
}

}  // namespace

CorrelationTrace estimate_g2_cw(const CoincidenceRecord& rec) {
  require_data(rec);
  if (rec.rep_period) throw PreconditionError("estimate_g2_cw: record is pulsed");
  return estimate(rec, rec.acq_time / rec.bin_width, TraceKind::g2);
}

CorrelationTrace estimate_g2_density(const CoincidenceRecord& rec) {
  require_data(rec);
  if (!rec.rep_period) throw PreconditionError("estimate_g2_density: record has no repetition period");
  return estimate(rec, rec.acq_time / (rec.bin_width * *rec.rep_period), TraceKind::density);
}

CarEstimate estimate_car(const CoincidenceRecord& rec, const CarWindow& window) {
  rec.validate();
  if (!(window.peak_halfwidth >= 0.0)) throw InvalidParameter("estimate_car: bad window");
  const double off = window.floor_min_offset > 0.0 ? window.floor_min_offset : 3.0 * window.peak_halfwidth;
  const double eps = 1e-6 * rec.bin_width;
  double in_sum = 0.0, off_sum = 0.0;
  int in_n = 0, off_n = 0;
  for (int r = -rec.half_bins; r <= rec.half_bins; ++r) {
    double x = std::abs(rec.delay(r) - window.center);
    auto c = static_cast<double>(rec.at(r));
    if (x <= window.peak_halfwidth + eps) {
      in_sum += c;
      ++in_n;
    } else if (x >= off - eps) {
      off_sum += c;
      ++off_n;
    }
  }
  if (in_n == 0) throw InvalidParameter("estimate_car: no bins inside the peak window");
  if (off_n == 0) throw InvalidParameter("estimate_car: no bins in the floor region");
  CarEstimate out;
  if (off_sum == 0.0) {
    out.infinite = true;
    out.car = std::numeric_limits<double>::infinity();
    return out;
  }
  double in_mean = in_sum / in_n, off_mean = off_sum / off_n;
  out.car = in_mean / off_mean;
  double rel = std::sqrt(1.0 / std::max(in_sum, 1.0) + 1.0 / off_sum);
  out.stderr_ = out.car * rel;
  return out;
}

}  // namespace bfc
