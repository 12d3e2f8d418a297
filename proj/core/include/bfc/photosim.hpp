#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "bfc/comb.hpp"
#include "bfc/correlator.hpp"

namespace bfc {

struct DetectorModel {
  double jitter_fwhm = 0.0;      // combined coincidence jitter, s
  double bin_width = 64e-12;     // s
  double efficiency = 1.0;       // per arm
  double accidental_rate = 0.0;  // uncorrelated counts per detector, s^-1

  void validate() const;
};

struct TimeTag {
  int arm = 0;
  std::int64_t time_ps = 0;
};

// Coincidence histogram N_ab(r), delay r * bin_width = t_b - t_a, for
// r in [-half_bins, half_bins].
struct CoincidenceRecord {
  std::vector<std::uint64_t> histogram;
  int half_bins = 0;
  std::uint64_t singles_a = 0;
  std::uint64_t singles_b = 0;
  double acq_time = 0.0;
  std::optional<double> rep_period;
  double bin_width = 0.0;
  std::uint64_t seed = 0;
  std::vector<TimeTag> tags;

  double delay(int r) const { return r * bin_width; }
  std::uint64_t at(int r) const { return histogram[static_cast<std::size_t>(r + half_bins)]; }
  std::uint64_t total() const;
  void validate() const;
};

// splitmix64 over a counter; the stream is fixed by (seed, chunk, tag).
class CounterRng {
 public:
  using result_type = std::uint64_t;
  CounterRng(std::uint64_t seed, std::uint64_t chunk, std::uint64_t tag);
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

struct CarWindow {
  double center = 0.0;
  double peak_halfwidth = 0.0;    // s
  double floor_min_offset = 0.0;  // s from center; 0 means 3 * peak_halfwidth
};

struct SimOptions {
  double half_window = 2e-9;  // histogram half range, s
  unsigned workers = 1;
  bool keep_tags = false;
  // Density sampler only. Uncorrelated singles per arm on top of pair members
  // and detector accidentals; negative means derive it from car.
  double extra_singles_rate = -1.0;
  CarWindow car_window;  // peak_halfwidth 0 picks car_window_for(trace, det)
};

// Monte Carlo thermal signal field split 50:50 onto two detectors.
// CW: stationary Gaussian field in periodic blocks of 64 / linewidth.
CoincidenceRecord simulate_thermal_signal(const CombSpec& comb, const PumpSpec& pump,
                                          double brightness, const DetectorModel& det,
                                          double acq, std::uint64_t seed,
                                          const SimOptions& opt = {});
// Pulsed: one multimode thermal state per pulse from the signal Schmidt modes.
// brightness is mean photons per bin per pulse; bins = dimension.
CoincidenceRecord simulate_thermal_signal(const JointSpectrum& jsa, const PumpSpec& pump,
                                          int dimension, double brightness,
                                          const DetectorModel& det, double acq,
                                          std::uint64_t seed, const SimOptions& opt = {});

// Pair delays drawn from the trace. For g2 traces the excess g2 - 1 is the
// delay law and the singles rate follows from pair_rate so the estimator
// reproduces the trace (car is then only validated). For density and rate
// traces the trace is the delay law and uncorrelated singles set the CAR.
CoincidenceRecord simulate_from_density(const CorrelationTrace& trace, double pair_rate,
                                        double car, const DetectorModel& det, double acq,
                                        std::uint64_t seed, const SimOptions& opt = {});

// Half-maximum window around the largest binned, jittered value of the trace.
CarWindow car_window_for(const CorrelationTrace& trace, const DetectorModel& det);
// Mean binned pair-delay density (s^-1, unit area) inside the window.
double window_pdf_mean(const CorrelationTrace& trace, const DetectorModel& det,
                       const CarWindow& window);
// Uncorrelated singles per arm that give the requested CAR.
double uncorrelated_singles_for_car(double pair_rate, double efficiency, double pdf_mean,
                                    double car);

CorrelationTrace estimate_g2_cw(const CoincidenceRecord& rec);
CorrelationTrace estimate_g2_density(const CoincidenceRecord& rec);

struct CarEstimate {
  double car = 0.0;
  bool infinite = false;
  double stderr_ = 0.0;
};
CarEstimate estimate_car(const CoincidenceRecord& rec, const CarWindow& window);

}  // namespace bfc
