#pragma once

#include <cmath>
#include <numbers>

namespace bfc {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

// FWHM of a Gaussian in units of its standard deviation.
inline constexpr double fwhm_per_sigma = 2.3548200450309493;

// Angular frequency from ordinary frequency in GHz, and back.
constexpr double ghz(double f) { return two_pi * f * 1e9; }
constexpr double to_ghz(double omega) { return omega / (two_pi * 1e9); }

constexpr double ps(double t) { return t * 1e-12; }
constexpr double ns(double t) { return t * 1e-9; }
constexpr double to_ps(double t) { return t * 1e12; }
constexpr double to_ns(double t) { return t * 1e9; }

}  // namespace bfc
