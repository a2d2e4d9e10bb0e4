#pragma once

#include <array>
#include <span>
#include <vector>

namespace gaitxai {

/// Second-order section coefficients, a0 normalized to 1.
struct Biquad {
  std::array<double, 3> b{};
  std::array<double, 3> a{1.0, 0.0, 0.0};
};

/// Low-pass Butterworth design via the bilinear transform with prewarping.
/// Only order 2 is supported. Throws design_error for fc >= fs/2.
Biquad butterworth_lowpass(double fs, double fc, int order = 2);

/// Forward-backward (zero-phase) low-pass filtering. Ends are extended by odd
/// reflection over 3*(order+1) samples and both passes start from the
/// steady-state filter state, so a constant input comes back unchanged.
std::vector<double> butterworth_zero_lag(std::span<const double> signal, double fs = 2000.0, double fc = 20.0,
                                         int order = 2);

/// Linear interpolation onto n points uniformly spanning the input support.
std::vector<double> time_normalize(std::span<const double> signal, std::size_t n = 101);

/// Newtons to percent body weight: x / (mass * 9.81) * 100.
std::vector<double> amplitude_normalize(std::span<const double> signal_newton, double body_mass_kg);

}  // namespace gaitxai
