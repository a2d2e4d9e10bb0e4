#include "gaitxai/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "gaitxai/common.hpp"

namespace gaitxai {

Biquad butterworth_lowpass(double fs, double fc, int order) {
  if (order != 2) throw design_error("only order-2 Butterworth sections are supported, got " + std::to_string(order));
  if (!(fs > 0.0) || !(fc > 0.0)) throw design_error("sampling and cut-off frequencies must be positive");
  if (fc >= fs / 2.0) throw design_error("cut-off " + std::to_string(fc) + " Hz is not below Nyquist " + std::to_string(fs / 2.0) + " Hz");

  const double k = std::tan(std::numbers::pi * fc / fs);
  const double k2 = k * k;
  const double norm = 1.0 / (1.0 + std::numbers::sqrt2 * k + k2);
  Biquad q;
  q.b = {k2 * norm, 2.0 * k2 * norm, k2 * norm};
  q.a = {1.0, 2.0 * (k2 - 1.0) * norm, (1.0 - std::numbers::sqrt2 * k + k2) * norm};
  return q;
}

namespace {

// Transposed direct form II, initial state = steady state for input x0.
void filter_inplace(const Biquad& q, std::vector<double>& x) {
  if (x.empty()) return;
  const double dc = (q.b[0] + q.b[1] + q.b[2]) / (q.a[0] + q.a[1] + q.a[2]);
  double z1 = (dc - q.b[0]) * x.front();
  double z2 = (q.b[2] - q.a[2] * dc) * x.front();
  for (double& v : x) {
    const double in = v;
    const double y = q.b[0] * in + z1;
    z1 = q.b[1] * in - q.a[1] * y + z2;
    z2 = q.b[2] * in - q.a[2] * y;
    v = y;
  }
}

}  // namespace

std::vector<double> butterworth_zero_lag(std::span<const double> signal, double fs, double fc, int order) {
  const Biquad q = butterworth_lowpass(fs, fc, order);
  const std::size_t n = signal.size();
  if (n == 0) return {};
  const std::size_t pad = std::min<std::size_t>(3 * static_cast<std::size_t>(order + 1), n - 1);

  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * signal[0] - signal[i]);
  ext.insert(ext.end(), signal.begin(), signal.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * signal[n - 1] - signal[n - 1 - i]);

  filter_inplace(q, ext);
  std::reverse(ext.begin(), ext.end());
  filter_inplace(q, ext);
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(pad), ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

std::vector<double> time_normalize(std::span<const double> signal, std::size_t n) {
  if (signal.size() < 2) throw precondition_error("time_normalize needs at least 2 samples");
  if (n < 2) throw precondition_error("time_normalize target length must be at least 2");
  const std::size_t len = signal.size();
  std::vector<double> out(n);
  const double step = static_cast<double>(len - 1) / static_cast<double>(n - 1);
  for (std::size_t k = 0; k < n; ++k) {
    const double pos = static_cast<double>(k) * step;
    std::size_t i = static_cast<std::size_t>(std::floor(pos));
    if (i >= len - 1) i = len - 2;
    const double frac = pos - static_cast<double>(i);
    out[k] = signal[i] + frac * (signal[i + 1] - signal[i]);
  }
  out.front() = signal.front();
  out.back() = signal.back();
  return out;
}

std::vector<double> amplitude_normalize(std::span<const double> signal_newton, double body_mass_kg) {
  if (!(body_mass_kg > 0.0)) throw precondition_error("body mass must be positive");
  std::vector<double> out(signal_newton.begin(), signal_newton.end());
  const double weight = body_mass_kg * kGravity;
  for (double& v : out) v = v / weight * 100.0;
  return out;
}

}  // namespace gaitxai
