#pragma once

#include <array>
#include <string>
#include <vector>

#include "gaitxai/grf_data.hpp"
#include "gaitxai/rng.hpp"

namespace gaitxai {

struct SynthClass {
  ClassLabel label = ClassLabel::HC;
  int subjects = 10;
  int trials_per_subject = 5;
  double template_gain = 1.0;  // multiplies every template curve of this class
};

/// Class-specific additive bump on one slot; this is the ground truth a
/// discriminative-region test asserts against.
struct SynthPerturbation {
  ClassLabel label = ClassLabel::HC;
  std::size_t slot = 2;
  std::size_t start = 40;  // inclusive node range
  std::size_t end = 60;
  double amplitude = 5.0;  // %BW
  enum class Shape { box, hann } shape = Shape::box;
};

struct SynthSpec {
  std::vector<SynthClass> classes;
  std::vector<SynthPerturbation> perturbations;
  /// Trial-level noise SD per component (ML, AP, V), %BW.
  std::array<double, 3> noise_sd{0.5, 1.0, 3.0};
  double noise_fwhm = 8.0;      // smoothness of trial noise in nodes; 0 = white
  double subject_sd_ratio = 0.0;  // subject-level deviation, as a multiple of noise_sd

  static SynthSpec from_json(std::string_view json_text);
  std::string to_json() const;
  /// Throws precondition_error on inconsistent dimensions.
  void validate() const;
};

/// Smooth template curve of a component at stance fraction t in [0, 1].
double template_value(Component c, double t);

/// Unit-variance Gaussian-smoothed noise of length n. fwhm <= 0 gives white noise.
std::vector<double> smooth_gaussian_noise(Rng& rng, std::size_t n, double fwhm);

Dataset synth_generate(const SynthSpec& spec, Rng& rng);

/// Two-class task spec used by the self-test end-to-end checks.
SynthSpec default_two_class_spec();

}  // namespace gaitxai
