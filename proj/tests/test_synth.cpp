#include <cmath>

#include "doctest.h"
#include "gaitxai/cv.hpp"
#include "gaitxai/pipeline.hpp"
#include "gaitxai/spm.hpp"
#include "gaitxai/synth.hpp"

using namespace gaitxai;

namespace {

SynthSpec two_class(int subjects, int trials) {
  SynthSpec s;
  s.classes = {{ClassLabel::HC, subjects, trials}, {ClassLabel::K, subjects, trials}};
  return s;
}

}  // namespace

TEST_CASE("trial counts follow the spec") {
  Rng rng(1);
  const Dataset d = synth_generate(two_class(10, 5), rng);
  CHECK(d.trials.size() == 100);
  CHECK(d.subject_ids().size() == 20);
  SynthSpec one;
  one.classes = {{ClassLabel::H, 10, 5}};
  Rng r2(1);
  CHECK(synth_generate(one, r2).trials.size() == 50);
}

TEST_CASE("same seed reproduces the dataset") {
  Rng a(3), b(3);
  const Dataset x = synth_generate(default_two_class_spec(), a);
  const Dataset y = synth_generate(default_two_class_spec(), b);
  for (std::size_t i = 0; i < x.trials.size(); ++i) CHECK(x.trials[i].signals == y.trials[i].signals);
}

TEST_CASE("noise-free identical classes give a zero t field") {
  SynthSpec s = two_class(4, 3);
  s.noise_sd = {0.0, 0.0, 0.0};
  Rng rng(2);
  const Dataset d = synth_generate(s, rng);
  const Task task = make_task(TaskId::HC_K);
  const auto inputs = prepare_inputs(d, Normalization::none, false);
  for (std::size_t slot = 0; slot < kSlots; ++slot) {
    const auto [A, B] = slot_groups(inputs, d, task, slot);
    const TField f = two_sample_t_field(A, B);
    for (double t : f.t) CHECK(t == 0.0);
  }
}

TEST_CASE("an affected-V offset is detected only near its region") {
  SynthSpec s = two_class(10, 5);
  s.noise_sd = {0.05, 0.05, 0.05};
  s.perturbations = {{ClassLabel::K, slot_of(Side::affected, Component::V), 40, 60, 5.0}};
  Rng rng(4);
  const Dataset d = synth_generate(s, rng);
  const Task task = make_task(TaskId::HC_K);
  const auto inputs = prepare_inputs(d, Normalization::none, false);
  // Outside the region t stays of order one whatever the noise level, while
  // inside it grows as the noise shrinks; a large finite threshold isolates it.
  for (std::size_t slot = 0; slot < kSlots; ++slot) {
    const auto [A, B] = slot_groups(inputs, d, task, slot);
    const TField f = two_sample_t_field(A, B);
    const auto regions = suprathreshold_regions(f.t, 25.0);
    if (slot != slot_of(Side::affected, Component::V)) {
      CHECK(regions.empty());
      continue;
    }
    CHECK(regions == std::vector<Interval>{{40, 60}});
    const std::vector<double> alphas{0.05};
    bool overlap = false;
    for (const auto& iv : spm_two_sample(A, B, alphas).levels[0].intervals)
      overlap = overlap || (iv.start <= 60 && iv.end >= 40);
    CHECK(overlap);
  }
}

TEST_CASE("spec JSON round trip and validation") {
  const SynthSpec s = default_two_class_spec();
  const SynthSpec t = SynthSpec::from_json(s.to_json());
  CHECK(t.to_json() == s.to_json());
  SynthSpec bad = s;
  bad.perturbations.push_back({ClassLabel::K, 9, 0, 10, 1.0});
  CHECK_THROWS_AS(bad.validate(), precondition_error);
  SynthSpec bad2 = s;
  bad2.perturbations.push_back({ClassLabel::K, 2, 50, 200, 1.0});
  CHECK_THROWS_AS(bad2.validate(), precondition_error);
}

TEST_CASE("smoothed noise has unit variance") {
  Rng rng(7);
  double ss = 0.0;
  std::size_t n = 0;
  for (int k = 0; k < 400; ++k)
    for (double v : smooth_gaussian_noise(rng, 101, 15.0)) {
      ss += v * v;
      ++n;
    }
  CHECK(ss / static_cast<double>(n) == doctest::Approx(1.0).epsilon(0.1));
}
