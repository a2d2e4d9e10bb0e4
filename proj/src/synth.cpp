#include "gaitxai/synth.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "json.hpp"

namespace gaitxai {

namespace {

double bump(double t, double centre, double width) {
  const double u = (t - centre) / width;
  return std::exp(-u * u);
}

std::size_t parse_slot(const std::string& s) {
  for (std::size_t slot = 0; slot < kSlots; ++slot)
    if (slot_name(slot) == s) return slot;
  throw precondition_error("unknown slot '" + s + "' (expected e.g. affected_V)");
}

}  // namespace

double template_value(Component c, double t) {
  // Taper forces the curve to zero at heel strike and toe off.
  const double taper = std::sin(std::numbers::pi * t);
  switch (c) {
    case Component::V:
      return std::sqrt(taper) * (78.0 * bump(t, 0.24, 0.13) + 78.0 * bump(t, 0.76, 0.13) + 52.0 * bump(t, 0.5, 0.2));
    case Component::AP:
      return taper * (-24.0 * bump(t, 0.18, 0.11) + 26.0 * bump(t, 0.84, 0.09));
    case Component::ML:
      return taper * (9.0 * bump(t, 0.14, 0.08) + 6.0 * bump(t, 0.72, 0.16));
  }
  return 0.0;
}

std::vector<double> smooth_gaussian_noise(Rng& rng, std::size_t n, double fwhm) {
  std::vector<double> out(n);
  if (fwhm <= 0.0) {
    for (double& v : out) v = rng.normal();
    return out;
  }
  const double sigma = fwhm / std::sqrt(8.0 * std::log(2.0));
  const std::size_t half = static_cast<std::size_t>(std::ceil(4.0 * sigma));
  std::vector<double> kernel(2 * half + 1);
  double ss = 0.0;
  for (std::size_t i = 0; i < kernel.size(); ++i) {
    const double d = static_cast<double>(i) - static_cast<double>(half);
    kernel[i] = std::exp(-0.5 * d * d / (sigma * sigma));
    ss += kernel[i] * kernel[i];
  }
  const double scale = 1.0 / std::sqrt(ss);
  std::vector<double> white(n + 2 * half);
  for (double& v : white) v = rng.normal();
  for (std::size_t q = 0; q < n; ++q) {
    double acc = 0.0;
    for (std::size_t i = 0; i < kernel.size(); ++i) acc += kernel[i] * white[q + i];
    out[q] = acc * scale;
  }
  return out;
}

void SynthSpec::validate() const {
  if (classes.empty()) throw precondition_error("synthetic spec declares no classes");
  for (const auto& c : classes) {
    if (c.subjects <= 0 || c.trials_per_subject <= 0)
      throw precondition_error("class " + std::string(to_string(c.label)) + " needs positive subject and trial counts");
    for (const auto& o : classes)
      if (&o != &c && o.label == c.label)
        throw precondition_error("class " + std::string(to_string(c.label)) + " declared twice");
  }
  for (const auto& p : perturbations) {
    if (p.slot >= kSlots) throw precondition_error("perturbation slot out of range");
    if (p.start > p.end || p.end >= kNodes)
      throw precondition_error("perturbation node range [" + std::to_string(p.start) + ", " + std::to_string(p.end) +
                               "] is not inside 0..100");
    bool known = false;
    for (const auto& c : classes) known = known || c.label == p.label;
    if (!known) throw precondition_error("perturbation targets undeclared class " + std::string(to_string(p.label)));
  }
  for (double s : noise_sd)
    if (s < 0.0) throw precondition_error("noise SD must be non-negative");
  if (subject_sd_ratio < 0.0) throw precondition_error("subject SD ratio must be non-negative");
}

SynthSpec SynthSpec::from_json(std::string_view json_text) {
  const auto j = nlohmann::json::parse(json_text);
  SynthSpec s;
  for (const auto& c : j.at("classes")) {
    SynthClass sc;
    sc.label = parse_class_label(c.at("label").get<std::string>());
    sc.subjects = c.value("subjects", sc.subjects);
    sc.trials_per_subject = c.value("trials_per_subject", sc.trials_per_subject);
    sc.template_gain = c.value("template_gain", sc.template_gain);
    s.classes.push_back(sc);
  }
  if (j.contains("perturbations")) {
    for (const auto& p : j.at("perturbations")) {
      SynthPerturbation sp;
      sp.label = parse_class_label(p.at("label").get<std::string>());
      sp.slot = parse_slot(p.at("slot").get<std::string>());
      sp.start = p.at("start").get<std::size_t>();
      sp.end = p.at("end").get<std::size_t>();
      sp.amplitude = p.at("amplitude").get<double>();
      const std::string shape = p.value("shape", std::string("box"));
      if (shape == "box") sp.shape = SynthPerturbation::Shape::box;
      else if (shape == "hann") sp.shape = SynthPerturbation::Shape::hann;
      else throw precondition_error("unknown perturbation shape '" + shape + "'");
      s.perturbations.push_back(sp);
    }
  }
  if (j.contains("noise_sd")) {
    const auto& n = j.at("noise_sd");
    if (n.is_number()) s.noise_sd = {n.get<double>(), n.get<double>(), n.get<double>()};
    else s.noise_sd = {n.at("ML").get<double>(), n.at("AP").get<double>(), n.at("V").get<double>()};
  }
  s.noise_fwhm = j.value("noise_fwhm", s.noise_fwhm);
  s.subject_sd_ratio = j.value("subject_sd_ratio", s.subject_sd_ratio);
  s.validate();
  return s;
}

std::string SynthSpec::to_json() const {
  nlohmann::ordered_json j;
  j["classes"] = nlohmann::ordered_json::array();
  for (const auto& c : classes) {
    j["classes"].push_back({{"label", std::string(to_string(c.label))},
                            {"subjects", c.subjects},
                            {"trials_per_subject", c.trials_per_subject},
                            {"template_gain", c.template_gain}});
  }
  j["perturbations"] = nlohmann::ordered_json::array();
  for (const auto& p : perturbations) {
    j["perturbations"].push_back({{"label", std::string(to_string(p.label))},
                                  {"slot", slot_name(p.slot)},
                                  {"start", p.start},
                                  {"end", p.end},
                                  {"amplitude", p.amplitude},
                                  {"shape", p.shape == SynthPerturbation::Shape::box ? "box" : "hann"}});
  }
  j["noise_sd"] = {{"ML", noise_sd[0]}, {"AP", noise_sd[1]}, {"V", noise_sd[2]}};
  j["noise_fwhm"] = noise_fwhm;
  j["subject_sd_ratio"] = subject_sd_ratio;
  return j.dump(2);
}

Dataset synth_generate(const SynthSpec& spec, Rng& rng) {
  spec.validate();
  std::array<Series, kSlots> base{};
  for (std::size_t s = 0; s < kSlots; ++s)
    for (std::size_t q = 0; q < kNodes; ++q)
      base[s][q] = template_value(component_of_slot(s), static_cast<double>(q) / (kNodes - 1));

  Dataset d;
  d.normalization_state = NormalizationState::bodyweight;
  for (const auto& cls : spec.classes) {
    std::array<Series, kSlots> mean{};
    for (std::size_t s = 0; s < kSlots; ++s)
      for (std::size_t q = 0; q < kNodes; ++q) mean[s][q] = cls.template_gain * base[s][q];
    for (const auto& p : spec.perturbations) {
      if (p.label != cls.label) continue;
      const double width = static_cast<double>(p.end - p.start);
      for (std::size_t q = p.start; q <= p.end; ++q) {
        double w = 1.0;
        if (p.shape == SynthPerturbation::Shape::hann && width > 0.0)
          w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(q - p.start) / width);
        mean[p.slot][q] += p.amplitude * w;
      }
    }

    for (int subj = 0; subj < cls.subjects; ++subj) {
      char sid[32];
      std::snprintf(sid, sizeof sid, "%s%03d", std::string(to_string(cls.label)).c_str(), subj + 1);
      std::array<Series, kSlots> subject_mean = mean;
      if (spec.subject_sd_ratio > 0.0) {
        for (std::size_t s = 0; s < kSlots; ++s) {
          const auto dev = smooth_gaussian_noise(rng, kNodes, 2.0 * spec.noise_fwhm);
          const double sd = spec.subject_sd_ratio * spec.noise_sd[s % 3];
          for (std::size_t q = 0; q < kNodes; ++q) subject_mean[s][q] += sd * dev[q];
        }
      }
      for (int tr = 0; tr < cls.trials_per_subject; ++tr) {
        GrfTrial t;
        t.subject_id = sid;
        t.session_id = "S1";
        t.trial_id = "T" + std::to_string(tr + 1);
        t.class_label = cls.label;
        t.side_order = cls.label == ClassLabel::HC ? SideOrder::randomized_hc : SideOrder::affected_first;
        for (std::size_t s = 0; s < kSlots; ++s) {
          const double sd = spec.noise_sd[s % 3];
          if (sd > 0.0) {
            const auto noise = smooth_gaussian_noise(rng, kNodes, spec.noise_fwhm);
            for (std::size_t q = 0; q < kNodes; ++q) t.signals[s][q] = subject_mean[s][q] + sd * noise[q];
          } else {
            t.signals[s] = subject_mean[s];
          }
        }
        d.trials.push_back(std::move(t));
      }
    }
  }
  return d;
}

SynthSpec default_two_class_spec() {
  SynthSpec s;
  s.classes = {{ClassLabel::HC, 20, 5, 1.0}, {ClassLabel::K, 20, 5, 1.0}};
  s.perturbations = {{ClassLabel::K, slot_of(Side::affected, Component::V), 40, 60, 12.0,
                      SynthPerturbation::Shape::box}};
  s.noise_sd = {0.5, 1.0, 3.0};
  s.noise_fwhm = 8.0;
  return s;
}

}  // namespace gaitxai
