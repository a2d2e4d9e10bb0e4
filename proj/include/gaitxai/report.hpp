#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "gaitxai/cv.hpp"
#include "gaitxai/lrp.hpp"
#include "gaitxai/spm.hpp"

namespace gaitxai {

struct Rgb {
  double r = 0.0, g = 0.0, b = 0.0;
  bool operator==(const Rgb&) const = default;
};

/// Signed relevance to colour: black at 0, red -> yellow for positive values,
/// blue -> cyan for negative ones, saturating at |value| = max_abs.
Rgb relevance_color(double value, double max_abs);
std::string to_hex(const Rgb& c);

/// Fill colour of the significance band of an alpha level.
std::string band_color(double alpha);

/// Round half away from zero to one decimal ("88.35" -> "88.4").
std::string format_1dp(double v);

/// Everything an overview figure shows, in input-index order (606 entries).
struct FigureData {
  std::string task;
  std::string model;
  std::string normalization;
  std::vector<std::string> class_names;
  std::vector<ClassRelevanceSummary> classes;
  std::vector<double> total_relevance;
  std::string total_relevance_mode = "abs_of_means";
  // SPM per slot (binary tasks only); empty otherwise.
  std::vector<SpmResult> spm;
  std::vector<double> alphas;

  bool has_spm() const { return !spm.empty(); }
  /// Effect size concatenated over the six slots.
  std::vector<double> effect_size() const;
  /// Max |mean relevance| over all classes: the colormap scale.
  double color_scale() const;

  std::string to_json() const;
  static FigureData from_json(const std::string& text);
};

/// Stacked panels: (A) class means with significance bands, one panel per
/// class coloured by its mean relevance with a +-1 SD band, and a last panel
/// overlaying effect size and total relevance. Throws precondition_error
/// listing absent inputs.
std::string render_overview(const FigureData& fig);

/// One row per model, affected side only, sharing one effect-size curve.
std::string render_method_comparison(const std::vector<FigureData>& rows);

/// Per-index CSV of the figure's curves.
std::string figure_curves_csv(const FigureData& fig);

/// index, side, component, pct_stance, signal_value, relevance (class means).
std::string relevance_csv(const ClassRelevanceSummary& s);

/// node, pct_stance, t, effect_r for one component.
std::string spm_csv(const SpmResult& r);
/// alpha -> {threshold, intervals} plus tail/df/fwhm per slot.
std::string spm_json(const std::string& task, const std::string& normalization, const std::vector<SpmResult>& per_slot);

struct TableRequest {
  std::vector<TaskId> tasks;
  std::vector<std::string> models;  // column order
  std::vector<Normalization> norms;
};

/// Accuracy table ("mean (sd)" cells, ZRB column). Throws precondition_error
/// naming missing cells.
std::string accuracy_table_csv(const std::vector<TaskResult>& ledger, const TableRequest& req);
/// Occlusion deltas (occluded - baseline) for every requested cell.
std::string occlusion_table_csv(const std::vector<TaskResult>& ledger, const TableRequest& req);
/// Paired t-tests per cell with Bonferroni factor = number of compared cells.
std::string occlusion_tests_csv(const std::vector<TaskResult>& ledger, const TableRequest& req);

}  // namespace gaitxai
