#pragma once

#include <array>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gaitxai/common.hpp"
#include "gaitxai/rng.hpp"

namespace gaitxai {

using Series = std::array<double, kNodes>;

enum class ClassLabel { HC, H, K, A };
std::string_view to_string(ClassLabel c);
ClassLabel parse_class_label(std::string_view s);

// randomized_hc: healthy control whose slot order came from a balanced random
// draw. unassigned: healthy control ingested as (left, right), waiting for
// assign_sides_hc.
enum class SideOrder { affected_first, randomized_hc, unassigned };
std::string_view to_string(SideOrder s);

enum class NormalizationState { raw, bodyweight, minmax };
std::string_view to_string(NormalizationState s);

struct GrfTrial {
  std::string subject_id;
  std::string session_id;
  std::string trial_id;
  ClassLabel class_label = ClassLabel::HC;
  SideOrder side_order = SideOrder::affected_first;
  std::array<Series, kSlots> signals{};  // indexed by slot_of(side, component)
  std::optional<double> body_mass_kg;
};

struct Dataset {
  std::vector<GrfTrial> trials;
  NormalizationState normalization_state = NormalizationState::bodyweight;
  /// (min, max) per slot, set by minmax_normalize.
  std::optional<std::array<std::pair<double, double>, kSlots>> per_component_extrema;

  /// Throws ingestion_error if a subject carries two class labels.
  void validate() const;
  std::vector<std::string> subject_ids() const;  // first-appearance order
};

struct InputVector {
  std::array<double, kInputDim> values{};
  std::size_t trial_index = 0;  // index into the source Dataset::trials
};

// ---- CSV ingestion --------------------------------------------------------

/// Maps canonical column names to the headers used by a given file. Built
/// from an optional JSON sidecar; unmapped names keep their canonical form.
struct CsvSchema {
  std::map<std::string, std::string> columns;  // canonical -> actual
  std::vector<std::string> sample_columns;     // explicit list, else s001..s101

  static CsvSchema from_json(std::string_view json_text);
  std::string column(const std::string& canonical) const;
  std::vector<std::string> samples() const;
};

Dataset parse_grf_csv(std::istream& in, const CsvSchema& schema = {});
Dataset load_grf_csv(const std::string& path, const CsvSchema& schema = {});

/// Canonical dump: one row per (trial, slot) with side affected|unaffected.
void write_grf_csv(std::ostream& out, const Dataset& d);
/// JSON manifest carrying normalization state and per-slot extrema.
std::string extrema_manifest_json(const Dataset& d);

// ---- Normalization, assembly, occlusion -----------------------------------

Dataset minmax_normalize(const Dataset& d);

InputVector assemble_input(const GrfTrial& trial, std::size_t trial_index = 0);
std::vector<InputVector> assemble_inputs(const Dataset& d);
/// Inverse of assemble_input for one slot.
Series extract_slot(std::span<const double> v, std::size_t slot);

/// Zeroes ML and AP of both sides; vertical forces stay bit-identical.
InputVector occlude_horizontal(const InputVector& v);

/// Balanced per-subject random slot order for healthy controls.
Dataset assign_sides_hc(const Dataset& d, Rng& rng);

/// 0-based input index of (slot, node); node == % stance.
constexpr std::size_t input_index(std::size_t slot, std::size_t node) { return slot * kNodes + node; }

}  // namespace gaitxai
