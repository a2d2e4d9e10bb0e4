#include "gaitxai/grf_data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

namespace gaitxai {

std::string_view to_string(Side s) { return s == Side::affected ? "affected" : "unaffected"; }

std::string_view to_string(Component c) {
  switch (c) {
    case Component::ML: return "ML";
    case Component::AP: return "AP";
    case Component::V: return "V";
  }
  return "?";
}

std::string slot_name(std::size_t slot) {
  return std::string(to_string(side_of_slot(slot))) + "_" + std::string(to_string(component_of_slot(slot)));
}

std::string_view to_string(ClassLabel c) {
  switch (c) {
    case ClassLabel::HC: return "HC";
    case ClassLabel::H: return "H";
    case ClassLabel::K: return "K";
    case ClassLabel::A: return "A";
  }
  return "?";
}

namespace {

std::string upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.emplace_back(trim(cur));
  return out;
}

std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

ClassLabel parse_class_label(std::string_view s) {
  const std::string u = upper(trim(s));
  if (u == "HC") return ClassLabel::HC;
  if (u == "H") return ClassLabel::H;
  if (u == "K") return ClassLabel::K;
  if (u == "A") return ClassLabel::A;
  throw error("unknown class label '" + std::string(s) + "' (expected HC, H, K or A)");
}

std::string_view to_string(SideOrder s) {
  switch (s) {
    case SideOrder::affected_first: return "affected_first";
    case SideOrder::randomized_hc: return "randomized_hc";
    case SideOrder::unassigned: return "unassigned";
  }
  return "?";
}

std::string_view to_string(NormalizationState s) {
  switch (s) {
    case NormalizationState::raw: return "raw";
    case NormalizationState::bodyweight: return "bodyweight";
    case NormalizationState::minmax: return "minmax";
  }
  return "?";
}

void Dataset::validate() const {
  std::unordered_map<std::string, ClassLabel> seen;
  for (const auto& t : trials) {
    auto [it, inserted] = seen.emplace(t.subject_id, t.class_label);
    if (!inserted && it->second != t.class_label) {
      throw ingestion_error("subject '" + t.subject_id + "' carries two class labels (" +
                            std::string(to_string(it->second)) + ", " +
                            std::string(to_string(t.class_label)) + ")");
    }
  }
}

std::vector<std::string> Dataset::subject_ids() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& t : trials)
    if (seen.insert(t.subject_id).second) out.push_back(t.subject_id);
  return out;
}

// ---- schema ---------------------------------------------------------------

CsvSchema CsvSchema::from_json(std::string_view json_text) {
  CsvSchema schema;
  const auto j = nlohmann::json::parse(json_text);
  if (j.contains("columns")) {
    for (const auto& [k, v] : j.at("columns").items()) schema.columns[k] = v.get<std::string>();
  }
  if (j.contains("sample_columns")) {
    schema.sample_columns = j.at("sample_columns").get<std::vector<std::string>>();
  } else if (j.contains("sample_prefix")) {
    const auto prefix = j.at("sample_prefix").get<std::string>();
    const int first = j.value("sample_first_index", 1);
    const int width = j.value("sample_index_width", 3);
    for (std::size_t q = 0; q < kNodes; ++q) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%0*d", width, first + static_cast<int>(q));
      schema.sample_columns.push_back(prefix + buf);
    }
  }
  return schema;
}

std::string CsvSchema::column(const std::string& canonical) const {
  auto it = columns.find(canonical);
  return it == columns.end() ? canonical : it->second;
}

std::vector<std::string> CsvSchema::samples() const {
  if (!sample_columns.empty()) return sample_columns;
  std::vector<std::string> out;
  for (std::size_t q = 1; q <= kNodes; ++q) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "s%03zu", q);
    out.emplace_back(buf);
  }
  return out;
}

// ---- parse ----------------------------------------------------------------

Dataset parse_grf_csv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  std::size_t row = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (row == 1 && line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
    if (!trim(line).empty()) {
      header = split_csv_line(line);
      break;
    }
  }
  if (header.empty()) throw parse_error("empty CSV stream", row);

  auto find_col = [&](const std::string& canonical, bool required) -> std::optional<std::size_t> {
    const std::string name = lower(schema.column(canonical));
    for (std::size_t i = 0; i < header.size(); ++i)
      if (lower(header[i]) == name) return i;
    if (required) throw parse_error("missing required column '" + schema.column(canonical) + "'", row);
    return std::nullopt;
  };
  const std::size_t c_subject = *find_col("subject_id", true);
  const std::size_t c_session = *find_col("session_id", true);
  const auto c_trial = find_col("trial_id", false);
  const std::size_t c_class = *find_col("class_label", true);
  const std::size_t c_side = *find_col("side", true);
  const std::size_t c_comp = *find_col("component", true);
  const auto c_mass = find_col("body_mass_kg", false);

  // Sample columns: all present sample headers, in schema order. A header
  // with fewer or more than 101 sample columns is a shape error.
  std::vector<std::size_t> c_samples;
  for (const auto& name : schema.samples()) {
    const std::string lname = lower(name);
    for (std::size_t i = 0; i < header.size(); ++i)
      if (lower(header[i]) == lname) c_samples.push_back(i);
  }
  if (c_samples.size() != kNodes) {
    throw shape_error("header declares " + std::to_string(c_samples.size()) +
                      " sample columns, expected " + std::to_string(kNodes));
  }

  struct Pending {
    GrfTrial trial;
    std::array<bool, kSlots> filled{};
    bool left_right = false;
    bool affected_labels = false;
  };
  std::vector<Pending> pending;
  std::map<std::string, std::size_t> by_key;

  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);

    // Trailing empty cells are tolerated; any sample cell beyond the row is a shape error.
    std::size_t n_samples_present = 0;
    for (std::size_t c : c_samples)
      if (c < cells.size() && !cells[c].empty()) ++n_samples_present;
    std::size_t extra = 0;
    if (cells.size() > header.size()) {
      for (std::size_t i = header.size(); i < cells.size(); ++i)
        if (!cells[i].empty()) ++extra;
    }
    if (n_samples_present != kNodes || extra != 0) {
      throw shape_error("row " + std::to_string(row) + " has " + std::to_string(n_samples_present + extra) +
                        " samples, expected " + std::to_string(kNodes));
    }
    auto cell = [&](std::size_t c) -> std::string { return c < cells.size() ? cells[c] : std::string(); };

    const std::string subject = cell(c_subject);
    const std::string session = cell(c_session);
    const std::string trial_id = c_trial ? cell(*c_trial) : std::string();
    if (subject.empty()) throw parse_error("row " + std::to_string(row) + ": empty subject_id", row);

    ClassLabel label;
    try {
      label = parse_class_label(cell(c_class));
    } catch (const error& e) {
      throw parse_error("row " + std::to_string(row) + ": " + e.what(), row);
    }

    const std::string side_s = lower(cell(c_side));
    const std::string comp_s = upper(cell(c_comp));
    Component comp;
    if (comp_s == "ML" || comp_s == "F_ML") comp = Component::ML;
    else if (comp_s == "AP" || comp_s == "F_AP") comp = Component::AP;
    else if (comp_s == "V" || comp_s == "F_V") comp = Component::V;
    else throw parse_error("row " + std::to_string(row) + ": unknown component '" + cell(c_comp) + "'", row);

    bool is_left_right = false;
    Side side;
    if (side_s == "affected") side = Side::affected;
    else if (side_s == "unaffected") side = Side::unaffected;
    else if (side_s == "left") { side = Side::affected; is_left_right = true; }
    else if (side_s == "right") { side = Side::unaffected; is_left_right = true; }
    else throw parse_error("row " + std::to_string(row) + ": unknown side '" + cell(c_side) + "'", row);

    Series samples{};
    for (std::size_t q = 0; q < kNodes; ++q) {
      auto v = parse_double(cell(c_samples[q]));
      if (!v) {
        throw parse_error("row " + std::to_string(row) + ": non-numeric sample '" + cell(c_samples[q]) +
                              "' in column " + header[c_samples[q]], row);
      }
      samples[q] = *v;
    }

    const std::string key = subject + '\x1f' + session + '\x1f' + trial_id;
    auto [it, inserted] = by_key.emplace(key, pending.size());
    if (inserted) {
      Pending p;
      p.trial.subject_id = subject;
      p.trial.session_id = session;
      p.trial.trial_id = trial_id;
      p.trial.class_label = label;
      pending.push_back(std::move(p));
    }
    Pending& p = pending[it->second];
    if (p.trial.class_label != label) {
      throw ingestion_error("trial " + subject + "/" + session + "/" + trial_id + " mixes class labels");
    }
    (is_left_right ? p.left_right : p.affected_labels) = true;
    if (p.left_right && p.affected_labels) {
      throw ingestion_error("trial " + subject + "/" + session + "/" + trial_id +
                            " mixes left/right and affected/unaffected side labels");
    }
    if (is_left_right && label != ClassLabel::HC) {
      throw ingestion_error("trial " + subject + "/" + session + "/" + trial_id +
                            ": left/right sides are only valid for healthy controls");
    }
    const std::size_t slot = slot_of(side, comp);
    if (p.filled[slot]) {
      throw ingestion_error("trial " + subject + "/" + session + "/" + trial_id + " has duplicate " +
                            slot_name(slot) + " rows");
    }
    p.filled[slot] = true;
    p.trial.signals[slot] = samples;
    if (c_mass) {
      if (auto m = parse_double(cell(*c_mass))) p.trial.body_mass_kg = *m;
    }
  }

  Dataset d;
  d.normalization_state = NormalizationState::bodyweight;
  for (auto& p : pending) {
    for (std::size_t s = 0; s < kSlots; ++s) {
      if (!p.filled[s]) {
        throw ingestion_error("trial " + p.trial.subject_id + "/" + p.trial.session_id +
                              (p.trial.trial_id.empty() ? "" : "/" + p.trial.trial_id) + " is missing component " +
                              slot_name(s));
      }
    }
    if (p.trial.class_label == ClassLabel::HC)
      p.trial.side_order = p.left_right ? SideOrder::unassigned : SideOrder::randomized_hc;
    else
      p.trial.side_order = SideOrder::affected_first;
    d.trials.push_back(std::move(p.trial));
  }
  d.validate();
  return d;
}

Dataset load_grf_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open dataset '" + path + "'", path);
  return parse_grf_csv(in, schema);
}

void write_grf_csv(std::ostream& out, const Dataset& d) {
  out << "subject_id,session_id,trial_id,class_label,side,component";
  for (std::size_t q = 1; q <= kNodes; ++q) {
    char buf[8];
    std::snprintf(buf, sizeof buf, ",s%03zu", q);
    out << buf;
  }
  out << '\n';
  for (const auto& t : d.trials) {
    for (std::size_t s = 0; s < kSlots; ++s) {
      std::string side(to_string(side_of_slot(s)));
      if (t.side_order == SideOrder::unassigned) side = s < 3 ? "left" : "right";
      out << t.subject_id << ',' << t.session_id << ',' << t.trial_id << ',' << to_string(t.class_label) << ','
          << side << ',' << to_string(component_of_slot(s));
      for (double v : t.signals[s]) out << ',' << format_double(v);
      out << '\n';
    }
  }
}

std::string extrema_manifest_json(const Dataset& d) {
  nlohmann::ordered_json j;
  j["normalization_state"] = std::string(to_string(d.normalization_state));
  j["n_trials"] = d.trials.size();
  j["n_subjects"] = d.subject_ids().size();
  if (d.per_component_extrema) {
    nlohmann::ordered_json ex;
    for (std::size_t s = 0; s < kSlots; ++s) {
      ex[slot_name(s)] = {{"min", (*d.per_component_extrema)[s].first}, {"max", (*d.per_component_extrema)[s].second}};
    }
    j["per_component_extrema"] = ex;
  } else {
    j["per_component_extrema"] = nullptr;
  }
  return j.dump(2);
}

// ---- normalization and assembly -------------------------------------------

Dataset minmax_normalize(const Dataset& d) {
  if (d.normalization_state != NormalizationState::bodyweight) {
    throw precondition_error("minmax_normalize expects a body-weight normalized dataset, got '" +
                             std::string(to_string(d.normalization_state)) + "'");
  }
  if (d.trials.empty()) throw precondition_error("minmax_normalize on an empty dataset");
  std::array<std::pair<double, double>, kSlots> ext;
  for (std::size_t s = 0; s < kSlots; ++s) {
    double lo = d.trials.front().signals[s][0], hi = lo;
    for (const auto& t : d.trials) {
      const auto [mn, mx] = std::minmax_element(t.signals[s].begin(), t.signals[s].end());
      lo = std::min(lo, *mn);
      hi = std::max(hi, *mx);
    }
    if (!(hi > lo)) throw degenerate_error("component " + slot_name(s) + " has a degenerate range (max == min)");
    ext[s] = {lo, hi};
  }
  Dataset out = d;
  for (auto& t : out.trials) {
    for (std::size_t s = 0; s < kSlots; ++s) {
      const auto [lo, hi] = ext[s];
      for (double& x : t.signals[s]) x = 2.0 * (x - lo) / (hi - lo) - 1.0;
    }
  }
  out.normalization_state = NormalizationState::minmax;
  out.per_component_extrema = ext;
  return out;
}

InputVector assemble_input(const GrfTrial& trial, std::size_t trial_index) {
  InputVector v;
  v.trial_index = trial_index;
  for (std::size_t s = 0; s < kSlots; ++s)
    std::copy(trial.signals[s].begin(), trial.signals[s].end(), v.values.begin() + s * kNodes);
  return v;
}

std::vector<InputVector> assemble_inputs(const Dataset& d) {
  std::vector<InputVector> out;
  out.reserve(d.trials.size());
  for (std::size_t i = 0; i < d.trials.size(); ++i) out.push_back(assemble_input(d.trials[i], i));
  return out;
}

Series extract_slot(std::span<const double> v, std::size_t slot) {
  if (v.size() != kInputDim) throw shape_error("input vector must have 606 values");
  Series s;
  std::copy_n(v.begin() + slot * kNodes, kNodes, s.begin());
  return s;
}

InputVector occlude_horizontal(const InputVector& v) {
  InputVector out = v;
  for (std::size_t slot : {slot_of(Side::affected, Component::ML), slot_of(Side::affected, Component::AP),
                           slot_of(Side::unaffected, Component::ML), slot_of(Side::unaffected, Component::AP)}) {
    std::fill_n(out.values.begin() + slot * kNodes, kNodes, 0.0);
  }
  return out;
}

Dataset assign_sides_hc(const Dataset& d, Rng& rng) {
  std::vector<std::string> hc;
  std::set<std::string> seen;
  for (const auto& t : d.trials)
    if (t.class_label == ClassLabel::HC && seen.insert(t.subject_id).second) hc.push_back(t.subject_id);

  // Balanced pool of orderings, then a Fisher-Yates shuffle. With an odd
  // count the extra ordering is a coin flip.
  std::vector<bool> swap(hc.size(), false);
  const std::size_t half = hc.size() / 2;
  for (std::size_t i = 0; i < half; ++i) swap[i] = true;
  if (hc.size() % 2 == 1) swap[hc.size() - 1] = rng.coin();
  for (std::size_t i = swap.size(); i > 1; --i) {
    const std::size_t j = rng.index(i);
    const bool tmp = swap[i - 1];
    swap[i - 1] = swap[j];
    swap[j] = tmp;
  }
  std::map<std::string, bool> decision;
  for (std::size_t i = 0; i < hc.size(); ++i) decision[hc[i]] = swap[i];

  Dataset out = d;
  for (auto& t : out.trials) {
    if (t.class_label != ClassLabel::HC) continue;
    if (decision.at(t.subject_id)) {
      for (std::size_t s = 0; s < 3; ++s) std::swap(t.signals[s], t.signals[s + 3]);
    }
    t.side_order = SideOrder::randomized_hc;
  }
  return out;
}

}  // namespace gaitxai
