#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "doctest.h"
#include "gaitxai/grf_data.hpp"
#include "gaitxai/rng.hpp"

using namespace gaitxai;

namespace {

std::string header(std::size_t samples = kNodes) {
  std::string h = "subject_id,session_id,trial_id,class_label,side,component";
  for (std::size_t q = 1; q <= samples; ++q) {
    char buf[8];
    std::snprintf(buf, sizeof buf, ",s%03zu", q);
    h += buf;
  }
  return h + "\n";
}

std::string row(const std::string& subject, const std::string& trial, const std::string& label, const std::string& side,
                const std::string& comp, double base, std::size_t samples = kNodes) {
  std::string r = subject + ",sess1," + trial + "," + label + "," + side + "," + comp;
  for (std::size_t q = 0; q < samples; ++q) r += "," + std::to_string(base + static_cast<double>(q));
  return r + "\n";
}

std::string full_trial(const std::string& subject, const std::string& trial, const std::string& label, double base,
                       bool skip_unaffected_v = false) {
  std::string s;
  const char* sides[] = {"affected", "unaffected"};
  const char* comps[] = {"ML", "AP", "V"};
  int k = 0;
  for (auto side : sides)
    for (auto comp : comps) {
      if (skip_unaffected_v && std::string(side) == "unaffected" && std::string(comp) == "V") continue;
      s += row(subject, trial, label, side, comp, base + 1000.0 * k++);
    }
  return s;
}

Dataset two_trials() {
  std::istringstream in(header() + full_trial("P1", "t1", "K", 0.0) + full_trial("P2", "t1", "HC", 5.0));
  return parse_grf_csv(in);
}

}  // namespace

TEST_CASE("well-formed file parses into trials of six series") {
  const Dataset d = two_trials();
  REQUIRE(d.trials.size() == 2);
  CHECK(d.trials[0].class_label == ClassLabel::K);
  CHECK(d.trials[0].side_order == SideOrder::affected_first);
  CHECK(d.trials[1].side_order == SideOrder::randomized_hc);
  CHECK(d.trials[0].signals[slot_of(Side::unaffected, Component::V)][0] == doctest::Approx(5000.0));
  CHECK(d.trials[1].signals[slot_of(Side::affected, Component::ML)][100] == doctest::Approx(105.0));
}

TEST_CASE("missing component names the trial") {
  std::istringstream in(header() + full_trial("P7", "t3", "H", 0.0, true));
  try {
    parse_grf_csv(in);
    FAIL("expected an ingestion error");
  } catch (const ingestion_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("P7") != std::string::npos);
    CHECK(msg.find("unaffected_V") != std::string::npos);
  }
}

TEST_CASE("a row with 100 samples is a shape error citing 101") {
  std::istringstream in(header() + row("P1", "t1", "K", "affected", "ML", 0.0, 100));
  try {
    parse_grf_csv(in);
    FAIL("expected a shape error");
  } catch (const shape_error& e) {
    CHECK(std::string(e.what()).find("101") != std::string::npos);
  }
}

TEST_CASE("non-numeric sample reports its row") {
  std::string bad = row("P1", "t1", "K", "affected", "ML", 0.0);
  bad.replace(bad.rfind(','), std::string::npos, ",abc\n");
  std::istringstream in(header() + bad);
  try {
    parse_grf_csv(in);
    FAIL("expected a parse error");
  } catch (const parse_error& e) {
    CHECK(e.row() == 2);
  }
}

TEST_CASE("a subject with two class labels is rejected") {
  std::istringstream in(header() + full_trial("P1", "t1", "K", 0.0) + full_trial("P1", "t2", "H", 0.0));
  CHECK_THROWS_AS(parse_grf_csv(in), ingestion_error);
}

TEST_CASE("left/right rows mark healthy controls as unassigned") {
  std::string s = header();
  const char* comps[] = {"ML", "AP", "V"};
  for (auto side : {"left", "right"})
    for (auto comp : comps) s += row("C1", "t1", "HC", side, comp, 1.0);
  std::istringstream in(s);
  const Dataset d = parse_grf_csv(in);
  CHECK(d.trials[0].side_order == SideOrder::unassigned);
}

TEST_CASE("schema maps renamed columns") {
  std::string s = "SUBJECT,SESSION,TRIAL,CLASS,SIDE,COMP";
  for (std::size_t q = 0; q < kNodes; ++q) s += ",F" + std::to_string(q);
  s += "\n";
  const char* comps[] = {"F_ML", "F_AP", "F_V"};
  for (auto side : {"affected", "unaffected"})
    for (auto comp : comps) {
      s += std::string("S9,x,1,A,") + side + "," + comp;
      for (std::size_t q = 0; q < kNodes; ++q) s += ",2.5";
      s += "\n";
    }
  const CsvSchema schema = CsvSchema::from_json(R"({"columns": {"subject_id": "SUBJECT", "session_id": "SESSION",
      "trial_id": "TRIAL", "class_label": "CLASS", "side": "SIDE", "component": "COMP"},
      "sample_prefix": "F", "sample_first_index": 0, "sample_index_width": 1})");
  std::istringstream in(s);
  const Dataset d = parse_grf_csv(in, schema);
  REQUIRE(d.trials.size() == 1);
  CHECK(d.trials[0].class_label == ClassLabel::A);
}

TEST_CASE("canonical dump parses back to the same dataset") {
  const Dataset d = two_trials();
  std::ostringstream out;
  write_grf_csv(out, d);
  std::istringstream in(out.str());
  const Dataset back = parse_grf_csv(in);
  REQUIRE(back.trials.size() == d.trials.size());
  for (std::size_t i = 0; i < d.trials.size(); ++i) {
    CHECK(back.trials[i].subject_id == d.trials[i].subject_id);
    CHECK(back.trials[i].signals == d.trials[i].signals);
  }
}

TEST_CASE("minmax maps each component onto [-1, 1]") {
  const Dataset m = minmax_normalize(two_trials());
  CHECK(m.normalization_state == NormalizationState::minmax);
  REQUIRE(m.per_component_extrema.has_value());
  for (std::size_t s = 0; s < kSlots; ++s) {
    double lo = 1e9, hi = -1e9;
    for (const auto& t : m.trials)
      for (double v : t.signals[s]) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    CHECK(lo == -1.0);
    CHECK(hi == 1.0);
  }
  CHECK_THROWS_AS(minmax_normalize(m), precondition_error);
}

TEST_CASE("minmax of a V component spanning [0, 120] sends 60 to 0") {
  Dataset d;
  GrfTrial t;
  t.subject_id = "S";
  for (std::size_t s = 0; s < kSlots; ++s)
    for (std::size_t q = 0; q < kNodes; ++q) t.signals[s][q] = static_cast<double>(q);
  for (std::size_t q = 0; q < kNodes; ++q) t.signals[2][q] = 0.0;
  t.signals[2][1] = 120.0;
  t.signals[2][2] = 60.0;
  d.trials.push_back(t);
  const Dataset m = minmax_normalize(d);
  CHECK(m.trials[0].signals[2][2] == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("degenerate component range is an error") {
  Dataset d;
  GrfTrial t;
  t.subject_id = "S";
  d.trials.push_back(t);
  CHECK_THROWS_AS(minmax_normalize(d), degenerate_error);
}

TEST_CASE("input layout follows slot-major order") {
  static_assert(input_index(0, 20) == 20);
  static_assert(input_index(1, 20) == 121);
  static_assert(input_index(5, 0) == 505);
  const Dataset d = two_trials();
  const InputVector v = assemble_input(d.trials[0], 0);
  CHECK(v.values[0] == d.trials[0].signals[0][0]);
  CHECK(v.values[505] == d.trials[0].signals[slot_of(Side::unaffected, Component::V)][0]);
  CHECK(extract_slot(v.values, 3) == d.trials[0].signals[3]);
}

TEST_CASE("horizontal occlusion zeroes ML and AP only and is idempotent") {
  const Dataset d = two_trials();
  const InputVector v = assemble_input(d.trials[0], 0);
  const InputVector o = occlude_horizontal(v);
  double horiz = 0.0;
  for (std::size_t i = 0; i < 202; ++i) horiz += std::abs(o.values[i]);
  for (std::size_t i = 303; i < 505; ++i) horiz += std::abs(o.values[i]);
  CHECK(horiz == 0.0);
  for (std::size_t q = 0; q < kNodes; ++q) {
    CHECK(o.values[input_index(2, q)] == v.values[input_index(2, q)]);
    CHECK(o.values[input_index(5, q)] == v.values[input_index(5, q)]);
  }
  CHECK(occlude_horizontal(o).values == o.values);
}

TEST_CASE("healthy-control side assignment is balanced and seeded") {
  Dataset d;
  for (int s = 0; s < 62; ++s) {
    GrfTrial t;
    t.subject_id = "HC" + std::to_string(s);
    t.class_label = ClassLabel::HC;
    t.side_order = SideOrder::unassigned;
    for (std::size_t q = 0; q < kNodes; ++q) t.signals[0][q] = 1.0;  // affected ML marker
    d.trials.push_back(t);
    d.trials.push_back(t);
  }
  Rng r1(9), r2(9);
  const Dataset a = assign_sides_hc(d, r1);
  const Dataset b = assign_sides_hc(d, r2);
  std::set<std::string> swapped;
  for (std::size_t i = 0; i < a.trials.size(); ++i) {
    CHECK(a.trials[i].side_order == SideOrder::randomized_hc);
    CHECK(a.trials[i].signals == b.trials[i].signals);
    if (a.trials[i].signals[0][0] == 0.0) swapped.insert(a.trials[i].subject_id);
  }
  CHECK(swapped.size() == 31);
  // Both trials of a subject get the same ordering.
  for (std::size_t i = 0; i < a.trials.size(); i += 2) CHECK(a.trials[i].signals == a.trials[i + 1].signals);

  Dataset one;
  one.trials.push_back(d.trials[0]);
  Rng r3(1);
  const Dataset o = assign_sides_hc(one, r3);
  CHECK(o.trials[0].side_order == SideOrder::randomized_hc);
}
