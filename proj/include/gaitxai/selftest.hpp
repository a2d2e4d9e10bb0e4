#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gaitxai/common.hpp"

namespace gaitxai {

enum class CriterionStatus { pass, fail, skip };
std::string_view to_string(CriterionStatus s);

struct CriterionResult {
  int id = 0;
  std::string name;
  CriterionStatus status = CriterionStatus::skip;
  std::string detail;
  double seconds = 0.0;
};

struct SelftestOptions {
  bool slow = false;                 // enables the Monte-Carlo RFT check
  std::size_t permutations = 10000;  // oracle budget of that check; 0 skips it
  double epsilon = kLrpEpsilon;      // LRP stabilizer used by every check
  std::uint64_t seed = 42;
  std::size_t jobs = 1;
  std::set<int> only;  // criterion ids to run; empty runs all
  // Public clinical dataset for the dataset-dependent checks.
  std::optional<std::string> gaitrec_csv;
  std::optional<std::string> gaitrec_schema;
  std::string work_dir;  // scratch space; a temporary directory when empty
  std::function<void(const CriterionResult&)> on_result;
};

/// Runs the acceptance suite in id order.
std::vector<CriterionResult> run_selftest(const SelftestOptions& opt);

/// "PASS  3 gradient-check  (12.3 s)  detail"
std::string format_result(const CriterionResult& r);

}  // namespace gaitxai
