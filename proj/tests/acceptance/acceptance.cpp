// Runs every acceptance criterion at full strength and prints one line each.
// Dataset-dependent criteria run when GAITXAI_GAITREC_CSV points at the data.

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "gaitxai/selftest.hpp"

int main() {
  gaitxai::SelftestOptions opt;
  opt.slow = true;
  opt.permutations = 10000;
  if (const char* p = std::getenv("GAITXAI_GAITREC_CSV"); p && *p) opt.gaitrec_csv = p;
  if (const char* p = std::getenv("GAITXAI_GAITREC_SCHEMA"); p && *p) opt.gaitrec_schema = p;
  opt.work_dir = (std::filesystem::temp_directory_path() / "gaitxai_acceptance").string();
  opt.on_result = [](const gaitxai::CriterionResult& r) { std::cout << gaitxai::format_result(r) << std::endl; };

  int failed = 0, passed = 0, skipped = 0;
  try {
    for (const auto& r : gaitxai::run_selftest(opt)) {
      if (r.status == gaitxai::CriterionStatus::fail) ++failed;
      else if (r.status == gaitxai::CriterionStatus::pass) ++passed;
      else ++skipped;
    }
  } catch (const std::exception& e) {
    std::cerr << "acceptance: " << e.what() << "\n";
    return 2;
  }
  std::cout << passed << " passed, " << failed << " failed, " << skipped << " skipped" << std::endl;
  return failed == 0 ? 0 : 1;
}
