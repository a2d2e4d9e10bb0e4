#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gaitxai/cv.hpp"
#include "gaitxai/report.hpp"

namespace gaitxai {

struct RunConfig {
  std::optional<std::string> data_path;
  std::optional<std::string> schema_path;
  std::optional<std::string> synth_spec_path;  // used when no data_path; built-in spec otherwise
  std::vector<TaskId> tasks = all_task_ids();
  std::vector<ModelKind> models{ModelKind::svm, ModelKind::mlp, ModelKind::cnn};
  std::vector<Normalization> norms{Normalization::none, Normalization::minmax};
  std::uint64_t seed = 42;
  std::vector<double> alphas{0.01, 0.05, 0.1};
  std::size_t permutations = 0;  // permutation thresholds next to RFT when > 0
  std::string out_dir = "out";
  std::size_t jobs = 1;
  std::size_t folds = 10;
  std::size_t iterations = 30000;
  double epsilon = kLrpEpsilon;
  double svm_c = 0.1;
  bool occlusion = true;
  bool save_checkpoints = false;
  TotalRelevanceMode total_mode = TotalRelevanceMode::abs_of_means;

  /// Keys absent from the JSON keep their values from `base`; unknown keys
  /// are rejected.
  static RunConfig from_json(std::string_view text, const RunConfig& base);
  static RunConfig from_json(std::string_view text) { return from_json(text, RunConfig{}); }
  /// Canonical form. The output directory is left out so that manifests of
  /// identical runs written to different places compare equal.
  std::string to_json() const;
  void validate() const;
};

/// Carries the pipeline stage that failed and the process exit code
/// (2 for unreadable inputs, 1 otherwise).
class stage_error : public error {
 public:
  stage_error(std::string stage, const std::string& what, int exit_code)
      : error(stage + ": " + what), stage_(std::move(stage)), exit_code_(exit_code) {}
  const std::string& stage() const noexcept { return stage_; }
  int exit_code() const noexcept { return exit_code_; }

 private:
  std::string stage_;
  int exit_code_;
};

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::string& path);

/// Dataset in %BW with healthy-control sides assigned: ingested from
/// data_path, or generated from the synthetic spec.
Dataset load_dataset(const RunConfig& cfg);

/// Column matrices (rows = trials, columns = nodes) of one slot for the two
/// classes of a binary task.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> slot_groups(const std::vector<InputVector>& inputs, const Dataset& d,
                                                        const Task& task, std::size_t slot);

/// SPM of all six components of a binary task.
std::vector<SpmResult> task_spm(const std::vector<InputVector>& inputs, const Dataset& d, const Task& task,
                                std::span<const double> alphas);

/// Class summaries of a cross-validated cell over all test trials.
std::vector<ClassRelevanceSummary> cell_summaries(const TaskResult& r, const Task& task,
                                                  const std::vector<InputVector>& inputs, const Dataset& d);

std::string ledger_json(const std::vector<TaskResult>& ledger);
std::vector<TaskResult> ledger_from_json(std::string_view text);

/// Subcommands. Each writes its artifacts below cfg.out_dir together with
/// manifest.json and returns the list of written paths (relative).
std::vector<std::string> cmd_ingest(const RunConfig& cfg);
std::vector<std::string> cmd_synth(const RunConfig& cfg);
std::vector<std::string> cmd_spm(const RunConfig& cfg);
std::vector<std::string> cmd_explain(const RunConfig& cfg);
std::vector<std::string> cmd_occlude(const RunConfig& cfg);
std::vector<std::string> cmd_run(const RunConfig& cfg);
/// Re-renders figures and tables from the figure data and ledger already in
/// cfg.out_dir.
std::vector<std::string> cmd_report(const RunConfig& cfg);

}  // namespace gaitxai
