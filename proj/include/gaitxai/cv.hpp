#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gaitxai/grf_data.hpp"
#include "gaitxai/lrp.hpp"
#include "gaitxai/models.hpp"
#include "gaitxai/spm.hpp"
#include "gaitxai/svm.hpp"

namespace gaitxai {

enum class TaskId { HC_GD, HC_H, HC_K, HC_A, H_K_A, HC_H_K_A };
std::string_view to_string(TaskId t);
/// Accepts "HC_GD" and "HC/GD" spellings.
TaskId parse_task_id(std::string_view s);
std::vector<TaskId> all_task_ids();

struct Task {
  TaskId id = TaskId::HC_GD;
  std::vector<std::string> class_names;  // index = task class
  std::array<int, 4> mapping{};          // raw ClassLabel -> task class, -1 if excluded

  std::size_t n_classes() const { return class_names.size(); }
  std::optional<std::size_t> class_of(ClassLabel c) const;
  bool binary() const { return n_classes() == 2; }
};
Task make_task(TaskId id);

/// Indices of the trials taking part in a task, in dataset order.
std::vector<std::size_t> task_trials(const Dataset& d, const Task& task);

/// Majority-class trial share in percent.
double zero_rule_baseline(const Task& task, const Dataset& d);
double zero_rule_from_counts(const Task& task, const std::map<ClassLabel, std::size_t>& trial_counts);

enum class Normalization { none, minmax };
std::string_view to_string(Normalization n);
Normalization parse_normalization(std::string_view s);

/// Subject-level partitions. Fold f tests on partition f, validates on
/// partition (f + 1) mod k and trains on the rest.
struct FoldPlan {
  std::size_t k = 10;
  std::vector<std::vector<std::string>> partitions;
  std::map<std::string, std::size_t> partition_of;

  std::size_t test_partition(std::size_t fold) const { return fold; }
  std::size_t validation_partition(std::size_t fold) const { return (fold + 1) % k; }
};

/// Shuffles the subjects of each task class and deals them round robin,
/// the dealing position carrying over from one class to the next. Throws
/// precondition_error naming a class with fewer than k subjects.
FoldPlan stratified_group_kfold(const Dataset& d, const Task& task, std::size_t k, Rng& rng);

struct CvConfig {
  std::size_t k = 10;
  std::uint64_t root_seed = 42;
  TrainSchedule schedule;
  SvmOptions svm;
  LrpOptions lrp;
  bool explain = true;
  std::size_t jobs = 1;
  std::optional<std::string> checkpoint_dir;  // one subdirectory per fold when set
};

struct FoldResult {
  std::size_t fold = 0;
  double test_accuracy = 0.0;        // percent
  double validation_accuracy = 0.0;  // percent, reporting only
  std::size_t n_train = 0, n_validation = 0, n_test = 0, n_correct = 0;
  std::uint64_t init_seed = 0, batch_seed = 0;
  bool leakage_free = true;  // no test trial reached the training stream
  std::vector<std::size_t> test_trials;  // dataset indices
  std::vector<std::size_t> predictions;
  std::vector<RelevanceMap> relevance;  // per test trial, target = true class
};

struct TaskResult {
  TaskId task = TaskId::HC_GD;
  std::string model;  // "svm", "mlp", "cnn" or "zero_rule"
  Normalization normalization = Normalization::none;
  bool occluded = false;
  std::vector<double> per_fold_accuracy;
  double mean = 0.0;
  double sd = 0.0;  // sample SD over folds
  double pooled_accuracy = 0.0;  // correct / total over all test trials
  double zrb = 0.0;
  std::uint64_t fold_seed = 0;
  std::vector<FoldResult> folds;
};

/// Seed of the fold plan: depends on the task only, so every model,
/// normalization and occlusion cell shares the same folds.
std::uint64_t fold_plan_seed(std::uint64_t root, TaskId task);

/// Inputs of a dataset after the chosen normalization (bodyweight input).
std::vector<InputVector> prepare_inputs(const Dataset& bodyweight, Normalization norm, bool occlude);

/// Full cross-validation of one (task, model, normalization, occlusion) cell.
/// `data` must be in %BW with healthy-control sides assigned.
TaskResult run_task(const Dataset& data, const Task& task, ModelKind model, Normalization norm, bool occlude,
                    const CvConfig& cfg);
/// Same folds and evaluation path with a majority-class predictor.
TaskResult run_zero_rule(const Dataset& data, const Task& task, const CvConfig& cfg);

/// Mean accuracy difference occluded - baseline (negative = decrease).
double occlusion_delta(const TaskResult& occluded, const TaskResult& baseline);
/// Paired t over the per-fold accuracies with Bonferroni factor m.
PairedTResult occlusion_test(const TaskResult& occluded, const TaskResult& baseline, std::size_t m);

void recompute_summary(TaskResult& r);

}  // namespace gaitxai
