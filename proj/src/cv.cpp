#include "gaitxai/cv.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

#include "json.hpp"

namespace gaitxai {

std::string_view to_string(TaskId t) {
  switch (t) {
    case TaskId::HC_GD: return "HC_GD";
    case TaskId::HC_H: return "HC_H";
    case TaskId::HC_K: return "HC_K";
    case TaskId::HC_A: return "HC_A";
    case TaskId::H_K_A: return "H_K_A";
    case TaskId::HC_H_K_A: return "HC_H_K_A";
  }
  return "?";
}

TaskId parse_task_id(std::string_view s) {
  std::string k(s);
  std::replace(k.begin(), k.end(), '/', '_');
  for (TaskId t : all_task_ids())
    if (to_string(t) == k) return t;
  throw error("unknown task '" + std::string(s) + "' (expected HC_GD, HC_H, HC_K, HC_A, H_K_A or HC_H_K_A)");
}

std::vector<TaskId> all_task_ids() {
  return {TaskId::HC_GD, TaskId::HC_H, TaskId::HC_K, TaskId::HC_A, TaskId::H_K_A, TaskId::HC_H_K_A};
}

std::optional<std::size_t> Task::class_of(ClassLabel c) const {
  const int m = mapping[static_cast<std::size_t>(c)];
  if (m < 0) return std::nullopt;
  return static_cast<std::size_t>(m);
}

Task make_task(TaskId id) {
  Task t;
  t.id = id;
  // mapping order: HC, H, K, A
  switch (id) {
    case TaskId::HC_GD: t.class_names = {"HC", "GD"}; t.mapping = {0, 1, 1, 1}; break;
    case TaskId::HC_H: t.class_names = {"HC", "H"}; t.mapping = {0, 1, -1, -1}; break;
    case TaskId::HC_K: t.class_names = {"HC", "K"}; t.mapping = {0, -1, 1, -1}; break;
    case TaskId::HC_A: t.class_names = {"HC", "A"}; t.mapping = {0, -1, -1, 1}; break;
    case TaskId::H_K_A: t.class_names = {"H", "K", "A"}; t.mapping = {-1, 0, 1, 2}; break;
    case TaskId::HC_H_K_A: t.class_names = {"HC", "H", "K", "A"}; t.mapping = {0, 1, 2, 3}; break;
  }
  return t;
}

std::vector<std::size_t> task_trials(const Dataset& d, const Task& task) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < d.trials.size(); ++i)
    if (task.class_of(d.trials[i].class_label)) out.push_back(i);
  return out;
}

double zero_rule_from_counts(const Task& task, const std::map<ClassLabel, std::size_t>& trial_counts) {
  std::vector<std::size_t> per_class(task.n_classes(), 0);
  std::size_t total = 0;
  for (const auto& [label, n] : trial_counts) {
    if (auto c = task.class_of(label)) {
      per_class[*c] += n;
      total += n;
    }
  }
  if (total == 0) throw precondition_error("zero rule baseline of an empty task");
  return 100.0 * static_cast<double>(*std::max_element(per_class.begin(), per_class.end())) / static_cast<double>(total);
}

double zero_rule_baseline(const Task& task, const Dataset& d) {
  std::map<ClassLabel, std::size_t> counts;
  for (const auto& t : d.trials) ++counts[t.class_label];
  return zero_rule_from_counts(task, counts);
}

std::string_view to_string(Normalization n) { return n == Normalization::none ? "none" : "minmax"; }

Normalization parse_normalization(std::string_view s) {
  if (s == "none" || s == "no" || s == "raw") return Normalization::none;
  if (s == "minmax" || s == "min-max") return Normalization::minmax;
  throw error("unknown normalization '" + std::string(s) + "' (expected none or minmax)");
}

FoldPlan stratified_group_kfold(const Dataset& d, const Task& task, std::size_t k, Rng& rng) {
  if (k < 3) throw precondition_error("k-fold needs k >= 3 (train, validation and test partitions)");
  d.validate();
  std::vector<std::vector<std::string>> by_class(task.n_classes());
  std::set<std::string> seen;
  for (const auto& t : d.trials) {
    const auto c = task.class_of(t.class_label);
    if (!c || !seen.insert(t.subject_id).second) continue;
    by_class[*c].push_back(t.subject_id);
  }
  for (std::size_t c = 0; c < by_class.size(); ++c)
    if (by_class[c].size() < k)
      throw precondition_error("class " + task.class_names[c] + " has " + std::to_string(by_class[c].size()) +
                               " subjects, fewer than k = " + std::to_string(k));

  FoldPlan plan;
  plan.k = k;
  plan.partitions.assign(k, {});
  std::size_t pos = 0;
  for (auto& subjects : by_class) {
    std::sort(subjects.begin(), subjects.end());  // independent of dataset row order
    for (std::size_t i = subjects.size(); i > 1; --i) std::swap(subjects[i - 1], subjects[rng.index(i)]);
    for (const auto& s : subjects) {
      plan.partitions[pos % k].push_back(s);
      plan.partition_of[s] = pos % k;
      ++pos;
    }
  }
  return plan;
}

std::uint64_t fold_plan_seed(std::uint64_t root, TaskId task) {
  return derive_seed(root, {hash_string(to_string(task)), hash_string("folds")});
}

std::vector<InputVector> prepare_inputs(const Dataset& bodyweight, Normalization norm, bool occlude) {
  for (const auto& t : bodyweight.trials)
    if (t.side_order == SideOrder::unassigned)
      throw precondition_error("healthy-control sides are unassigned for subject " + t.subject_id +
                               "; run assign_sides_hc first");
  std::vector<InputVector> v =
      norm == Normalization::minmax ? assemble_inputs(minmax_normalize(bodyweight)) : assemble_inputs(bodyweight);
  if (occlude)
    for (auto& x : v) x = occlude_horizontal(x);
  return v;
}

void recompute_summary(TaskResult& r) {
  r.per_fold_accuracy.clear();
  std::size_t correct = 0, total = 0;
  for (const auto& f : r.folds) {
    r.per_fold_accuracy.push_back(f.test_accuracy);
    correct += f.n_correct;
    total += f.n_test;
  }
  const double n = static_cast<double>(r.per_fold_accuracy.size());
  r.mean = n > 0 ? std::accumulate(r.per_fold_accuracy.begin(), r.per_fold_accuracy.end(), 0.0) / n : 0.0;
  double ss = 0.0;
  for (double a : r.per_fold_accuracy) ss += (a - r.mean) * (a - r.mean);
  r.sd = n > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  r.pooled_accuracy = total > 0 ? 100.0 * static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

namespace {

struct Fitted {
  std::optional<ModelParams> params;
  std::size_t constant_class = 0;

  std::size_t predict_one(std::span<const double> v) const { return params ? predict(*params, v) : constant_class; }
};

using FitFn = std::function<Fitted(std::size_t fold, const TrainingSet& train, FoldResult& out,
                                   const std::vector<std::size_t>& train_trials)>;

double accuracy(std::size_t correct, std::size_t n) {
  return n == 0 ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(n);
}

TaskResult run_folds(const Dataset& data, const Task& task, const std::vector<InputVector>& inputs,
                     const CvConfig& cfg, bool explain, const FitFn& fit) {
  TaskResult r;
  r.task = task.id;
  r.zrb = zero_rule_baseline(task, data);
  r.fold_seed = fold_plan_seed(cfg.root_seed, task.id);
  Rng fold_rng(r.fold_seed);
  const FoldPlan plan = stratified_group_kfold(data, task, cfg.k, fold_rng);
  const auto trials = task_trials(data, task);

  r.folds.resize(cfg.k);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&]() {
    for (;;) {
      const std::size_t f = next.fetch_add(1);
      if (f >= cfg.k) return;
      try {
        FoldResult& out = r.folds[f];
        out.fold = f;
        std::vector<std::size_t> train, val, test;
        for (std::size_t i : trials) {
          const std::size_t p = plan.partition_of.at(data.trials[i].subject_id);
          if (p == plan.test_partition(f)) test.push_back(i);
          else if (p == plan.validation_partition(f)) val.push_back(i);
          else train.push_back(i);
        }
        TrainingSet ts;
        ts.n_classes = task.n_classes();
        ts.X.resize(static_cast<Eigen::Index>(kInputDim), static_cast<Eigen::Index>(train.size()));
        for (std::size_t j = 0; j < train.size(); ++j) {
          ts.X.col(static_cast<Eigen::Index>(j)) =
              Eigen::Map<const Eigen::VectorXd>(inputs[train[j]].values.data(), kInputDim);
          ts.labels.push_back(*task.class_of(data.trials[train[j]].class_label));
        }
        out.n_train = train.size();
        out.n_validation = val.size();
        out.n_test = test.size();
        const Fitted model = fit(f, ts, out, train);

        // Audit: no trial of the test partition may appear in the training stream.
        const std::set<std::size_t> test_set(test.begin(), test.end());
        for (std::size_t i : train)
          if (test_set.count(i)) out.leakage_free = false;

        std::size_t val_correct = 0;
        for (std::size_t i : val)
          val_correct += model.predict_one(inputs[i].values) == *task.class_of(data.trials[i].class_label);
        out.validation_accuracy = accuracy(val_correct, val.size());

        out.test_trials = test;
        for (std::size_t i : test) {
          const std::size_t truth = *task.class_of(data.trials[i].class_label);
          const std::size_t pred = model.predict_one(inputs[i].values);
          out.predictions.push_back(pred);
          out.n_correct += pred == truth;
          if (explain && model.params) {
            RelevanceMap m = explain_trial(*model.params, inputs[i].values, truth, cfg.lrp);
            m.trial_index = i;
            out.relevance.push_back(std::move(m));
          }
        }
        out.test_accuracy = accuracy(out.n_correct, test.size());
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };

  const std::size_t jobs = std::clamp<std::size_t>(cfg.jobs, 1, cfg.k);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  recompute_summary(r);
  return r;
}

}  // namespace

TaskResult run_task(const Dataset& data, const Task& task, ModelKind model, Normalization norm, bool occlude,
                    const CvConfig& cfg) {
  const auto inputs = prepare_inputs(data, norm, occlude);
  const std::string model_name(to_string(model));
  const std::uint64_t cell_key[] = {hash_string(to_string(task.id)), hash_string(model_name),
                                    hash_string(to_string(norm)), occlude ? 1u : 0u};

  FitFn fit = [&](std::size_t fold, const TrainingSet& ts, FoldResult& out,
                  const std::vector<std::size_t>& train_trials) -> Fitted {
    out.init_seed = derive_seed(cfg.root_seed, {cell_key[0], cell_key[1], cell_key[2], cell_key[3], fold,
                                                hash_string("init")});
    out.batch_seed = derive_seed(cfg.root_seed, {cell_key[0], cell_key[1], cell_key[2], cell_key[3], fold,
                                                 hash_string("batches")});
    Fitted fitted;
    if (model == ModelKind::svm) {
      fitted.params = svm_train(ts, cfg.svm);
    } else {
      Rng init_rng(out.init_seed);
      auto arch = model == ModelKind::mlp ? mlp_arch(ts.n_classes) : cnn_arch(ts.n_classes);
      ModelParams p = init_params(model, std::move(arch), ts.n_classes, init_rng);
      Rng batch_rng(out.batch_seed);
      // Training-stream audit: batch indices must stay inside the training set.
      const std::size_t n_train = train_trials.size();
      bool in_range = true;
      BatchObserver obs = [&](std::span<const std::size_t> idx) {
        for (std::size_t i : idx) in_range = in_range && i < n_train;
      };
      fitted.params = sgd_train(std::move(p), ts, cfg.schedule, batch_rng, obs);
      out.leakage_free = out.leakage_free && in_range;
    }
    if (cfg.checkpoint_dir) {
      nlohmann::ordered_json meta;
      meta["task"] = std::string(to_string(task.id));
      meta["normalization"] = std::string(to_string(norm));
      meta["occluded"] = occlude;
      meta["fold"] = fold;
      meta["init_seed"] = out.init_seed;
      meta["batch_seed"] = out.batch_seed;
      meta["schedule"] = {{"total_iters", cfg.schedule.total_iters},
                          {"batch_size", cfg.schedule.batch_size},
                          {"stage_lr", cfg.schedule.stage_lr},
                          {"stage_end", cfg.schedule.stage_end}};
      const auto dir = std::filesystem::path(*cfg.checkpoint_dir) / ("fold" + std::to_string(fold));
      save_checkpoint(*fitted.params, dir.string(), meta.dump());
    }
    return fitted;
  };

  TaskResult r = run_folds(data, task, inputs, cfg, cfg.explain, fit);
  r.model = model_name;
  r.normalization = norm;
  r.occluded = occlude;
  return r;
}

TaskResult run_zero_rule(const Dataset& data, const Task& task, const CvConfig& cfg) {
  const auto inputs = prepare_inputs(data, Normalization::none, false);
  // The majority class of the whole task, so the pooled accuracy equals the baseline.
  std::vector<std::size_t> counts(task.n_classes(), 0);
  for (const auto& t : data.trials)
    if (const auto c = task.class_of(t.class_label)) ++counts[*c];
  const auto majority = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  FitFn fit = [&](std::size_t, const TrainingSet&, FoldResult&, const std::vector<std::size_t>&) -> Fitted {
    Fitted f;
    f.constant_class = majority;
    return f;
  };
  TaskResult r = run_folds(data, task, inputs, cfg, false, fit);
  r.model = "zero_rule";
  return r;
}

namespace {

void check_pair(const TaskResult& occluded, const TaskResult& baseline) {
  if (occluded.task != baseline.task || occluded.model != baseline.model ||
      occluded.normalization != baseline.normalization)
    throw precondition_error("occlusion comparison between mismatched cells");
  if (!occluded.occluded || baseline.occluded)
    throw precondition_error("occlusion comparison needs one occluded and one baseline result");
}

}  // namespace

double occlusion_delta(const TaskResult& occluded, const TaskResult& baseline) {
  check_pair(occluded, baseline);
  return occluded.mean - baseline.mean;
}

PairedTResult occlusion_test(const TaskResult& occluded, const TaskResult& baseline, std::size_t m) {
  check_pair(occluded, baseline);
  return paired_t_bonferroni(occluded.per_fold_accuracy, baseline.per_fold_accuracy, m);
}

}  // namespace gaitxai
