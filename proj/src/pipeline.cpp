#include "gaitxai/pipeline.hpp"

#include <openssl/evp.h>
#include <openssl/opensslv.h>

#include <Eigen/Core>
#include <algorithm>
#include <boost/version.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "gaitxai/synth.hpp"
#include "json.hpp"

namespace gaitxai {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

template <class F>
auto stage(std::string_view name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const stage_error&) {
    throw;
  } catch (const io_error& e) {
    throw stage_error(std::string(name), e.what(), 2);
  } catch (const std::exception& e) {
    throw stage_error(std::string(name), e.what(), 1);
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open '" + path + "'", path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class ArtifactWriter {
 public:
  explicit ArtifactWriter(fs::path root) : root_(std::move(root)) {}

  void write(const std::string& rel, const std::string& content) {
    const fs::path p = root_ / rel;
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot write '" + p.string() + "'", p.string());
    out << content;
    if (!out) throw io_error("write failed for '" + p.string() + "'", p.string());
    written_.push_back(rel);
  }
  const fs::path& root() const { return root_; }
  std::vector<std::string>& written() { return written_; }

 private:
  fs::path root_;
  std::vector<std::string> written_;
};

void log_line(const std::string& s) { std::cerr << s << std::endl; }

std::string fmt(double v, const char* f = "%.1f") {
  char buf[32];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

CvConfig cv_config(const RunConfig& cfg, bool explain) {
  CvConfig c;
  c.k = cfg.folds;
  c.root_seed = cfg.seed;
  c.schedule = TrainSchedule::scaled(cfg.iterations);
  c.svm.C = cfg.svm_c;
  c.lrp.epsilon = cfg.epsilon;
  c.explain = explain;
  c.jobs = cfg.jobs;
  return c;
}

std::uint64_t sides_seed(const RunConfig& cfg) { return derive_seed(cfg.seed, {hash_string("sides")}); }
std::uint64_t synth_seed(const RunConfig& cfg) { return derive_seed(cfg.seed, {hash_string("synth")}); }

std::string cell_dir(TaskId t, const std::string& model, Normalization n) {
  return std::string(to_string(t)) + "/" + model + "/" + std::string(to_string(n));
}

void write_manifest(ArtifactWriter& w, const RunConfig& cfg, std::string_view command) {
  ordered_json m;
  m["format"] = "gaitxai-manifest-1";
  m["version"] = kVersion;
  m["command"] = command;
  m["config"] = ordered_json::parse(cfg.to_json());
  ordered_json inputs = ordered_json::object();
  if (cfg.data_path) inputs["data_sha256"] = sha256_file(*cfg.data_path);
  if (cfg.schema_path) inputs["schema_sha256"] = sha256_file(*cfg.schema_path);
  if (!cfg.data_path && cfg.synth_spec_path) inputs["synth_spec_sha256"] = sha256_file(*cfg.synth_spec_path);
  m["inputs"] = inputs;
  ordered_json seeds;
  seeds["root"] = cfg.seed;
  seeds["hc_sides"] = sides_seed(cfg);
  if (!cfg.data_path) seeds["synth"] = synth_seed(cfg);
  ordered_json plans = ordered_json::object();
  for (TaskId t : cfg.tasks) plans[std::string(to_string(t))] = fold_plan_seed(cfg.seed, t);
  seeds["fold_plans"] = plans;
  m["seeds"] = seeds;
  m["libraries"] = {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                  std::to_string(EIGEN_MINOR_VERSION)},
                    {"boost", BOOST_LIB_VERSION},
                    {"openssl", OPENSSL_VERSION_TEXT}};

  std::vector<std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(w.root())) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), w.root()).generic_string();
    if (rel != "manifest.json") files.push_back(rel);
  }
  std::sort(files.begin(), files.end());
  ordered_json arts = ordered_json::array();
  for (const auto& rel : files) {
    const std::string bytes = read_file((w.root() / rel).string());
    arts.push_back({{"path", rel}, {"sha256", sha256_hex(bytes)}, {"bytes", bytes.size()}});
  }
  m["artifacts"] = arts;
  w.write("manifest.json", m.dump(1) + "\n");
}

void write_dataset(ArtifactWriter& w, const Dataset& d) {
  std::ostringstream csv;
  write_grf_csv(csv, d);
  w.write("dataset/dataset.csv", csv.str());
  w.write("dataset/extrema.json", extrema_manifest_json(minmax_normalize(d)));
}

void write_spm(ArtifactWriter& w, const RunConfig& cfg, TaskId t, Normalization n, const std::vector<SpmResult>& spm,
               const std::vector<InputVector>& inputs, const Dataset& d, const Task& task) {
  const std::string dir = "spm/" + std::string(to_string(t)) + "/" + std::string(to_string(n)) + "/";
  for (std::size_t s = 0; s < spm.size(); ++s) w.write(dir + slot_name(s) + ".csv", spm_csv(spm[s]));
  w.write(dir + "spm.json", spm_json(std::string(to_string(t)), std::string(to_string(n)), spm));
  if (cfg.permutations == 0) return;
  ordered_json perm = ordered_json::object();
  for (std::size_t s = 0; s < kSlots; ++s) {
    const auto [A, B] = slot_groups(inputs, d, task, s);
    const PermutationResult pr = permutation_maxt(
        A, B, cfg.permutations, derive_seed(cfg.seed, {hash_string(to_string(t)), hash_string("permutation"), s}),
        cfg.jobs);
    ordered_json c;
    c["exhaustive"] = pr.exhaustive;
    c["n"] = pr.max_t.size();
    ordered_json th = ordered_json::object();
    for (double a : cfg.alphas) th[fmt(a, "%.12g")] = pr.threshold(a);
    c["threshold"] = th;
    perm[slot_name(s)] = c;
  }
  w.write(dir + "permutation.json", perm.dump(1) + "\n");
}

void write_figure(ArtifactWriter& w, const FigureData& f) {
  const std::string dir = "reports/" + f.task + "/" + f.model + "/" + f.normalization + "/";
  w.write(dir + "figure_data.json", f.to_json());
  w.write(dir + "curves.csv", figure_curves_csv(f));
  w.write(dir + "overview.svg", render_overview(f));
}

void write_comparison(ArtifactWriter& w, const std::vector<FigureData>& rows) {
  const std::string dir = "reports/" + rows[0].task + "/comparison/" + rows[0].normalization + "/";
  w.write(dir + "comparison.svg", render_method_comparison(rows));
  std::ostringstream csv;
  csv << "index,side,component,pct_stance,effect_size";
  for (const auto& r : rows) csv << ",total_relevance_" << r.model;
  csv << "\n";
  const std::vector<double> eff = rows[0].effect_size();
  for (std::size_t i = 0; i < 3 * kNodes; ++i) {
    const std::size_t slot = i / kNodes;
    csv << i << "," << to_string(side_of_slot(slot)) << "," << to_string(component_of_slot(slot)) << ","
        << fmt(100.0 * static_cast<double>(i % kNodes) / 100.0, "%.12g") << "," << fmt(eff[i], "%.12g");
    for (const auto& r : rows) csv << "," << fmt(r.total_relevance[i], "%.12g");
    csv << "\n";
  }
  w.write(dir + "comparison.csv", csv.str());
}

TableRequest table_request(const RunConfig& cfg) {
  TableRequest req;
  req.tasks = cfg.tasks;
  req.norms = cfg.norms;
  for (ModelKind m : cfg.models) req.models.emplace_back(to_string(m));
  return req;
}

void write_tables(ArtifactWriter& w, const std::vector<TaskResult>& ledger, const TableRequest& req, bool accuracy,
                  bool occlusion) {
  if (accuracy) w.write("reports/tables/accuracy.csv", accuracy_table_csv(ledger, req));
  if (occlusion) {
    w.write("reports/tables/occlusion.csv", occlusion_table_csv(ledger, req));
    w.write("reports/tables/occlusion_tests.csv", occlusion_tests_csv(ledger, req));
  }
}

void write_relevance(ArtifactWriter& w, const TaskResult& r, const Task& task,
                     const std::vector<ClassRelevanceSummary>& summaries) {
  const std::string dir = "relevance/" + cell_dir(r.task, r.model, r.normalization) + "/";
  for (std::size_t c = 0; c < summaries.size(); ++c) w.write(dir + task.class_names[c] + ".csv", relevance_csv(summaries[c]));
  ordered_json audit = ordered_json::array();
  for (const auto& f : r.folds) {
    for (const auto& m : f.relevance) {
      audit.push_back({{"fold", f.fold},
                       {"trial_index", m.trial_index},
                       {"target_class", m.target_class},
                       {"start_relevance", m.start_relevance},
                       {"relevance_sum", m.sum()},
                       {"bias_absorbed", m.total_bias_absorbed()},
                       {"stabilizer_absorbed", m.total_absorbed() - m.total_bias_absorbed()}});
    }
  }
  w.write(dir + "audit.json", audit.dump(1) + "\n");
}

struct Stages {
  bool explain = true;
  bool occlusion = true;
};

std::vector<std::string> execute(const RunConfig& cfg, std::string_view command, Stages st) {
  stage("config", [&] { cfg.validate(); });
  ArtifactWriter w(cfg.out_dir);
  const Dataset d = stage("ingest", [&] { return load_dataset(cfg); });
  std::map<Normalization, std::vector<InputVector>> inputs;
  stage("normalize", [&] {
    for (Normalization n : cfg.norms) inputs[n] = prepare_inputs(d, n, false);
  });

  std::vector<TaskResult> ledger;
  const CvConfig base_cfg = cv_config(cfg, st.explain);
  const CvConfig occl_cfg = cv_config(cfg, false);
  for (TaskId tid : cfg.tasks) {
    const Task task = make_task(tid);
    const std::string tname(to_string(tid));
    std::map<Normalization, std::vector<SpmResult>> spm;
    if (task.binary()) {
      stage("spm", [&] {
        for (Normalization n : cfg.norms) {
          spm[n] = task_spm(inputs[n], d, task, cfg.alphas);
          write_spm(w, cfg, tid, n, spm[n], inputs[n], d, task);
        }
      });
    }
    const TaskResult zr = stage("train", [&] { return run_zero_rule(d, task, base_cfg); });
    for (Normalization n : cfg.norms) {
      TaskResult z = zr;
      z.normalization = n;
      ledger.push_back(std::move(z));
    }
    std::map<Normalization, std::vector<FigureData>> figures;
    for (ModelKind mk : cfg.models) {
      const std::string mname(to_string(mk));
      for (Normalization n : cfg.norms) {
        CvConfig cc = base_cfg;
        if (cfg.save_checkpoints) cc.checkpoint_dir = (w.root() / "checkpoints" / cell_dir(tid, mname, n) / "baseline").string();
        TaskResult r = stage("train", [&] { return run_task(d, task, mk, n, false, cc); });
        log_line("[" + std::string(command) + "] " + tname + " " + mname + " " + std::string(to_string(n)) + ": " +
                 fmt(r.mean) + " (" + fmt(r.sd) + "), ZRB " + fmt(r.zrb));
        if (st.explain) {
          stage("explain", [&] {
            const auto sums = cell_summaries(r, task, inputs[n], d);
            write_relevance(w, r, task, sums);
            FigureData f;
            f.task = tname;
            f.model = mname;
            f.normalization = std::string(to_string(n));
            f.class_names = task.class_names;
            f.classes = sums;
            f.total_relevance = total_relevance(std::span<const ClassRelevanceSummary>(sums), cfg.total_mode);
            f.total_relevance_mode = std::string(to_string(cfg.total_mode));
            f.alphas = cfg.alphas;
            if (task.binary()) f.spm = spm[n];
            stage("report", [&] { write_figure(w, f); });
            figures[n].push_back(std::move(f));
          });
        }
        for (auto& f : r.folds) f.relevance.clear();
        ledger.push_back(std::move(r));
        if (st.occlusion) {
          CvConfig oc = occl_cfg;
          if (cfg.save_checkpoints) oc.checkpoint_dir = (w.root() / "checkpoints" / cell_dir(tid, mname, n) / "occluded").string();
          TaskResult o = stage("occlude", [&] { return run_task(d, task, mk, n, true, oc); });
          log_line("[" + std::string(command) + "] " + tname + " " + mname + " " + std::string(to_string(n)) +
                   " occluded: " + fmt(o.mean) + " (" + fmt(o.sd) + ")");
          ledger.push_back(std::move(o));
        }
      }
    }
    if (st.explain && task.binary()) {
      stage("report", [&] {
        for (auto& [n, rows] : figures) {
          std::set<std::string> present;
          for (const auto& f : rows) present.insert(f.model);
          if (present.count("svm") && present.count("mlp") && present.count("cnn")) write_comparison(w, rows);
        }
      });
    }
  }
  stage("report", [&] {
    w.write("ledger/results.json", ledger_json(ledger));
    write_tables(w, ledger, table_request(cfg), true, st.occlusion);
    write_manifest(w, cfg, command);
  });
  return w.written();
}

ordered_json result_to_json(const TaskResult& r) {
  ordered_json j;
  j["task"] = std::string(to_string(r.task));
  j["model"] = r.model;
  j["normalization"] = std::string(to_string(r.normalization));
  j["occluded"] = r.occluded;
  j["per_fold_accuracy"] = r.per_fold_accuracy;
  j["mean"] = r.mean;
  j["sd"] = r.sd;
  j["pooled_accuracy"] = r.pooled_accuracy;
  j["zrb"] = r.zrb;
  j["fold_seed"] = r.fold_seed;
  ordered_json folds = ordered_json::array();
  for (const auto& f : r.folds) {
    folds.push_back({{"fold", f.fold},
                     {"test_accuracy", f.test_accuracy},
                     {"validation_accuracy", f.validation_accuracy},
                     {"n_train", f.n_train},
                     {"n_validation", f.n_validation},
                     {"n_test", f.n_test},
                     {"n_correct", f.n_correct},
                     {"init_seed", f.init_seed},
                     {"batch_seed", f.batch_seed},
                     {"leakage_free", f.leakage_free},
                     {"test_trials", f.test_trials},
                     {"predictions", f.predictions}});
  }
  j["folds"] = folds;
  return j;
}

TaskResult result_from_json(const nlohmann::json& j) {
  TaskResult r;
  r.task = parse_task_id(j.at("task").get<std::string>());
  r.model = j.at("model").get<std::string>();
  r.normalization = parse_normalization(j.at("normalization").get<std::string>());
  r.occluded = j.at("occluded").get<bool>();
  r.per_fold_accuracy = j.at("per_fold_accuracy").get<std::vector<double>>();
  r.mean = j.at("mean").get<double>();
  r.sd = j.at("sd").get<double>();
  r.pooled_accuracy = j.at("pooled_accuracy").get<double>();
  r.zrb = j.at("zrb").get<double>();
  r.fold_seed = j.at("fold_seed").get<std::uint64_t>();
  for (const auto& f : j.at("folds")) {
    FoldResult fr;
    fr.fold = f.at("fold").get<std::size_t>();
    fr.test_accuracy = f.at("test_accuracy").get<double>();
    fr.validation_accuracy = f.at("validation_accuracy").get<double>();
    fr.n_train = f.at("n_train").get<std::size_t>();
    fr.n_validation = f.at("n_validation").get<std::size_t>();
    fr.n_test = f.at("n_test").get<std::size_t>();
    fr.n_correct = f.at("n_correct").get<std::size_t>();
    fr.init_seed = f.at("init_seed").get<std::uint64_t>();
    fr.batch_seed = f.at("batch_seed").get<std::uint64_t>();
    fr.leakage_free = f.at("leakage_free").get<bool>();
    fr.test_trials = f.at("test_trials").get<std::vector<std::size_t>>();
    fr.predictions = f.at("predictions").get<std::vector<std::size_t>>();
    r.folds.push_back(std::move(fr));
  }
  return r;
}

}  // namespace

RunConfig RunConfig::from_json(std::string_view text, const RunConfig& base) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(std::string("config: ") + e.what(), 0);
  }
  if (!j.is_object()) throw parse_error("config: top level must be an object", 0);
  static const std::set<std::string> known{"data",  "schema",     "synth_spec", "tasks",      "models",
                                           "norms", "seed",       "alphas",     "permutations", "out",
                                           "jobs",  "folds",      "iterations", "epsilon",    "svm_c",
                                           "occlusion", "save_checkpoints", "total_relevance_mode"};
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw parse_error("config: unknown key '" + k + "'", 0);
  }
  RunConfig c = base;
  try {
    if (j.contains("data")) {
      if (j["data"].is_null()) c.data_path.reset();
      else c.data_path = j["data"].get<std::string>();
    }
    if (j.contains("schema")) {
      if (j["schema"].is_null()) c.schema_path.reset();
      else c.schema_path = j["schema"].get<std::string>();
    }
    if (j.contains("synth_spec")) {
      if (j["synth_spec"].is_null()) c.synth_spec_path.reset();
      else c.synth_spec_path = j["synth_spec"].get<std::string>();
    }
    if (j.contains("tasks")) {
      c.tasks.clear();
      for (const auto& t : j["tasks"]) c.tasks.push_back(parse_task_id(t.get<std::string>()));
    }
    if (j.contains("models")) {
      c.models.clear();
      for (const auto& m : j["models"]) c.models.push_back(parse_model_kind(m.get<std::string>()));
    }
    if (j.contains("norms")) {
      c.norms.clear();
      for (const auto& n : j["norms"]) c.norms.push_back(parse_normalization(n.get<std::string>()));
    }
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("alphas")) c.alphas = j["alphas"].get<std::vector<double>>();
    if (j.contains("permutations")) c.permutations = j["permutations"].get<std::size_t>();
    if (j.contains("out")) c.out_dir = j["out"].get<std::string>();
    if (j.contains("jobs")) c.jobs = j["jobs"].get<std::size_t>();
    if (j.contains("folds")) c.folds = j["folds"].get<std::size_t>();
    if (j.contains("iterations")) c.iterations = j["iterations"].get<std::size_t>();
    if (j.contains("epsilon")) c.epsilon = j["epsilon"].get<double>();
    if (j.contains("svm_c")) c.svm_c = j["svm_c"].get<double>();
    if (j.contains("occlusion")) c.occlusion = j["occlusion"].get<bool>();
    if (j.contains("save_checkpoints")) c.save_checkpoints = j["save_checkpoints"].get<bool>();
    if (j.contains("total_relevance_mode")) {
      const auto m = j["total_relevance_mode"].get<std::string>();
      if (m == "abs_of_means") c.total_mode = TotalRelevanceMode::abs_of_means;
      else if (m == "mean_of_abs") c.total_mode = TotalRelevanceMode::mean_of_abs;
      else throw parse_error("config: unknown total_relevance_mode '" + m + "'", 0);
    }
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(std::string("config: ") + e.what(), 0);
  }
  return c;
}

std::string RunConfig::to_json() const {
  ordered_json j;
  j["data"] = data_path ? ordered_json(*data_path) : ordered_json(nullptr);
  j["schema"] = schema_path ? ordered_json(*schema_path) : ordered_json(nullptr);
  j["synth_spec"] = synth_spec_path ? ordered_json(*synth_spec_path) : ordered_json(nullptr);
  ordered_json t = ordered_json::array(), m = ordered_json::array(), n = ordered_json::array();
  for (TaskId x : tasks) t.push_back(std::string(to_string(x)));
  for (ModelKind x : models) m.push_back(std::string(to_string(x)));
  for (Normalization x : norms) n.push_back(std::string(to_string(x)));
  j["tasks"] = t;
  j["models"] = m;
  j["norms"] = n;
  j["seed"] = seed;
  j["alphas"] = alphas;
  j["permutations"] = permutations;
  j["jobs"] = jobs;
  j["folds"] = folds;
  j["iterations"] = iterations;
  j["epsilon"] = epsilon;
  j["svm_c"] = svm_c;
  j["occlusion"] = occlusion;
  j["save_checkpoints"] = save_checkpoints;
  j["total_relevance_mode"] = std::string(to_string(total_mode));
  return j.dump(1);
}

void RunConfig::validate() const {
  if (tasks.empty()) throw precondition_error("config: no tasks selected");
  if (models.empty()) throw precondition_error("config: no models selected");
  if (norms.empty()) throw precondition_error("config: no normalization selected");
  if (alphas.empty()) throw precondition_error("config: no alpha levels");
  for (double a : alphas)
    if (!(a > 0.0 && a < 1.0)) throw precondition_error("config: alpha levels must lie in (0, 1)");
  if (folds < 3) throw precondition_error("config: at least 3 folds are required");
  if (iterations == 0) throw precondition_error("config: iterations must be positive");
  if (!(epsilon > 0.0)) throw precondition_error("config: epsilon must be positive");
  if (!(svm_c > 0.0)) throw precondition_error("config: svm_c must be positive");
  if (jobs == 0) throw precondition_error("config: jobs must be at least 1");
  if (permutations != 0 && permutations < 100) throw precondition_error("config: permutations must be 0 or >= 100");
  if (out_dir.empty()) throw precondition_error("config: empty output directory");
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw error("sha256: digest failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

std::string sha256_file(const std::string& path) { return sha256_hex(read_file(path)); }

Dataset load_dataset(const RunConfig& cfg) {
  Dataset d;
  if (cfg.data_path) {
    CsvSchema schema;
    if (cfg.schema_path) schema = CsvSchema::from_json(read_file(*cfg.schema_path));
    d = load_grf_csv(*cfg.data_path, schema);
  } else {
    const SynthSpec spec =
        cfg.synth_spec_path ? SynthSpec::from_json(read_file(*cfg.synth_spec_path)) : default_two_class_spec();
    Rng rng(synth_seed(cfg));
    d = synth_generate(spec, rng);
  }
  d.validate();
  const bool unassigned = std::any_of(d.trials.begin(), d.trials.end(),
                                      [](const GrfTrial& t) { return t.side_order == SideOrder::unassigned; });
  if (unassigned) {
    Rng rng(sides_seed(cfg));
    d = assign_sides_hc(d, rng);
  }
  return d;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> slot_groups(const std::vector<InputVector>& inputs, const Dataset& d,
                                                        const Task& task, std::size_t slot) {
  if (!task.binary()) throw precondition_error("slot_groups: binary task required");
  std::vector<std::size_t> a, b;
  for (std::size_t i : task_trials(d, task)) (*task.class_of(d.trials[i].class_label) == 0 ? a : b).push_back(i);
  const auto fill = [&](const std::vector<std::size_t>& idx) {
    Eigen::MatrixXd M(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(kNodes));
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t q = 0; q < kNodes; ++q)
        M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(q)) = inputs[idx[r]].values[input_index(slot, q)];
    return M;
  };
  return {fill(a), fill(b)};
}

std::vector<SpmResult> task_spm(const std::vector<InputVector>& inputs, const Dataset& d, const Task& task,
                                std::span<const double> alphas) {
  std::vector<SpmResult> out;
  for (std::size_t s = 0; s < kSlots; ++s) {
    const auto [A, B] = slot_groups(inputs, d, task, s);
    out.push_back(spm_two_sample(A, B, alphas, true));
  }
  return out;
}

std::vector<ClassRelevanceSummary> cell_summaries(const TaskResult& r, const Task& task,
                                                  const std::vector<InputVector>& inputs, const Dataset& d) {
  std::vector<std::vector<RelevanceMap>> maps(task.n_classes());
  std::vector<std::vector<InputVector>> sig(task.n_classes());
  for (const auto& f : r.folds) {
    for (const auto& m : f.relevance) {
      const std::size_t c = *task.class_of(d.trials[m.trial_index].class_label);
      maps[c].push_back(m);
      sig[c].push_back(inputs[m.trial_index]);
    }
  }
  std::vector<ClassRelevanceSummary> out;
  for (std::size_t c = 0; c < task.n_classes(); ++c) {
    if (maps[c].empty()) throw precondition_error("no explained test trials for class " + task.class_names[c]);
    out.push_back(class_average(maps[c], sig[c]));
  }
  return out;
}

std::string ledger_json(const std::vector<TaskResult>& ledger) {
  ordered_json j = ordered_json::array();
  for (const auto& r : ledger) j.push_back(result_to_json(r));
  return j.dump(1) + "\n";
}

std::vector<TaskResult> ledger_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    std::vector<TaskResult> out;
    for (const auto& r : j) out.push_back(result_from_json(r));
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(std::string("ledger: ") + e.what(), 0);
  }
}

std::vector<std::string> cmd_ingest(const RunConfig& cfg) {
  if (!cfg.data_path) throw stage_error("config", "ingest needs a dataset path", 1);
  ArtifactWriter w(cfg.out_dir);
  const Dataset d = stage("ingest", [&] { return load_dataset(cfg); });
  stage("export", [&] {
    write_dataset(w, d);
    write_manifest(w, cfg, "ingest");
  });
  return w.written();
}

std::vector<std::string> cmd_synth(const RunConfig& cfg) {
  RunConfig c = cfg;
  c.data_path.reset();
  ArtifactWriter w(c.out_dir);
  const Dataset d = stage("synth", [&] { return load_dataset(c); });
  stage("export", [&] {
    const SynthSpec spec =
        c.synth_spec_path ? SynthSpec::from_json(read_file(*c.synth_spec_path)) : default_two_class_spec();
    w.write("dataset/synth_spec.json", spec.to_json());
    write_dataset(w, d);
    write_manifest(w, c, "synth");
  });
  return w.written();
}

std::vector<std::string> cmd_spm(const RunConfig& cfg) {
  stage("config", [&] { cfg.validate(); });
  ArtifactWriter w(cfg.out_dir);
  const Dataset d = stage("ingest", [&] { return load_dataset(cfg); });
  stage("spm", [&] {
    for (TaskId t : cfg.tasks) {
      const Task task = make_task(t);
      if (!task.binary()) continue;
      for (Normalization n : cfg.norms) {
        const auto inputs = prepare_inputs(d, n, false);
        write_spm(w, cfg, t, n, task_spm(inputs, d, task, cfg.alphas), inputs, d, task);
      }
    }
  });
  stage("export", [&] { write_manifest(w, cfg, "spm"); });
  return w.written();
}

std::vector<std::string> cmd_explain(const RunConfig& cfg) { return execute(cfg, "explain", {true, false}); }
std::vector<std::string> cmd_occlude(const RunConfig& cfg) { return execute(cfg, "occlude", {false, true}); }
std::vector<std::string> cmd_run(const RunConfig& cfg) { return execute(cfg, "run", {true, cfg.occlusion}); }

std::vector<std::string> cmd_report(const RunConfig& cfg) {
  ArtifactWriter w(cfg.out_dir);
  const fs::path ledger_path = w.root() / "ledger" / "results.json";
  const auto ledger = stage("report", [&] { return ledger_from_json(read_file(ledger_path.string())); });
  stage("report", [&] {
    std::vector<fs::path> data_files;
    if (fs::exists(w.root() / "reports")) {
      for (const auto& e : fs::recursive_directory_iterator(w.root() / "reports"))
        if (e.is_regular_file() && e.path().filename() == "figure_data.json") data_files.push_back(e.path());
    }
    std::sort(data_files.begin(), data_files.end());
    std::map<std::pair<std::string, std::string>, std::vector<FigureData>> groups;
    for (const auto& p : data_files) {
      FigureData f = FigureData::from_json(read_file(p.string()));
      write_figure(w, f);
      if (f.has_spm() && f.classes.size() == 2) groups[{f.task, f.normalization}].push_back(std::move(f));
    }
    for (auto& [key, rows] : groups) {
      // Same row order as a fresh run.
      std::vector<FigureData> ordered;
      for (ModelKind m : cfg.models)
        for (const auto& f : rows)
          if (f.model == to_string(m)) ordered.push_back(f);
      std::set<std::string> present;
      for (const auto& f : ordered) present.insert(f.model);
      if (present.size() == 3) write_comparison(w, ordered);
    }
    const bool any_occluded = std::any_of(ledger.begin(), ledger.end(), [](const TaskResult& r) { return r.occluded; });
    write_tables(w, ledger, table_request(cfg), true, any_occluded);
    write_manifest(w, cfg, "report");
  });
  return w.written();
}

}  // namespace gaitxai
