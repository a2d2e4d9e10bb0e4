#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "gaitxai/pipeline.hpp"
#include "gaitxai/selftest.hpp"

namespace {

using namespace gaitxai;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct Flags {
  std::optional<std::string> config, data, schema, synth_spec, out, tasks, models, norm, alphas;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs, permutations, iterations, folds;
  bool no_occlusion = false;
  bool checkpoints = false;
  // selftest
  bool slow = false;
  std::optional<std::string> criteria;
  std::optional<double> epsilon;
};

RunConfig build_config(const Flags& f) {
  RunConfig cfg;
  if (const char* env = std::getenv("GAITXAI_OUT"); env && *env) cfg.out_dir = env;
  if (f.config) {
    std::ifstream in(*f.config);
    if (!in) throw io_error("cannot open config '" + *f.config + "'", *f.config);
    std::stringstream ss;
    ss << in.rdbuf();
    cfg = RunConfig::from_json(ss.str(), cfg);
  }
  if (f.data) cfg.data_path = *f.data;
  if (f.schema) cfg.schema_path = *f.schema;
  if (f.synth_spec) cfg.synth_spec_path = *f.synth_spec;
  if (f.out) cfg.out_dir = *f.out;
  if (f.seed) cfg.seed = *f.seed;
  if (f.jobs) cfg.jobs = *f.jobs;
  if (f.permutations) cfg.permutations = *f.permutations;
  if (f.iterations) cfg.iterations = *f.iterations;
  if (f.folds) cfg.folds = *f.folds;
  if (f.epsilon) cfg.epsilon = *f.epsilon;
  if (f.no_occlusion) cfg.occlusion = false;
  if (f.checkpoints) cfg.save_checkpoints = true;
  if (f.tasks) {
    cfg.tasks.clear();
    for (const auto& t : split_list(*f.tasks)) cfg.tasks.push_back(parse_task_id(t));
  }
  if (f.models) {
    cfg.models.clear();
    for (const auto& m : split_list(*f.models)) cfg.models.push_back(parse_model_kind(m));
  }
  if (f.norm) {
    cfg.norms.clear();
    for (const auto& n : split_list(*f.norm)) cfg.norms.push_back(parse_normalization(n));
  }
  if (f.alphas) {
    cfg.alphas.clear();
    for (const auto& a : split_list(*f.alphas)) cfg.alphas.push_back(std::stod(a));
  }
  return cfg;
}

int run_selftest_command(const Flags& f) {
  SelftestOptions opt;
  opt.slow = f.slow;
  if (f.permutations) opt.permutations = *f.permutations;
  if (f.epsilon) opt.epsilon = *f.epsilon;
  if (f.seed) opt.seed = *f.seed;
  if (f.jobs) opt.jobs = *f.jobs;
  if (f.criteria)
    for (const auto& c : split_list(*f.criteria)) opt.only.insert(std::stoi(c));
  if (const char* p = std::getenv("GAITXAI_GAITREC_CSV"); p && *p) opt.gaitrec_csv = p;
  if (const char* p = std::getenv("GAITXAI_GAITREC_SCHEMA"); p && *p) opt.gaitrec_schema = p;
  opt.on_result = [](const CriterionResult& r) { std::cout << format_result(r) << std::endl; };
  const auto results = run_selftest(opt);
  std::size_t fails = 0, skips = 0;
  for (const auto& r : results) {
    fails += r.status == CriterionStatus::fail;
    skips += r.status == CriterionStatus::skip;
  }
  std::cout << results.size() - fails - skips << " passed, " << fails << " failed, " << skips << " skipped" << std::endl;
  return fails == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Explainable gait classification from ground reaction forces"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(gaitxai::kVersion));

  Flags f;
  app.add_option("--config", f.config, "JSON run configuration; flags take precedence");
  app.add_option("--data", f.data, "Ground reaction force CSV");
  app.add_option("--schema", f.schema, "JSON column mapping for the CSV");
  app.add_option("--synth-spec", f.synth_spec, "Synthetic dataset spec (used without --data)");
  app.add_option("--out", f.out, "Output directory (default: $GAITXAI_OUT or ./out)");
  app.add_option("--seed", f.seed, "Root seed");
  app.add_option("--jobs", f.jobs, "Parallel fold workers")->check(CLI::PositiveNumber);
  app.add_option("--norm", f.norm, "none, minmax or both as a list");
  app.add_option("--tasks", f.tasks, "Comma separated tasks, e.g. HC_GD,HC_K");
  app.add_option("--models", f.models, "Comma separated models: svm,mlp,cnn");
  app.add_option("--alphas", f.alphas, "Comma separated significance levels");
  app.add_option("--permutations", f.permutations, "Permutation oracle budget (0 disables)");
  app.add_option("--iterations", f.iterations, "SGD iterations per training run");
  app.add_option("--folds", f.folds, "Cross-validation folds");
  app.add_option("--epsilon", f.epsilon, "LRP stabilizer");
  app.add_flag("--no-occlusion", f.no_occlusion, "Skip the occlusion retraining in 'run'");
  app.add_flag("--checkpoints", f.checkpoints, "Save model checkpoints per fold");

  auto* ingest = app.add_subcommand("ingest", "Validate a dataset and write its canonical dump");
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  auto* run = app.add_subcommand("run", "Full pipeline: train, explain, spm, occlude, report");
  auto* explain = app.add_subcommand("explain", "Cross-validate and export relevance and figures");
  auto* spm = app.add_subcommand("spm", "Statistical parametric mapping of the class differences");
  auto* occlude = app.add_subcommand("occlude", "Baseline and occluded cross-validation with tables");
  auto* report = app.add_subcommand("report", "Re-render figures and tables from an output directory");
  auto* selftest = app.add_subcommand("selftest", "Run the acceptance suite");
  selftest->add_flag("--slow", f.slow, "Include the Monte-Carlo RFT check");
  selftest->add_option("--criteria", f.criteria, "Comma separated criterion ids");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (selftest->parsed()) return run_selftest_command(f);
    const RunConfig cfg = build_config(f);
    std::vector<std::string> written;
    if (ingest->parsed()) written = cmd_ingest(cfg);
    else if (synth->parsed()) written = cmd_synth(cfg);
    else if (run->parsed()) written = cmd_run(cfg);
    else if (explain->parsed()) written = cmd_explain(cfg);
    else if (spm->parsed()) written = cmd_spm(cfg);
    else if (occlude->parsed()) written = cmd_occlude(cfg);
    else if (report->parsed()) written = cmd_report(cfg);
    std::cerr << "wrote " << written.size() << " files to " << cfg.out_dir << std::endl;
    return 0;
  } catch (const stage_error& e) {
    std::cerr << "gaitxai: stage '" << e.stage() << "' failed: " << e.what() << std::endl;
    return e.exit_code();
  } catch (const io_error& e) {
    std::cerr << "gaitxai: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "gaitxai: " << e.what() << std::endl;
    return 1;
  }
}
