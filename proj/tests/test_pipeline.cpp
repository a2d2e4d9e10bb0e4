#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "gaitxai/pipeline.hpp"
#include "json.hpp"

using namespace gaitxai;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

RunConfig small_run(const fs::path& out) {
  RunConfig c;
  c.tasks = {TaskId::HC_K};
  c.models = {ModelKind::svm};
  c.norms = {Normalization::minmax};
  c.out_dir = out.string();
  return c;
}

}  // namespace

TEST_CASE("defaults follow the published protocol") {
  const RunConfig c;
  CHECK(c.folds == 10);
  CHECK(c.iterations == 30000);
  CHECK(c.epsilon == 1e-5);
  CHECK(c.svm_c == 0.1);
  CHECK(c.alphas == std::vector<double>{0.01, 0.05, 0.1});
  CHECK(c.tasks.size() == 6);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("config layering and unknown keys") {
  RunConfig base;
  base.out_dir = "from-env";
  base.seed = 7;
  const RunConfig c = RunConfig::from_json(R"({"seed": 11, "tasks": ["HC_K", "HC_A"], "norms": ["minmax"]})", base);
  CHECK(c.seed == 11);
  CHECK(c.out_dir == "from-env");
  CHECK(c.tasks == std::vector<TaskId>{TaskId::HC_K, TaskId::HC_A});
  CHECK(c.norms == std::vector<Normalization>{Normalization::minmax});
  CHECK_THROWS_AS(RunConfig::from_json(R"({"sed": 1})"), parse_error);
  CHECK_THROWS_AS(RunConfig::from_json("[1, 2]"), parse_error);
  const RunConfig round = RunConfig::from_json(c.to_json(), base);
  CHECK(round.to_json() == c.to_json());
  CHECK(nlohmann::json::parse(c.to_json()).contains("out") == false);
}

TEST_CASE("invalid settings are rejected") {
  RunConfig c;
  c.epsilon = 0.0;
  CHECK_THROWS(c.validate());
  RunConfig d;
  d.alphas = {1.5};
  CHECK_THROWS(d.validate());
}

TEST_CASE("sha256 digests") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("an unreadable dataset fails the ingest stage with exit code 2") {
  RunConfig c = small_run(fs::temp_directory_path() / "gaitxai_missing");
  c.data_path = "/nonexistent/grf.csv";
  try {
    cmd_run(c);
    FAIL("expected a stage error");
  } catch (const stage_error& e) {
    CHECK(e.exit_code() == 2);
    CHECK(e.stage() == "ingest");
    CHECK(std::string(e.what()).find("/nonexistent/grf.csv") != std::string::npos);
  }
}

TEST_CASE("ledger JSON round trip") {
  TaskResult r;
  r.task = TaskId::HC_A;
  r.model = "mlp";
  r.normalization = Normalization::minmax;
  r.occluded = true;
  r.per_fold_accuracy = {80, 90, 85.5};
  r.mean = 85.1666;
  r.sd = 5.0;
  r.zrb = 59.0;
  r.fold_seed = 123456789012345ULL;
  const std::string text = ledger_json({r});
  const auto back = ledger_from_json(text);
  REQUIRE(back.size() == 1);
  CHECK(back[0].task == r.task);
  CHECK(back[0].model == r.model);
  CHECK(back[0].occluded);
  CHECK(back[0].per_fold_accuracy == r.per_fold_accuracy);
  CHECK(back[0].fold_seed == r.fold_seed);
  CHECK(ledger_json(back) == text);
}

TEST_CASE("synthetic run writes a complete, hashed artifact tree") {
  const fs::path out = fs::temp_directory_path() / "gaitxai_pipeline_run";
  fs::remove_all(out);
  RunConfig c = small_run(out);
  const auto written = cmd_run(c);
  CHECK(!written.empty());
  for (const char* rel : {"spm/HC_K/minmax/spm.json", "relevance/HC_K/svm/minmax/K.csv",
                          "reports/HC_K/svm/minmax/overview.svg", "reports/HC_K/svm/minmax/figure_data.json",
                          "reports/tables/accuracy.csv", "reports/tables/occlusion.csv", "ledger/results.json",
                          "manifest.json"})
    CHECK_MESSAGE(fs::exists(out / rel), std::string(rel));

  const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  CHECK(manifest["seeds"]["root"] == 42);
  const auto& artifacts = manifest["artifacts"];
  REQUIRE(artifacts.size() > 5);
  for (const auto& a : artifacts) {
    const fs::path p = out / a["path"].get<std::string>();
    CHECK(sha256_file(p.string()) == a["sha256"].get<std::string>());
  }

  const auto ledger = ledger_from_json(slurp(out / "ledger/results.json"));
  bool has_zero_rule = false;
  for (const auto& r : ledger) has_zero_rule = has_zero_rule || r.model == "zero_rule";
  CHECK(has_zero_rule);

  // Re-rendering from saved artifacts reproduces the figure.
  const std::string svg = slurp(out / "reports/HC_K/svm/minmax/overview.svg");
  cmd_report(c);
  CHECK(slurp(out / "reports/HC_K/svm/minmax/overview.svg") == svg);
  fs::remove_all(out);
}

TEST_CASE("synth command exports the generated dataset") {
  const fs::path out = fs::temp_directory_path() / "gaitxai_pipeline_synth";
  fs::remove_all(out);
  const RunConfig c = small_run(out);
  cmd_synth(c);
  CHECK(fs::exists(out / "dataset/dataset.csv"));
  CHECK(fs::exists(out / "dataset/synth_spec.json"));
  CHECK(fs::exists(out / "manifest.json"));
  fs::remove_all(out);
}
