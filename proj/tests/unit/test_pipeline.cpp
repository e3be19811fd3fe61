#include <doctest.h>

#include <fstream>
#include <sstream>

#include "cvsig/pipeline.hpp"
#include "helpers.hpp"

using namespace cvsig;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

config::RunConfig tiny_run(const std::filesystem::path& out) {
  auto c = config::parse_config(R"(
[run]
seed = 3
[simulate]
n_persons = 20
days = 2
[preprocess]
min_eligible_days = 2
[model]
signature_size = 4
[train]
max_epochs = 1
batch_size = 4
window_length = 600
tune_minutes = 720
[baselines]
gbt_rounds = 3
gbt_max_depth = 2
[eval]
downstream_repeats = 1
[sweep]
signature_sizes = 2, 4
[plot]
minutes = 300
)");
  c.output_dir = out;
  return c;
}

}  // namespace

TEST_CASE("commands fail clearly when inputs are missing") {
  const auto cfg = tiny_run(testing::tmp_dir("pipeline_missing"));
  CHECK_THROWS_WITH(pipeline::cmd_preprocess(cfg), doctest::Contains("run 'simulate' first"));
  CHECK_THROWS(pipeline::cmd_train(cfg));
  CHECK_THROWS(pipeline::cmd_eval(cfg));
  CHECK_THROWS(pipeline::cmd_sweep(cfg, "depth"));
}

TEST_CASE("a tiny end-to-end run is complete and reproducible") {
  const auto dir = testing::tmp_dir("pipeline_run");
  auto cfg = tiny_run(dir / "a");
  pipeline::cmd_simulate(cfg);
  pipeline::cmd_preprocess(cfg);
  const auto files = pipeline::data_files(cfg);
  for (const auto& p : {files.minutes, files.persons, files.latent, files.preprocessed, files.splits}) {
    CHECK(std::filesystem::exists(p));
  }
  const auto ds = pipeline::load_dataset(cfg);
  CHECK_FALSE(ds.train.empty());
  CHECK_FALSE(ds.tune.empty());
  REQUIRE(ds.validation.size() >= 2);

  const auto trained = pipeline::cmd_train(cfg);
  CHECK(trained.history.epochs.size() == 1);
  const auto log = slurp(cfg.output_dir / "model" / "training_log.csv");
  CHECK(log.find(",0.000\n") != std::string::npos);  // seconds zeroed

  const auto report = pipeline::cmd_eval(cfg);
  CHECK(report["n_validation"] == ds.validation.size());
  CHECK(report["mean_baseline_mse"].get<double>() > 0.0);
  CHECK(report.contains("consistency"));
  // too few persons for 20 per class: every downstream task is skipped
  CHECK(report["downstream_skipped"].size() == 3);
  for (const char* f : {"model_errors.csv", "consistency.csv", "downstream.csv", "baselines.csv", "signatures.csv",
                        "report.json"}) {
    CHECK(std::filesystem::exists(cfg.output_dir / "eval" / f));
  }

  const auto table = pipeline::cmd_sweep(cfg, "signature_size");
  CHECK(table.rows.size() == 2);

  const auto svg_path = pipeline::cmd_plot(cfg);
  const auto svg = slurp(svg_path);
  CHECK(svg.find("<svg xmlns=\"http://www.w3.org/2000/svg\"") != std::string::npos);
  CHECK(svg.find("prediction-own") != std::string::npos);
  CHECK(svg.find("prediction-other") != std::string::npos);
  CHECK(svg.find("heart-rate-panel") != std::string::npos);
  CHECK(svg.find("activity-panel") != std::string::npos);

  // a second run into a fresh directory gives identical bytes
  auto again = cfg;
  again.output_dir = dir / "b";
  pipeline::cmd_simulate(again);
  pipeline::cmd_preprocess(again);
  pipeline::cmd_train(again);
  pipeline::cmd_eval(again);
  for (const char* rel : {"data/minutes.csv", "data/preprocessed.json", "data/splits.csv", "model/checkpoint.json",
                          "model/training_log.csv", "eval/report.json", "eval/consistency.csv"}) {
    INFO(rel);
    CHECK(slurp(cfg.output_dir / rel) == slurp(again.output_dir / rel));
  }

  auto bad = cfg;
  bad.plot_person = "nobody";
  CHECK_THROWS(pipeline::cmd_plot(bad));
}

TEST_CASE("splits CSV round trip") {
  const auto dir = testing::tmp_dir("pipeline_splits");
  std::map<std::string, data::Split> s = {{"P1", data::Split::kTrain}, {"P2", data::Split::kTune},
                                          {"P3", data::Split::kValidation}};
  pipeline::write_splits_csv(dir / "s.csv", s);
  CHECK(pipeline::read_splits_csv(dir / "s.csv") == s);
  std::ofstream(dir / "bad.csv") << "id,split\n";
  CHECK_THROWS(pipeline::read_splits_csv(dir / "bad.csv"));
}
