// cvsig: simulate | preprocess | train | eval | sweep | plot

#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "cvsig/config.hpp"
#include "cvsig/csv.hpp"
#include "cvsig/pipeline.hpp"

namespace {

using cvsig::config::RunConfig;

struct GlobalFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

RunConfig resolve(const GlobalFlags& flags) {
  RunConfig cfg = flags.config_path.empty() ? RunConfig{} : cvsig::config::load_config(flags.config_path);
  if (flags.seed) cfg.set_seed(*flags.seed);
  if (!flags.out_dir.empty()) cfg.output_dir = flags.out_dir;
  cfg.validate();
  return cfg;
}

void add_global_flags(CLI::App* cmd, GlobalFlags& flags) {
  cmd->add_option("--config", flags.config_path, "INI configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", flags.seed, "override the run seed");
  cmd->add_option("--out", flags.out_dir, "output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cardiovascular signature pipeline"};
  app.require_subcommand(1);
  GlobalFlags flags;
  add_global_flags(&app, flags);

  auto* simulate = app.add_subcommand("simulate", "generate a synthetic cohort");
  auto* preprocess = app.add_subcommand("preprocess", "filter, whiten and split the cohort");
  auto* train = app.add_subcommand("train", "train the signature model");
  auto* evaluate = app.add_subcommand("eval", "baselines, consistency and downstream tasks");
  auto* sweep = app.add_subcommand("sweep", "signature-size or training-fraction sweep");
  auto* plot = app.add_subcommand("plot", "SVG reconstruction plot");
  for (auto* cmd : {simulate, preprocess, train, evaluate, sweep, plot}) {
    add_global_flags(cmd, flags);
    cmd->fallthrough();
  }

  std::string axis;
  sweep->add_option("--axis", axis, "signature_size or train_fraction (default from config)");
  std::string checkpoint;
  evaluate->add_option("--checkpoint", checkpoint, "model checkpoint");
  plot->add_option("--checkpoint", checkpoint, "model checkpoint");
  std::string person, window;
  plot->add_option("--person", person, "person id");
  plot->add_option("--window", window, "window label");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    RunConfig cfg = resolve(flags);
    if (!checkpoint.empty()) cfg.checkpoint = checkpoint;
    if (!person.empty()) cfg.plot_person = person;
    if (!window.empty()) cfg.plot_window = window;

    if (*simulate) {
      cvsig::pipeline::cmd_simulate(cfg);
      std::cout << "wrote cohort to " << cfg.resolved_data_dir().string() << "\n";
    } else if (*preprocess) {
      cvsig::pipeline::cmd_preprocess(cfg);
      std::cout << "wrote " << cvsig::pipeline::data_files(cfg).preprocessed.string() << "\n";
    } else if (*train) {
      const auto result = cvsig::pipeline::cmd_train(cfg);
      std::cout << "trained " << result.history.epochs.size() << " epochs, best epoch " << result.history.best_epoch
                << " (" << cvsig::train::to_string(result.history.stop_reason) << "); checkpoint "
                << cfg.resolved_checkpoint().string() << "\n";
    } else if (*evaluate) {
      const auto report = cvsig::pipeline::cmd_eval(cfg);
      std::cout << "model " << report["model_mse"].get<double>() << ", mean baseline "
                << report["mean_baseline_mse"].get<double>() << ", individual gbt "
                << report["individual_gbt_mse"].get<double>() << ", population gbt "
                << report["population_gbt_mse"].get<double>() << "\n";
    } else if (*sweep) {
      const auto table = cvsig::pipeline::cmd_sweep(cfg, axis.empty() ? cfg.sweep_axis : axis);
      std::cout << table.axis << ",window1_error,window2_error\n";
      for (const auto& r : table.rows) {
        std::cout << cvsig::csv::format_double(r.setting) << ',' << cvsig::csv::format_fixed(r.first_error, 4) << ','
                  << cvsig::csv::format_fixed(r.second_error, 4) << "\n";
      }
    } else if (*plot) {
      std::cout << "wrote " << cvsig::pipeline::cmd_plot(cfg).string() << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "cvsig: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
