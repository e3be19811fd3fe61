#pragma once

// The batch commands behind the command-line tool. Every command validates
// its configuration and inputs before writing, and its outputs depend only
// on the configuration (seeds included).

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cvsig/config.hpp"
#include "cvsig/evaluation.hpp"
#include "cvsig/preprocess.hpp"
#include "cvsig/trainer.hpp"

namespace cvsig::pipeline {

struct DataFiles {
  std::filesystem::path minutes;       // simulate
  std::filesystem::path persons;       // simulate
  std::filesystem::path latent;        // simulate
  std::filesystem::path preprocessed;  // preprocess
  std::filesystem::path splits;        // preprocess
};
DataFiles data_files(const config::RunConfig& cfg);

struct Dataset {
  std::vector<data::PreprocessedSeries> series;
  std::map<std::string, data::Split> splits;
  std::vector<const data::PreprocessedSeries*> train;
  std::vector<const data::PreprocessedSeries*> tune;
  std::vector<eval::WindowPair> validation;  // persons with both windows, sorted by id
};

// Reads the preprocessed series and split table.
Dataset load_dataset(const config::RunConfig& cfg);

void cmd_simulate(const config::RunConfig& cfg);
void cmd_preprocess(const config::RunConfig& cfg);
train::TrainResult cmd_train(const config::RunConfig& cfg);
nlohmann::json cmd_eval(const config::RunConfig& cfg);
eval::SweepTable cmd_sweep(const config::RunConfig& cfg, const std::string& axis);
// Returns the written SVG path.
std::filesystem::path cmd_plot(const config::RunConfig& cfg);

void write_splits_csv(const std::filesystem::path& path, const std::map<std::string, data::Split>& splits);
std::map<std::string, data::Split> read_splits_csv(const std::filesystem::path& path);

}  // namespace cvsig::pipeline
