#pragma once

// Run configuration: INI-style sections with key = value pairs. Every key
// is optional; defaults reproduce the reference settings.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cvsig/baselines.hpp"
#include "cvsig/synthetic.hpp"
#include "cvsig/trainer.hpp"

namespace cvsig::config {

struct RunConfig {
  std::uint64_t seed = 2017;
  std::filesystem::path output_dir = "out";
  std::filesystem::path data_dir;  // empty: <output_dir>/data

  sim::SimConfig sim;
  std::size_t min_eligible_days = data::kMinEligibleDays;

  std::size_t signature_size = 32;
  train::TrainConfig train;
  bool log_wall_time = false;  // wall-clock seconds make the log non-reproducible

  baselines::BaselineOptions baselines;
  std::size_t eval_from = baselines::kDefaultLag;
  std::size_t downstream_repeats = 3;
  std::filesystem::path checkpoint;  // empty: <output_dir>/model/checkpoint.json

  std::string sweep_axis = "signature_size";
  std::vector<std::size_t> signature_sizes = {4, 8, 16, 32, 64, 128};
  std::vector<double> train_fractions = {0.01, 0.05, 0.10, 0.50, 1.0};

  std::string plot_person;  // empty: first validation person
  std::string plot_window;  // empty: second window
  std::size_t plot_start = 0;
  std::size_t plot_minutes = 1440;

  // Propagates `seed` into every stochastic component.
  void set_seed(std::uint64_t value);
  void validate() const;

  std::filesystem::path resolved_data_dir() const;
  std::filesystem::path resolved_checkpoint() const;
};

// Independent per-purpose seed derived from the run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t purpose);

enum SeedPurpose : std::uint64_t {
  kInitSeed = 1,
  kTrainSeed = 2,
  kBaselineSeed = 3,
  kConsistencySeed = 4,
  kSubsetSeed = 5,
  kPlotSeed = 6,
  kDownstreamSeed = 100,  // + repeat index
};

RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);
// INI text that parses back to `config`.
std::string to_ini(const RunConfig& config);

}  // namespace cvsig::config
