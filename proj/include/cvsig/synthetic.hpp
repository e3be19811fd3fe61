#pragma once

// Synthetic wearable cohort with known latent cardiovascular parameters.
//
// Heart rate follows a first-order response toward a drive built from the
// transformed step channel and the sleep state:
//
//   target(t) = rhr + gain * steps'(t) - sleep_dip * [asleep or restless]
//   hr(t + 1) = hr(t) + (target(t) - hr(t)) / tau(t) + noise
//
// with tau = tau_rise while hr is below target and tau_decay otherwise.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "cvsig/preprocess.hpp"

namespace cvsig::sim {

struct LatentPhysiology {
  std::string person_id;
  double rhr_true = 65.0;
  double hr_gain = 28.0;
  double tau_rise = 1.5;
  double tau_decay = 3.0;
  double sleep_dip = 8.0;
  double noise_std = 2.0;
  double fitness = 0.0;
  double age = 40.0;
  double bmi = 28.0;
};

// Coefficients of the population model that maps (fitness, age, bmi) to the
// latent response parameters.
struct PopulationModel {
  double age_min = 18.0;
  double age_max = 70.0;
  double bmi_mean = 28.0;
  double bmi_sd = 5.0;
  double bmi_min = 16.0;
  double bmi_max = 50.0;
  double rhr_base = 65.0;
  double rhr_per_fitness = -4.0;
  double rhr_per_age_year = 0.15;
  double rhr_per_bmi_unit = 0.4;
  double rhr_noise_sd = 2.0;
  double gain_base = 28.0;
  double gain_fitness_coef = 0.15;
  double tau_decay_base = 3.0;
  double tau_bmi_coef = 0.5;  // per 5 BMI units
  double tau_fitness_coef = -0.3;
  double sleep_dip_base = 8.0;
  double sleep_dip_per_fitness = 2.0;
  double noise_std = 2.0;
};

struct ScheduleModel {
  double sleep_mean_minutes = 420.0;
  double sleep_sd_minutes = 60.0;
  double sleep_min_minutes = 240.0;
  double sleep_max_minutes = 600.0;
  double sleep_onset_mean = 30.0;  // minutes after the start of each day
  double sleep_onset_sd = 20.0;
  double restless_probability = 0.05;
  double sedentary_zero_probability = 0.7;
  int sedentary_max_steps = 5;
  double walks_per_day = 12.0;
  int walk_min_steps = 60;
  int walk_max_steps = 110;
  int walk_min_minutes = 5;
  int walk_max_minutes = 30;
  double exercise_per_day = 0.7;
  int exercise_min_steps = 120;
  int exercise_max_steps = 180;
  int exercise_min_minutes = 10;
  int exercise_max_minutes = 45;
};

struct SimConfig {
  std::size_t n_persons = 200;
  std::size_t days = 14;
  std::vector<std::string> windows = {"2017-01", "2018-01"};
  double missing_rate = 0.05;
  std::uint64_t seed = 2017;
  // Share of persons observed only in the first window; they form the
  // train/tune pool, everyone else lands in validation.
  double single_window_fraction = 0.5;
  PopulationModel population;
  ScheduleModel schedule;

  void validate() const;
  std::size_t minutes_per_window() const { return days * data::kMinutesPerDay; }
};

// Independent random variates behind one person's latent parameters.
struct LatentDraws {
  double fitness = 0.0;
  double age = 40.0;
  double bmi = 28.0;
  double rhr_noise = 0.0;
};

LatentPhysiology latent_from_draws(const PopulationModel& model, const LatentDraws& draws);

// Deterministic in (config.seed, person_index).
std::pair<data::PersonMeta, LatentPhysiology> sample_person(const SimConfig& config, std::size_t person_index);

struct Schedule {
  std::vector<int> steps;
  std::vector<data::SleepState> sleep;
};

Schedule gen_schedule(const ScheduleModel& model, std::size_t days, std::mt19937_64& rng);

// `steps_transformed` is the steps' channel (log(steps + 1) / 5).
std::vector<double> simulate_hr(const LatentPhysiology& latent, const std::vector<double>& steps_transformed,
                                const std::vector<data::SleepState>& sleep, std::mt19937_64& rng);

struct Cohort {
  std::vector<data::RawMinuteSeries> series;  // person-major, windows in config order
  std::vector<data::PersonMeta> persons;
  std::vector<LatentPhysiology> latent;
};

Cohort gen_cohort(const SimConfig& config);

std::string person_id_for(std::size_t person_index);
// Per-person, per-purpose stream derived from (seed, person, window, stream).
std::mt19937_64 make_stream(std::uint64_t seed, std::size_t person_index, std::size_t window_index,
                            std::uint64_t stream);

void write_latent_csv(const std::filesystem::path& path, const std::vector<LatentPhysiology>& latent);
std::vector<LatentPhysiology> read_latent_csv(const std::filesystem::path& path);

}  // namespace cvsig::sim
