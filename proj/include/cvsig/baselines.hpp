#pragma once

// Reference predictors: per-person awake/asleep mean, and gradient-boosted
// trees over the previous 120 minutes of activity (per person or pooled).

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cvsig/gbt.hpp"
#include "cvsig/preprocess.hpp"

namespace cvsig::baselines {

struct MeanBaseline {
  std::string person_id;
  double awake_mean = 0.0;
  double asleep_mean = 0.0;  // asleep and restless pooled
};

MeanBaseline fit_mean_baseline(const data::PreprocessedSeries& series);
// activity is [3 x T]; the sleep bits pick the state of each minute.
std::vector<double> predict_mean_baseline(const MeanBaseline& model, const Tensor& activity);

inline constexpr std::size_t kDefaultLag = 120;

// Row t - lag holds channel c at minute t - lag + k in column c * lag + k.
Tensor build_lag_features(const Tensor& activity, std::size_t lag = kDefaultLag);

// Mean squared error over observed minutes t >= from.
double masked_mse(std::span<const double> prediction, const data::PreprocessedSeries& series, std::size_t from = 0);

enum class Mode { kMean, kIndividualGbt, kPopulationGbt };
std::string_view to_string(Mode mode);
Mode parse_mode(std::string_view text);

struct BaselineOptions {
  gbt::GbtConfig gbt;
  std::size_t lag = kDefaultLag;
  // First minute scored on the evaluation window.
  std::size_t eval_from = kDefaultLag;
  // Pooled training rows are subsampled to at most this many (0 = all).
  std::size_t population_max_rows = 100000;
  std::uint64_t seed = 1;
};

struct PersonPair {
  const data::PreprocessedSeries* first = nullptr;   // fitting window
  const data::PreprocessedSeries* second = nullptr;  // evaluation window
};

struct BaselineRow {
  std::string person_id;
  Mode mode = Mode::kMean;
  double mse = 0.0;
};

// Observed-minute training rows of one series (minutes >= lag).
struct LagRows {
  Tensor features;  // [n x 3*lag]
  std::vector<double> targets;
};
LagRows observed_lag_rows(const data::PreprocessedSeries& series, std::size_t lag);

// Fits on each pair's first window (or on the pooled `population` series for
// the population mode) and scores the second window.
std::vector<BaselineRow> run_baselines(const std::vector<PersonPair>& persons,
                                       const std::vector<const data::PreprocessedSeries*>& population, Mode mode,
                                       const BaselineOptions& options);

double mean_mse(const std::vector<BaselineRow>& rows);

// person_id,mode,mse
void write_baseline_csv(const std::filesystem::path& path, const std::vector<BaselineRow>& rows);

}  // namespace cvsig::baselines
