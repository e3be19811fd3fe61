#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cvsig/tensor.hpp"

namespace cvsig::data {

enum class SleepState : std::uint8_t { kAwake = 0, kAsleep = 1, kRestless = 2 };

std::string_view to_string(SleepState state);
std::optional<SleepState> parse_sleep_state(std::string_view text);

// Minute-level tracker record for one person and one collection window.
struct RawMinuteSeries {
  std::string person_id;
  std::string window_label;
  std::int64_t start_minute = 0;
  std::vector<std::optional<int>> steps;
  std::vector<std::optional<double>> heart_rate;
  std::vector<std::optional<SleepState>> sleep_state;

  std::size_t length() const { return steps.size(); }
  // Throws std::invalid_argument if channel lengths differ, the series is
  // empty, or a present value is out of range.
  void validate() const;
};

inline constexpr std::size_t kActivityChannels = 3;  // steps', asleep, restless

struct PreprocessedSeries {
  std::string person_id;
  std::string window_label;
  Tensor activity;   // [3 x T]
  Tensor hr;         // [1 x T], whitened, imputed
  Tensor loss_mask;  // [T], 1 where heart rate was observed
  double hr_mean = 0.0;
  double hr_std = 1.0;

  std::size_t length() const { return loss_mask.size(); }
  // Contiguous sub-window [begin, begin + length); whitening statistics are kept.
  PreprocessedSeries slice(std::size_t begin, std::size_t length) const;
  double observed_fraction() const;
};

enum class Split : std::uint8_t { kTrain, kTune, kValidation };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct PersonMeta {
  std::string person_id;
  double age = 0.0;
  double bmi = 0.0;
  double rhr = 0.0;
  Split split = Split::kTrain;
};

// log(steps + 1) / 5
double transform_steps(int steps);

struct WhitenResult {
  std::vector<double> values;
  double mean = 0.0;
  double std = 1.0;
};

// Population (divide-by-N) standardisation.
WhitenResult whiten_hr(std::span<const double> observed_hr);

struct SleepBits {
  double asleep = 0.0;
  double restless = 0.0;
};

SleepBits encode_sleep(SleepState state);

PreprocessedSeries build_channels(const RawMinuteSeries& raw);

inline constexpr int kMinutesPerDay = 1440;
inline constexpr int kMaxUnreportedMinutesPerDay = 240;
inline constexpr int kMinEligibleDays = 10;

// True iff at least `min_days` days report >= 1200 minutes.
bool eligibility_filter(std::span<const int> reported_minutes_per_day, int min_days = kMinEligibleDays);
// Minutes with a step count, bucketed into consecutive 1440-minute days.
std::vector<int> reported_minutes_per_day(const RawMinuteSeries& raw);

struct PersonWindows {
  std::string person_id;
  std::vector<std::string> windows;
};

// Persons observed in two or more windows go to validation; the rest are
// shuffled with `seed` and split 80/20 into train/tune.
std::map<std::string, Split> assign_splits(std::vector<PersonWindows> persons, std::uint64_t seed);

inline constexpr std::size_t kMinRhrMinutes = 30;

// Mean observed heart rate over asleep-state minutes.
double compute_rhr(const RawMinuteSeries& raw);

}  // namespace cvsig::data
