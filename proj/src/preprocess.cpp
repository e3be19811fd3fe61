#include "cvsig/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

namespace cvsig::data {

std::string_view to_string(SleepState state) {
  switch (state) {
    case SleepState::kAwake:
      return "awake";
    case SleepState::kAsleep:
      return "asleep";
    case SleepState::kRestless:
      return "restless";
  }
  return "awake";
}

std::optional<SleepState> parse_sleep_state(std::string_view text) {
  if (text == "awake") return SleepState::kAwake;
  if (text == "asleep") return SleepState::kAsleep;
  if (text == "restless") return SleepState::kRestless;
  return std::nullopt;
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kTune:
      return "tune";
    case Split::kValidation:
      return "validation";
  }
  return "train";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::kTrain;
  if (text == "tune") return Split::kTune;
  if (text == "validation") return Split::kValidation;
  throw std::invalid_argument("unknown split: " + std::string(text));
}

void RawMinuteSeries::validate() const {
  const std::size_t n = steps.size();
  if (n == 0) throw std::invalid_argument(person_id + "/" + window_label + ": empty series");
  if (heart_rate.size() != n || sleep_state.size() != n) {
    throw std::invalid_argument(person_id + "/" + window_label + ": channel lengths differ");
  }
  for (std::size_t t = 0; t < n; ++t) {
    if (steps[t] && *steps[t] < 0) {
      throw std::invalid_argument(person_id + "/" + window_label + ": negative steps at minute " +
                                  std::to_string(t));
    }
    if (heart_rate[t] && !(*heart_rate[t] > 0.0 && std::isfinite(*heart_rate[t]))) {
      throw std::invalid_argument(person_id + "/" + window_label + ": non-positive heart rate at minute " +
                                  std::to_string(t));
    }
  }
}

PreprocessedSeries PreprocessedSeries::slice(std::size_t begin, std::size_t len) const {
  const std::size_t n = length();
  if (len == 0 || begin + len > n) {
    throw std::out_of_range("slice [" + std::to_string(begin) + ", " + std::to_string(begin + len) +
                            ") outside series of length " + std::to_string(n));
  }
  PreprocessedSeries out;
  out.person_id = person_id;
  out.window_label = window_label;
  out.hr_mean = hr_mean;
  out.hr_std = hr_std;
  out.activity = Tensor({kActivityChannels, len});
  for (std::size_t c = 0; c < kActivityChannels; ++c) {
    std::copy_n(activity.raw() + c * n + begin, len, out.activity.raw() + c * len);
  }
  out.hr = Tensor({1, len});
  std::copy_n(hr.raw() + begin, len, out.hr.raw());
  out.loss_mask = Tensor({len});
  std::copy_n(loss_mask.raw() + begin, len, out.loss_mask.raw());
  return out;
}

double PreprocessedSeries::observed_fraction() const {
  double total = 0.0;
  for (double m : loss_mask.data()) total += m;
  return total / double(length());
}

double transform_steps(int steps) {
  if (steps < 0) throw std::invalid_argument("step count must be non-negative, got " + std::to_string(steps));
  return std::log(double(steps) + 1.0) / 5.0;
}

WhitenResult whiten_hr(std::span<const double> observed_hr) {
  if (observed_hr.size() < 2) {
    throw std::invalid_argument("whitening needs at least 2 observed heart-rate values");
  }
  const double n = double(observed_hr.size());
  double mean = 0.0;
  for (double v : observed_hr) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : observed_hr) var += (v - mean) * (v - mean);
  var /= n;
  if (!(var > 0.0)) throw std::invalid_argument("heart rate has zero variance");

  WhitenResult out;
  out.mean = mean;
  out.std = std::sqrt(var);
  out.values.reserve(observed_hr.size());
  for (double v : observed_hr) out.values.push_back((v - mean) / out.std);
  return out;
}

SleepBits encode_sleep(SleepState state) {
  switch (state) {
    case SleepState::kAwake:
      return {0.0, 0.0};
    case SleepState::kAsleep:
      return {1.0, 0.0};
    case SleepState::kRestless:
      return {0.0, 1.0};
  }
  return {};
}

PreprocessedSeries build_channels(const RawMinuteSeries& raw) {
  raw.validate();
  const std::size_t n = raw.length();

  std::vector<double> observed;
  observed.reserve(n);
  for (const auto& hr : raw.heart_rate) {
    if (hr) observed.push_back(*hr);
  }
  const WhitenResult stats = whiten_hr(observed);

  PreprocessedSeries out;
  out.person_id = raw.person_id;
  out.window_label = raw.window_label;
  out.hr_mean = stats.mean;
  out.hr_std = stats.std;
  out.activity = Tensor({kActivityChannels, n});
  out.hr = Tensor({1, n});
  out.loss_mask = Tensor({n});

  double rest_sum = 0.0;
  std::size_t rest_count = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const int steps = raw.steps[t].value_or(0);
    const SleepState state = raw.sleep_state[t].value_or(SleepState::kAwake);
    const SleepBits bits = encode_sleep(state);
    out.activity[t] = transform_steps(steps);
    out.activity[n + t] = bits.asleep;
    out.activity[2 * n + t] = bits.restless;
    if (raw.heart_rate[t] && steps == 0 && state == SleepState::kAwake) {
      rest_sum += *raw.heart_rate[t];
      ++rest_count;
    }
  }

  const double fill = rest_count > 0 ? (rest_sum / double(rest_count) - stats.mean) / stats.std : 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    if (raw.heart_rate[t]) {
      out.hr[t] = (*raw.heart_rate[t] - stats.mean) / stats.std;
      out.loss_mask[t] = 1.0;
    } else {
      out.hr[t] = fill;
    }
  }
  return out;
}

bool eligibility_filter(std::span<const int> reported_minutes_per_day, int min_days) {
  const int threshold = kMinutesPerDay - kMaxUnreportedMinutesPerDay;
  const auto full_days =
      std::count_if(reported_minutes_per_day.begin(), reported_minutes_per_day.end(),
                    [threshold](int minutes) { return minutes >= threshold; });
  return full_days >= min_days;
}

std::vector<int> reported_minutes_per_day(const RawMinuteSeries& raw) {
  const std::size_t days = (raw.length() + kMinutesPerDay - 1) / kMinutesPerDay;
  std::vector<int> out(days, 0);
  for (std::size_t t = 0; t < raw.length(); ++t) {
    if (raw.steps[t]) ++out[t / kMinutesPerDay];
  }
  return out;
}

std::map<std::string, Split> assign_splits(std::vector<PersonWindows> persons, std::uint64_t seed) {
  std::sort(persons.begin(), persons.end(),
            [](const auto& a, const auto& b) { return a.person_id < b.person_id; });

  std::map<std::string, Split> out;
  std::vector<std::string> single;
  for (const auto& p : persons) {
    if (p.windows.empty()) throw std::invalid_argument(p.person_id + " has no collection window");
    const std::set<std::string> distinct(p.windows.begin(), p.windows.end());
    if (distinct.size() >= 2) {
      out[p.person_id] = Split::kValidation;
    } else {
      single.push_back(p.person_id);
    }
  }

  std::mt19937_64 rng(seed);
  std::shuffle(single.begin(), single.end(), rng);
  const auto n_train = std::size_t(std::llround(0.8 * double(single.size())));
  for (std::size_t i = 0; i < single.size(); ++i) {
    out[single[i]] = i < n_train ? Split::kTrain : Split::kTune;
  }
  return out;
}

double compute_rhr(const RawMinuteSeries& raw) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 0; t < raw.length(); ++t) {
    if (raw.heart_rate[t] && raw.sleep_state[t] == SleepState::kAsleep) {
      sum += *raw.heart_rate[t];
      ++count;
    }
  }
  if (count < kMinRhrMinutes) {
    throw std::invalid_argument(raw.person_id + "/" + raw.window_label + ": only " + std::to_string(count) +
                                " observed asleep minutes, need " + std::to_string(kMinRhrMinutes));
  }
  return sum / double(count);
}

}  // namespace cvsig::data
