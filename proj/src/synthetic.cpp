#include "cvsig/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "cvsig/csv.hpp"

namespace cvsig::sim {

namespace {

constexpr std::uint64_t kLatentStream = 0;
constexpr std::uint64_t kScheduleStream = 1;
constexpr std::uint64_t kHeartStream = 2;
constexpr std::uint64_t kMissingStream = 3;
constexpr std::uint64_t kCohortStream = 4;
constexpr double kHrFloor = 35.0;
constexpr double kHrCeiling = 210.0;
// Lower bound keeps hr(t+1) between hr(t) and target(t).
constexpr double kMinTau = 1.0;
constexpr double kMaxTau = 120.0;
constexpr std::int64_t kMinutesPerYear = 525600;

int uniform_int(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

}  // namespace

void SimConfig::validate() const {
  if (n_persons < 1) throw std::invalid_argument("n_persons must be >= 1");
  if (days < 1) throw std::invalid_argument("days must be >= 1");
  if (windows.empty()) throw std::invalid_argument("at least one collection window is required");
  if (!(missing_rate >= 0.0 && missing_rate < 1.0)) throw std::invalid_argument("missing_rate must be in [0, 1)");
  if (!(single_window_fraction >= 0.0 && single_window_fraction <= 1.0)) {
    throw std::invalid_argument("single_window_fraction must be in [0, 1]");
  }
  if (population.noise_std < 0.0) throw std::invalid_argument("noise_std must be >= 0");
}

std::string person_id_for(std::size_t person_index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "P%05zu", person_index);
  return buf;
}

std::mt19937_64 make_stream(std::uint64_t seed, std::size_t person_index, std::size_t window_index,
                            std::uint64_t stream) {
  std::seed_seq seq{std::uint32_t(seed & 0xffffffffu), std::uint32_t(seed >> 32), std::uint32_t(person_index),
                    std::uint32_t(window_index), std::uint32_t(stream)};
  return std::mt19937_64(seq);
}

LatentPhysiology latent_from_draws(const PopulationModel& m, const LatentDraws& d) {
  LatentPhysiology out;
  out.fitness = d.fitness;
  out.age = d.age;
  out.bmi = d.bmi;
  out.rhr_true = std::clamp(m.rhr_base + m.rhr_per_fitness * d.fitness + m.rhr_per_age_year * (d.age - 40.0) +
                                m.rhr_per_bmi_unit * (d.bmi - m.bmi_mean) + d.rhr_noise,
                            40.0, 100.0);
  out.hr_gain = m.gain_base / std::max(0.2, 1.0 + m.gain_fitness_coef * d.fitness);
  out.tau_decay = std::clamp(
      m.tau_decay_base * (1.0 + m.tau_bmi_coef * (d.bmi - m.bmi_mean) / 5.0 + m.tau_fitness_coef * d.fitness),
      kMinTau, kMaxTau);
  out.tau_rise = std::max(kMinTau, out.tau_decay / 2.0);
  out.sleep_dip = std::max(0.0, m.sleep_dip_base + m.sleep_dip_per_fitness * d.fitness);
  out.noise_std = m.noise_std;
  return out;
}

std::pair<data::PersonMeta, LatentPhysiology> sample_person(const SimConfig& config, std::size_t person_index) {
  if (person_index >= config.n_persons) {
    throw std::out_of_range("person index " + std::to_string(person_index) + " >= n_persons " +
                            std::to_string(config.n_persons));
  }
  const PopulationModel& m = config.population;
  auto rng = make_stream(config.seed, person_index, 0, kLatentStream);
  std::normal_distribution<double> std_normal(0.0, 1.0);
  LatentDraws draws;
  draws.fitness = std_normal(rng);
  draws.age = std::uniform_real_distribution<double>(m.age_min, m.age_max)(rng);
  draws.bmi = std::clamp(m.bmi_mean + m.bmi_sd * std_normal(rng), m.bmi_min, m.bmi_max);
  draws.rhr_noise = m.rhr_noise_sd * std_normal(rng);

  LatentPhysiology latent = latent_from_draws(m, draws);
  latent.person_id = person_id_for(person_index);

  data::PersonMeta meta;
  meta.person_id = latent.person_id;
  meta.age = latent.age;
  meta.bmi = latent.bmi;
  meta.rhr = 0.0;  // measured from data in gen_cohort
  return {meta, latent};
}

Schedule gen_schedule(const ScheduleModel& m, std::size_t days, std::mt19937_64& rng) {
  const std::size_t n = days * data::kMinutesPerDay;
  Schedule out;
  out.steps.assign(n, 0);
  out.sleep.assign(n, data::SleepState::kAwake);
  std::normal_distribution<double> std_normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (std::size_t day = 0; day < days; ++day) {
    const std::size_t day_start = day * data::kMinutesPerDay;
    const std::size_t day_end = day_start + data::kMinutesPerDay;
    const auto onset = std::size_t(std::clamp(std::lround(m.sleep_onset_mean + m.sleep_onset_sd * std_normal(rng)),
                                              0L, 120L));
    const auto duration = std::size_t(
        std::clamp(std::lround(m.sleep_mean_minutes + m.sleep_sd_minutes * std_normal(rng)),
                   std::lround(m.sleep_min_minutes), std::lround(m.sleep_max_minutes)));
    const std::size_t sleep_begin = day_start + onset;
    const std::size_t sleep_end = sleep_begin + duration;

    for (std::size_t t = sleep_begin; t < sleep_end; ++t) {
      out.sleep[t] = unit(rng) < m.restless_probability ? data::SleepState::kRestless : data::SleepState::kAsleep;
    }

    const double waking = double(data::kMinutesPerDay) - double(duration);
    const double p_exercise = m.exercise_per_day / waking;
    const double p_walk = m.walks_per_day / waking;
    auto sedentary = [&](std::size_t t) {
      out.steps[t] = unit(rng) < m.sedentary_zero_probability ? 0 : uniform_int(rng, 1, m.sedentary_max_steps);
    };
    for (std::size_t t = day_start; t < sleep_begin; ++t) sedentary(t);

    std::size_t t = sleep_end;
    while (t < day_end) {
      const double u = unit(rng);
      if (u < p_exercise + p_walk) {
        const bool exercise = u < p_exercise;
        const int len = exercise ? uniform_int(rng, m.exercise_min_minutes, m.exercise_max_minutes)
                                 : uniform_int(rng, m.walk_min_minutes, m.walk_max_minutes);
        const std::size_t stop = std::min(day_end, t + std::size_t(len));
        for (; t < stop; ++t) {
          out.steps[t] = exercise ? uniform_int(rng, m.exercise_min_steps, m.exercise_max_steps)
                                  : uniform_int(rng, m.walk_min_steps, m.walk_max_steps);
        }
      } else {
        sedentary(t);
        ++t;
      }
    }
  }
  return out;
}

std::vector<double> simulate_hr(const LatentPhysiology& latent, const std::vector<double>& steps_transformed,
                                const std::vector<data::SleepState>& sleep, std::mt19937_64& rng) {
  const std::size_t n = steps_transformed.size();
  if (sleep.size() != n) throw std::invalid_argument("simulate_hr: steps and sleep lengths differ");
  std::vector<double> hr(n);
  if (n == 0) return hr;
  std::normal_distribution<double> noise(0.0, latent.noise_std > 0.0 ? latent.noise_std : 1.0);
  hr[0] = std::clamp(latent.rhr_true, kHrFloor, kHrCeiling);
  for (std::size_t t = 0; t + 1 < n; ++t) {
    const bool sleeping = sleep[t] != data::SleepState::kAwake;
    const double target = latent.rhr_true + latent.hr_gain * steps_transformed[t] - (sleeping ? latent.sleep_dip : 0.0);
    const double tau = target > hr[t] ? latent.tau_rise : latent.tau_decay;
    double next = hr[t] + (target - hr[t]) / tau;
    if (latent.noise_std > 0.0) next += noise(rng);
    hr[t + 1] = std::clamp(next, kHrFloor, kHrCeiling);
  }
  return hr;
}

Cohort gen_cohort(const SimConfig& config) {
  config.validate();
  Cohort cohort;
  const std::size_t n_windows = config.windows.size();

  std::vector<std::size_t> order(config.n_persons);
  std::iota(order.begin(), order.end(), 0);
  auto cohort_rng = make_stream(config.seed, 0, 0, kCohortStream);
  std::shuffle(order.begin(), order.end(), cohort_rng);
  const auto n_single = std::size_t(std::llround(config.single_window_fraction * double(config.n_persons)));
  std::vector<bool> single(config.n_persons, false);
  for (std::size_t i = 0; i < n_single; ++i) single[order[i]] = true;

  std::vector<data::PersonWindows> windows_present;
  for (std::size_t i = 0; i < config.n_persons; ++i) {
    auto [meta, latent] = sample_person(config, i);
    data::PersonWindows present{meta.person_id, {}};
    const std::size_t first_series = cohort.series.size();
    for (std::size_t w = 0; w < n_windows; ++w) {
      if (w > 0 && single[i]) break;
      auto sched_rng = make_stream(config.seed, i, w, kScheduleStream);
      Schedule sched = gen_schedule(config.schedule, config.days, sched_rng);
      std::vector<double> drive(sched.steps.size());
      for (std::size_t t = 0; t < drive.size(); ++t) drive[t] = data::transform_steps(sched.steps[t]);
      auto hr_rng = make_stream(config.seed, i, w, kHeartStream);
      std::vector<double> hr = simulate_hr(latent, drive, sched.sleep, hr_rng);

      auto miss_rng = make_stream(config.seed, i, w, kMissingStream);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      data::RawMinuteSeries raw;
      raw.person_id = meta.person_id;
      raw.window_label = config.windows[w];
      raw.start_minute = std::int64_t(w) * kMinutesPerYear;
      raw.steps.reserve(hr.size());
      raw.heart_rate.reserve(hr.size());
      raw.sleep_state.reserve(hr.size());
      for (std::size_t t = 0; t < hr.size(); ++t) {
        raw.steps.emplace_back(sched.steps[t]);
        raw.sleep_state.emplace_back(sched.sleep[t]);
        const bool missing = config.missing_rate > 0.0 && unit(miss_rng) < config.missing_rate;
        // Stored at the CSV precision so in-memory and reloaded cohorts agree.
        raw.heart_rate.push_back(missing ? std::nullopt
                                         : std::optional<double>(std::round(hr[t] * 1e4) / 1e4));
      }
      present.windows.push_back(raw.window_label);
      cohort.series.push_back(std::move(raw));
    }
    meta.rhr = data::compute_rhr(cohort.series[first_series]);
    windows_present.push_back(std::move(present));
    cohort.persons.push_back(std::move(meta));
    cohort.latent.push_back(std::move(latent));
  }

  const auto splits = data::assign_splits(windows_present, config.seed);
  for (auto& p : cohort.persons) p.split = splits.at(p.person_id);
  return cohort;
}

namespace {
constexpr std::string_view kLatentHeader =
    "person_id,rhr_true,hr_gain,tau_rise,tau_decay,sleep_dip,noise_std,fitness,age,bmi";
}

void write_latent_csv(const std::filesystem::path& path, const std::vector<LatentPhysiology>& latent) {
  std::ofstream out = csv::open_for_write(path);
  out << kLatentHeader << '\n';
  for (const auto& l : latent) {
    out << l.person_id;
    for (double v : {l.rhr_true, l.hr_gain, l.tau_rise, l.tau_decay, l.sleep_dip, l.noise_std, l.fitness, l.age,
                     l.bmi}) {
      out << ',' << csv::format_double(v);
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<LatentPhysiology> read_latent_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || csv::trim(line) != kLatentHeader) {
    throw std::runtime_error(path.string() + ": unexpected header");
  }
  std::vector<LatentPhysiology> out;
  std::vector<std::string_view> cells;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    csv::split(csv::trim(line), cells);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (cells.size() != 10) throw std::runtime_error(where + ": expected 10 columns");
    LatentPhysiology l;
    l.person_id = std::string(cells[0]);
    double* fields[] = {&l.rhr_true, &l.hr_gain, &l.tau_rise, &l.tau_decay, &l.sleep_dip,
                        &l.noise_std, &l.fitness, &l.age, &l.bmi};
    for (std::size_t k = 0; k < 9; ++k) *fields[k] = csv::parse_double(cells[k + 1], where);
    out.push_back(std::move(l));
  }
  return out;
}

}  // namespace cvsig::sim
