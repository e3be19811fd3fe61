#include "cvsig/baselines.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <stdexcept>

#include "cvsig/csv.hpp"

namespace cvsig::baselines {

namespace {

bool asleep_at(const Tensor& activity, std::size_t t) {
  return activity.at(1, t) != 0.0 || activity.at(2, t) != 0.0;
}

void check_activity(const Tensor& activity) {
  if (activity.rank() != 2 || activity.dim(0) != data::kActivityChannels) {
    throw std::invalid_argument("activity must be [3 x T], got " + shape_string(activity.shape()));
  }
}

}  // namespace

MeanBaseline fit_mean_baseline(const data::PreprocessedSeries& series) {
  check_activity(series.activity);
  double awake = 0.0, asleep = 0.0;
  std::size_t n_awake = 0, n_asleep = 0;
  for (std::size_t t = 0; t < series.length(); ++t) {
    if (series.loss_mask[t] == 0.0) continue;
    if (asleep_at(series.activity, t)) {
      asleep += series.hr[t];
      ++n_asleep;
    } else {
      awake += series.hr[t];
      ++n_awake;
    }
  }
  if (n_awake + n_asleep == 0) throw std::invalid_argument(series.person_id + ": no observed heart-rate minutes");
  const double overall = (awake + asleep) / double(n_awake + n_asleep);
  MeanBaseline model;
  model.person_id = series.person_id;
  model.awake_mean = n_awake ? awake / double(n_awake) : overall;
  model.asleep_mean = n_asleep ? asleep / double(n_asleep) : overall;
  return model;
}

std::vector<double> predict_mean_baseline(const MeanBaseline& model, const Tensor& activity) {
  check_activity(activity);
  std::vector<double> out(activity.dim(1));
  for (std::size_t t = 0; t < out.size(); ++t) out[t] = asleep_at(activity, t) ? model.asleep_mean : model.awake_mean;
  return out;
}

Tensor build_lag_features(const Tensor& activity, std::size_t lag) {
  check_activity(activity);
  const std::size_t T = activity.dim(1);
  if (lag == 0 || T <= lag) {
    throw std::invalid_argument("build_lag_features: series of " + std::to_string(T) + " minutes is not longer than lag " +
                                std::to_string(lag));
  }
  const std::size_t C = activity.dim(0);
  Tensor out({T - lag, C * lag});
  double* dst = out.raw();
  const double* src = activity.raw();
  for (std::size_t r = 0; r < T - lag; ++r) {
    for (std::size_t c = 0; c < C; ++c) {
      std::copy_n(src + c * T + r, lag, dst);
      dst += lag;
    }
  }
  return out;
}

double masked_mse(std::span<const double> prediction, const data::PreprocessedSeries& series, std::size_t from) {
  if (prediction.size() != series.length()) throw std::invalid_argument("masked_mse: prediction length mismatch");
  double sum = 0.0;
  double count = 0.0;
  for (std::size_t t = from; t < series.length(); ++t) {
    if (series.loss_mask[t] == 0.0) continue;
    const double e = prediction[t] - series.hr[t];
    sum += e * e;
    count += 1.0;
  }
  if (count == 0.0) throw std::invalid_argument(series.person_id + ": no observed minutes to score");
  return sum / count;
}

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::kMean:
      return "mean";
    case Mode::kIndividualGbt:
      return "individual_gbt";
    case Mode::kPopulationGbt:
      return "population_gbt";
  }
  return "?";
}

Mode parse_mode(std::string_view text) {
  for (Mode m : {Mode::kMean, Mode::kIndividualGbt, Mode::kPopulationGbt}) {
    if (to_string(m) == text) return m;
  }
  throw std::invalid_argument("unknown baseline mode '" + std::string(text) + "'");
}

LagRows observed_lag_rows(const data::PreprocessedSeries& series, std::size_t lag) {
  const Tensor all = build_lag_features(series.activity, lag);
  const std::size_t width = all.dim(1);
  std::vector<std::size_t> keep;
  for (std::size_t t = lag; t < series.length(); ++t) {
    if (series.loss_mask[t] != 0.0) keep.push_back(t);
  }
  LagRows rows{Tensor({keep.size(), width}), {}};
  rows.targets.reserve(keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    std::copy_n(all.raw() + (keep[i] - lag) * width, width, rows.features.raw() + i * width);
    rows.targets.push_back(series.hr[keep[i]]);
  }
  return rows;
}

namespace {

std::vector<double> gbt_series_prediction(const gbt::GbtModel& model, const data::PreprocessedSeries& series,
                                          std::size_t lag) {
  // Minutes before the lag have no features; they get the base score and are
  // normally excluded from scoring by eval_from >= lag.
  std::vector<double> pred(series.length(), model.base_score);
  const auto rows = gbt::gbt_predict(model, build_lag_features(series.activity, lag));
  std::copy(rows.begin(), rows.end(), pred.begin() + std::ptrdiff_t(lag));
  return pred;
}

void check_pair(const PersonPair& p) {
  if (!p.first || !p.second) throw std::invalid_argument("baseline person is missing a window");
  if (p.first->person_id != p.second->person_id) throw std::invalid_argument("baseline windows belong to different persons");
}

}  // namespace

std::vector<BaselineRow> run_baselines(const std::vector<PersonPair>& persons,
                                       const std::vector<const data::PreprocessedSeries*>& population, Mode mode,
                                       const BaselineOptions& options) {
  if (persons.empty()) throw std::invalid_argument("run_baselines: no persons");
  for (const auto& p : persons) check_pair(p);
  std::vector<BaselineRow> out;

  if (mode == Mode::kMean) {
    for (const auto& p : persons) {
      const auto model = fit_mean_baseline(*p.first);
      const auto pred = predict_mean_baseline(model, p.second->activity);
      out.push_back({p.first->person_id, mode, masked_mse(pred, *p.second, options.eval_from)});
    }
    return out;
  }

  if (mode == Mode::kIndividualGbt) {
    for (const auto& p : persons) {
      const auto rows = observed_lag_rows(*p.first, options.lag);
      if (rows.targets.empty()) throw std::invalid_argument(p.first->person_id + ": no observed minutes after the lag");
      const auto model = gbt::gbt_fit(rows.features, rows.targets, options.gbt);
      const auto pred = gbt_series_prediction(model, *p.second, options.lag);
      out.push_back({p.first->person_id, mode, masked_mse(pred, *p.second, options.eval_from)});
    }
    return out;
  }

  // Population: pool observed rows of every training series, then subsample
  // deterministically when the pool exceeds the cap.
  if (population.empty()) throw std::invalid_argument("run_baselines: population mode needs training series");
  std::vector<LagRows> parts;
  std::size_t total = 0;
  for (const auto* s : population) {
    parts.push_back(observed_lag_rows(*s, options.lag));
    total += parts.back().targets.size();
  }
  if (total == 0) throw std::invalid_argument("run_baselines: population has no observed minutes");
  std::vector<std::size_t> chosen(total);
  std::iota(chosen.begin(), chosen.end(), 0);
  if (options.population_max_rows > 0 && total > options.population_max_rows) {
    std::vector<std::size_t> sample;
    std::mt19937_64 rng(options.seed);
    std::sample(chosen.begin(), chosen.end(), std::back_inserter(sample), options.population_max_rows, rng);
    chosen = std::move(sample);
  }
  const std::size_t width = data::kActivityChannels * options.lag;
  Tensor features({chosen.size(), width});
  std::vector<double> targets;
  targets.reserve(chosen.size());
  std::size_t part = 0, base = 0;
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    while (chosen[i] >= base + parts[part].targets.size()) base += parts[part++].targets.size();
    const std::size_t r = chosen[i] - base;
    std::copy_n(parts[part].features.raw() + r * width, width, features.raw() + i * width);
    targets.push_back(parts[part].targets[r]);
  }
  parts.clear();
  const auto model = gbt::gbt_fit(features, targets, options.gbt);
  for (const auto& p : persons) {
    const auto pred = gbt_series_prediction(model, *p.second, options.lag);
    out.push_back({p.first->person_id, mode, masked_mse(pred, *p.second, options.eval_from)});
  }
  return out;
}

double mean_mse(const std::vector<BaselineRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("mean_mse: no rows");
  double s = 0.0;
  for (const auto& r : rows) s += r.mse;
  return s / double(rows.size());
}

void write_baseline_csv(const std::filesystem::path& path, const std::vector<BaselineRow>& rows) {
  std::ofstream out = csv::open_for_write(path);
  out << "person_id,mode,mse\n";
  for (const auto& r : rows) out << r.person_id << ',' << to_string(r.mode) << ',' << csv::format_double(r.mse) << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace cvsig::baselines
