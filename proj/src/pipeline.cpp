#include "cvsig/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <stdexcept>

#include "cvsig/baselines.hpp"
#include "cvsig/csv.hpp"
#include "cvsig/data_io.hpp"
#include "cvsig/model.hpp"
#include "cvsig/plot.hpp"
#include "cvsig/synthetic.hpp"

namespace cvsig::pipeline {

namespace fs = std::filesystem;
using config::derive_seed;
using config::RunConfig;

namespace {

void require_file(const fs::path& path, const char* produced_by) {
  if (!fs::exists(path)) {
    throw std::runtime_error("missing " + path.string() + " (run '" + produced_by + "' first)");
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out = csv::open_for_write(path);
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

fs::path eval_dir(const RunConfig& cfg) { return cfg.output_dir / "eval"; }

}  // namespace

DataFiles data_files(const RunConfig& cfg) {
  const fs::path d = cfg.resolved_data_dir();
  return {d / "minutes.csv", d / "persons.csv", d / "latent_truth.csv", d / "preprocessed.json", d / "splits.csv"};
}

void write_splits_csv(const fs::path& path, const std::map<std::string, data::Split>& splits) {
  std::ofstream out = csv::open_for_write(path);
  out << "person_id,split\n";
  for (const auto& [id, split] : splits) out << id << ',' << data::to_string(split) << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::map<std::string, data::Split> read_splits_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || csv::trim(line) != "person_id,split") {
    throw std::runtime_error(path.string() + ": expected header 'person_id,split'");
  }
  std::map<std::string, data::Split> out;
  std::vector<std::string_view> cells;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (csv::trim(line).empty()) continue;
    csv::split(line, cells);
    if (cells.size() != 2) throw std::runtime_error(path.string() + ":" + std::to_string(row) + ": expected 2 fields");
    out[std::string(csv::trim(cells[0]))] = data::parse_split(csv::trim(cells[1]));
  }
  return out;
}

Dataset load_dataset(const RunConfig& cfg) {
  const auto files = data_files(cfg);
  require_file(files.preprocessed, "preprocess");
  require_file(files.splits, "preprocess");
  Dataset ds;
  ds.series = data::read_preprocessed_json(files.preprocessed);
  ds.splits = read_splits_csv(files.splits);

  std::map<std::string, std::map<std::string, const data::PreprocessedSeries*>> by_person;
  for (const auto& s : ds.series) {
    const auto it = ds.splits.find(s.person_id);
    if (it == ds.splits.end()) throw std::runtime_error(s.person_id + " has no split assignment");
    by_person[s.person_id][s.window_label] = &s;
    if (it->second == data::Split::kTrain) ds.train.push_back(&s);
    if (it->second == data::Split::kTune) ds.tune.push_back(&s);
  }
  const std::string& w1 = cfg.sim.windows[0];
  const std::string& w2 = cfg.sim.windows[1];
  for (const auto& [id, windows] : by_person) {
    if (ds.splits.at(id) != data::Split::kValidation) continue;
    const auto a = windows.find(w1);
    const auto b = windows.find(w2);
    if (a == windows.end() || b == windows.end()) {
      throw std::runtime_error("validation person " + id + " lacks window " + (a == windows.end() ? w1 : w2));
    }
    ds.validation.push_back({a->second, b->second});
  }
  return ds;
}

void cmd_simulate(const RunConfig& cfg) {
  cfg.validate();
  const auto files = data_files(cfg);
  const auto cohort = sim::gen_cohort(cfg.sim);
  data::write_minute_csv(files.minutes, cohort.series);
  data::write_persons_csv(files.persons, cohort.persons);
  sim::write_latent_csv(files.latent, cohort.latent);
}

void cmd_preprocess(const RunConfig& cfg) {
  cfg.validate();
  const auto files = data_files(cfg);
  require_file(files.minutes, "simulate");
  const auto raw = data::read_minute_csv(files.minutes);

  std::vector<data::PreprocessedSeries> kept;
  std::map<std::string, std::vector<std::string>> windows;
  for (const auto& r : raw) {
    if (!data::eligibility_filter(data::reported_minutes_per_day(r), int(cfg.min_eligible_days))) continue;
    kept.push_back(data::build_channels(r));
    windows[r.person_id].push_back(r.window_label);
  }
  if (kept.empty()) throw std::runtime_error("no series passed the eligibility filter");
  std::vector<data::PersonWindows> persons;
  for (auto& [id, w] : windows) persons.push_back({id, w});
  const auto splits = data::assign_splits(persons, cfg.seed);

  data::write_preprocessed_json(files.preprocessed, kept);
  write_splits_csv(files.splits, splits);
}

train::TrainResult cmd_train(const RunConfig& cfg) {
  cfg.validate();
  const auto ds = load_dataset(cfg);
  if (ds.train.empty() || ds.tune.empty()) throw std::runtime_error("training needs non-empty train and tune splits");
  auto result = train::train(model::init_model(cfg.signature_size, derive_seed(cfg.seed, config::kInitSeed)), ds.train,
                             ds.tune, cfg.train);
  if (!cfg.log_wall_time) {
    for (auto& e : result.history.epochs) e.seconds = 0.0;
  }
  const fs::path checkpoint = cfg.resolved_checkpoint();
  model::save_checkpoint(checkpoint, result.model);
  train::write_training_log(checkpoint.parent_path() / "training_log.csv", result.history);
  return result;
}

nlohmann::json cmd_eval(const RunConfig& cfg) {
  cfg.validate();
  const auto files = data_files(cfg);
  require_file(cfg.resolved_checkpoint(), "train");
  require_file(files.persons, "simulate");
  require_file(files.latent, "simulate");
  const auto ds = load_dataset(cfg);
  if (ds.validation.size() < 2) throw std::runtime_error("evaluation needs at least 2 persons with both windows");
  const auto model = model::load_checkpoint(cfg.resolved_checkpoint());

  std::map<std::string, data::PersonMeta> meta;
  for (auto& p : data::read_persons_csv(files.persons)) meta[p.person_id] = p;
  std::map<std::string, sim::LatentPhysiology> latent;
  for (auto& l : sim::read_latent_csv(files.latent)) latent[l.person_id] = l;
  for (const auto& p : ds.validation) {
    if (!meta.count(p.person_id()) || !latent.count(p.person_id())) {
      throw std::runtime_error(p.person_id() + " is missing from persons.csv or latent_truth.csv");
    }
  }

  // Model errors and consistency.
  const auto signatures = eval::encode_all(model, ds.validation);
  const auto errors = eval::model_errors(model, ds.validation, signatures, cfg.eval_from);
  double first = 0.0, second = 0.0;
  for (const auto& e : errors) {
    first += e.first_mse;
    second += e.second_mse;
  }
  first /= double(errors.size());
  second /= double(errors.size());
  const auto consistency = eval::consistency_test(model, ds.validation, signatures,
                                                  derive_seed(cfg.seed, config::kConsistencySeed), cfg.eval_from);

  // Baselines.
  std::vector<baselines::PersonPair> pairs;
  for (const auto& p : ds.validation) pairs.push_back({p.first, p.second});
  auto options = cfg.baselines;
  options.eval_from = cfg.eval_from;
  std::vector<baselines::BaselineRow> baseline_rows;
  nlohmann::json baseline_means;
  for (auto mode : {baselines::Mode::kMean, baselines::Mode::kIndividualGbt, baselines::Mode::kPopulationGbt}) {
    const auto rows = baselines::run_baselines(pairs, ds.train, mode, options);
    baseline_means[std::string(baselines::to_string(mode))] = baselines::mean_mse(rows);
    baseline_rows.insert(baseline_rows.end(), rows.begin(), rows.end());
  }

  // Downstream tasks on the validation persons.
  std::vector<double> age, bmi, fitness, rhr;
  for (const auto& p : ds.validation) {
    age.push_back(meta[p.person_id()].age);
    bmi.push_back(meta[p.person_id()].bmi);
    rhr.push_back(meta[p.person_id()].rhr);
    fitness.push_back(latent[p.person_id()].fitness);
  }
  const Tensor x = eval::signature_matrix(signatures);
  std::vector<eval::DownstreamResult> downstream;
  nlohmann::json skipped = nlohmann::json::array();
  for (auto task : {eval::Task::kMedianAge, eval::Task::kObese, eval::Task::kMedianFitness}) {
    const auto& values = task == eval::Task::kMedianAge ? age : task == eval::Task::kObese ? bmi : fitness;
    const auto labels = eval::task_labels(task, values);
    for (std::size_t k = 0; k < cfg.downstream_repeats; ++k) {
      const auto seed = derive_seed(cfg.seed, config::kDownstreamSeed + k);
      try {
        auto [sig, base] = eval::downstream_task(x, rhr, labels, eval::to_string(task), seed);
        downstream.push_back(sig);
        downstream.push_back(base);
      } catch (const std::invalid_argument& e) {
        skipped.push_back({{"task", eval::to_string(task)}, {"seed", seed}, {"reason", e.what()}});
      }
    }
  }

  nlohmann::json report;
  report["n_validation"] = ds.validation.size();
  report["eval_from_minute"] = cfg.eval_from;
  report["model_window1_mse"] = first;
  report["model_mse"] = second;
  report["mean_baseline_mse"] = baseline_means["mean"];
  report["individual_gbt_mse"] = baseline_means["individual_gbt"];
  report["population_gbt_mse"] = baseline_means["population_gbt"];
  report["consistency"] = {{"median_ratio", consistency.median_ratio},
                           {"wilcoxon_v", consistency.wilcoxon.v},
                           {"p_value", consistency.wilcoxon.p_value},
                           {"n", consistency.wilcoxon.n},
                           {"exact", consistency.wilcoxon.exact}};
  nlohmann::json ds_json = nlohmann::json::array();
  for (const auto& d : downstream) {
    ds_json.push_back({{"task", d.task}, {"feature_set", d.feature_set}, {"seed", d.seed}, {"auc", d.auc},
                       {"n_train", d.n_train}, {"n_test", d.n_test}});
  }
  report["downstream"] = ds_json;
  report["downstream_skipped"] = skipped;

  const fs::path dir = eval_dir(cfg);
  eval::write_model_errors_csv(dir / "model_errors.csv", errors);
  eval::write_consistency_csv(dir / "consistency.csv", consistency);
  eval::write_downstream_csv(dir / "downstream.csv", downstream);
  baselines::write_baseline_csv(dir / "baselines.csv", baseline_rows);
  model::write_signatures_csv(dir / "signatures.csv", signatures);
  write_text(dir / "report.json", report.dump(2) + "\n");
  return report;
}

eval::SweepTable cmd_sweep(const RunConfig& cfg, const std::string& axis) {
  cfg.validate();
  if (axis != "signature_size" && axis != "train_fraction") {
    throw std::invalid_argument("unknown sweep axis '" + axis + "' (expected signature_size or train_fraction)");
  }
  const auto ds = load_dataset(cfg);
  eval::SweepData data{ds.train, ds.tune, ds.validation};
  eval::SweepOptions options;
  options.train = cfg.train;
  options.signature_size = cfg.signature_size;
  options.init_seed = derive_seed(cfg.seed, config::kInitSeed);
  options.subset_seed = derive_seed(cfg.seed, config::kSubsetSeed);
  options.eval_from = cfg.eval_from;
  const auto table = axis == "signature_size" ? eval::sweep_signature_size(cfg.signature_sizes, data, options)
                                              : eval::sweep_train_fraction(cfg.train_fractions, data, options);
  eval::write_sweep_csv(cfg.output_dir / "sweep" / ("sweep_" + axis + ".csv"), table);
  return table;
}

fs::path cmd_plot(const RunConfig& cfg) {
  cfg.validate();
  require_file(cfg.resolved_checkpoint(), "train");
  const auto ds = load_dataset(cfg);
  const auto model = model::load_checkpoint(cfg.resolved_checkpoint());

  std::map<std::string, std::map<std::string, const data::PreprocessedSeries*>> by_person;
  for (const auto& s : ds.series) by_person[s.person_id][s.window_label] = &s;

  std::string person = cfg.plot_person;
  if (person.empty()) person = ds.validation.empty() ? by_person.begin()->first : ds.validation.front().person_id();
  const auto it = by_person.find(person);
  if (it == by_person.end()) throw std::invalid_argument("unknown person '" + person + "'");
  const auto& windows = it->second;

  std::string window = cfg.plot_window;
  if (window.empty()) window = windows.count(cfg.sim.windows[1]) ? cfg.sim.windows[1] : windows.begin()->first;
  if (!windows.count(window)) throw std::invalid_argument(person + " has no window '" + window + "'");
  const auto& series = *windows.at(window);
  // The signature comes from the first window when the person has one.
  const auto& source = windows.count(cfg.sim.windows[0]) ? *windows.at(cfg.sim.windows[0]) : series;

  std::vector<std::string> others;
  for (const auto& [id, w] : by_person) {
    if (id != person) others.push_back(id);
  }
  if (others.empty()) throw std::invalid_argument("plot needs a second person for the other-signature overlay");
  std::mt19937_64 rng(derive_seed(cfg.seed, config::kPlotSeed));
  const std::string other = others[std::uniform_int_distribution<std::size_t>(0, others.size() - 1)(rng)];
  const auto& other_windows = by_person.at(other);
  const auto& other_source =
      other_windows.count(cfg.sim.windows[0]) ? *other_windows.at(cfg.sim.windows[0]) : *other_windows.begin()->second;

  if (cfg.plot_start >= series.length()) throw std::invalid_argument("plot start beyond the window");
  const std::size_t begin = cfg.plot_start;
  const std::size_t len = std::min(cfg.plot_minutes, series.length() - begin);

  const auto own = model::decode(model, series.activity, model::encode(model, source).signature);
  const auto alt = model::decode(model, series.activity, model::encode(model, other_source).signature);

  plot::ReconstructionPlot p;
  p.title = person + " " + window + ", minutes " + std::to_string(begin) + " to " + std::to_string(begin + len);
  p.start_minute = begin;
  p.own_label = "own signature (" + source.window_label + ")";
  p.other_label = "signature of " + other;
  const std::size_t T = series.length();
  auto bpm = [&](double whitened) { return whitened * series.hr_std + series.hr_mean; };
  for (std::size_t t = begin; t < begin + len; ++t) {
    p.steps.push_back(series.activity[t]);
    p.asleep.push_back(series.activity[T + t]);
    p.restless.push_back(series.activity[2 * T + t]);
    p.observed.push_back(series.loss_mask[t] != 0.0 ? bpm(series.hr[t]) : std::numeric_limits<double>::quiet_NaN());
    p.own_prediction.push_back(bpm(own[t]));
    p.other_prediction.push_back(bpm(alt[t]));
  }
  const fs::path out = cfg.output_dir / "plots" / (person + "_" + window + ".svg");
  write_text(out, plot::render_svg(p));
  return out;
}

}  // namespace cvsig::pipeline
