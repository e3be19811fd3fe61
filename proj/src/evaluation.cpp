#include "cvsig/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include "cvsig/baselines.hpp"
#include "cvsig/csv.hpp"
#include "cvsig/gbt.hpp"

namespace cvsig::eval {

void check_pairs(const std::vector<WindowPair>& persons) {
  for (const auto& p : persons) {
    if (!p.first || !p.second) throw std::invalid_argument("evaluation person is missing a window");
    if (p.first->person_id != p.second->person_id) throw std::invalid_argument("window pair mixes two persons");
  }
}

std::vector<model::Signature> encode_all(const model::ModelParams& model, const std::vector<WindowPair>& persons) {
  check_pairs(persons);
  std::vector<model::Signature> out;
  out.reserve(persons.size());
  for (const auto& p : persons) out.push_back(model::encode(model, *p.first).signature);
  return out;
}

double decoded_mse(const model::ModelParams& model, const data::PreprocessedSeries& series,
                   const model::Signature& signature, std::size_t from) {
  const auto pred = model::decode(model, series.activity, signature);
  return baselines::masked_mse(pred, series, from);
}

std::vector<ModelErrorRow> model_errors(const model::ModelParams& model, const std::vector<WindowPair>& persons,
                                        const std::vector<model::Signature>& signatures, std::size_t from) {
  check_pairs(persons);
  if (signatures.size() != persons.size()) throw std::invalid_argument("model_errors: one signature per person");
  std::vector<ModelErrorRow> rows;
  for (std::size_t i = 0; i < persons.size(); ++i) {
    rows.push_back({persons[i].person_id(), decoded_mse(model, *persons[i].first, signatures[i], from),
                    decoded_mse(model, *persons[i].second, signatures[i], from)});
  }
  return rows;
}

std::vector<std::size_t> draw_other_persons(std::size_t n, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("consistency test needs at least 2 persons");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 2);
  std::vector<std::size_t> other(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = pick(rng);
    other[i] = j >= i ? j + 1 : j;
  }
  return other;
}

ConsistencyResult consistency_test(const model::ModelParams& model, const std::vector<WindowPair>& persons,
                                   std::uint64_t seed, std::size_t from) {
  return consistency_test(model, persons, encode_all(model, persons), seed, from);
}

ConsistencyResult consistency_test(const model::ModelParams& model, const std::vector<WindowPair>& persons,
                                   const std::vector<model::Signature>& signatures, std::uint64_t seed,
                                   std::size_t from) {
  check_pairs(persons);
  if (persons.size() < 2) throw std::invalid_argument("consistency test needs at least 2 persons");
  if (signatures.size() != persons.size()) throw std::invalid_argument("consistency test: one signature per person");
  const auto other = draw_other_persons(persons.size(), seed);
  ConsistencyResult res;
  std::vector<double> diffs, ratios;
  for (std::size_t i = 0; i < persons.size(); ++i) {
    ConsistencyRow row;
    row.person_id = persons[i].person_id();
    row.other_id = persons[other[i]].person_id();
    row.own_mse = decoded_mse(model, *persons[i].second, signatures[i], from);
    row.other_mse = decoded_mse(model, *persons[i].second, signatures[other[i]], from);
    row.ratio = row.other_mse / row.own_mse;
    diffs.push_back(row.other_mse - row.own_mse);
    ratios.push_back(row.ratio);
    res.rows.push_back(row);
  }
  res.median_ratio = stats::median(ratios);
  if (std::any_of(diffs.begin(), diffs.end(), [](double d) { return d != 0.0; })) {
    res.wilcoxon = stats::wilcoxon_signed_rank(diffs);
  } else {
    // interchangeable signatures: no evidence either way
    res.wilcoxon = stats::WilcoxonResult{0.0, 1.0, 0, false};
  }
  return res;
}

std::string_view to_string(Task task) {
  switch (task) {
    case Task::kMedianAge:
      return "median_age";
    case Task::kObese:
      return "bmi_ge_30";
    case Task::kMedianFitness:
      return "median_fitness";
  }
  return "?";
}

Task parse_task(std::string_view text) {
  for (Task t : {Task::kMedianAge, Task::kObese, Task::kMedianFitness}) {
    if (to_string(t) == text) return t;
  }
  throw std::invalid_argument("unknown downstream task '" + std::string(text) + "'");
}

std::vector<int> task_labels(Task task, std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("task_labels: no values");
  std::vector<int> labels(values.size());
  if (task == Task::kObese) {
    for (std::size_t i = 0; i < values.size(); ++i) labels[i] = values[i] >= 30.0 ? 1 : 0;
    return labels;
  }
  const double m = stats::median(std::vector<double>(values.begin(), values.end()));
  for (std::size_t i = 0; i < values.size(); ++i) labels[i] = values[i] > m ? 1 : 0;
  return labels;
}

Tensor signature_matrix(const std::vector<model::Signature>& signatures) {
  if (signatures.empty()) throw std::invalid_argument("signature_matrix: no signatures");
  const std::size_t s = signatures[0].values.size();
  Tensor out({signatures.size(), s});
  for (std::size_t i = 0; i < signatures.size(); ++i) {
    if (signatures[i].values.size() != s) throw std::invalid_argument("signature_matrix: ragged signatures");
    std::copy(signatures[i].values.begin(), signatures[i].values.end(), out.raw() + i * s);
  }
  return out;
}

namespace {

Tensor take_rows(const Tensor& x, const std::vector<std::size_t>& rows) {
  const std::size_t w = x.dim(1);
  Tensor out({rows.size(), w});
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy_n(x.raw() + rows[i] * w, w, out.raw() + i * w);
  return out;
}

DownstreamResult fit_and_score(const Tensor& x, std::span<const int> labels, const std::vector<std::size_t>& train_rows,
                               const std::vector<std::size_t>& test_rows, std::string_view task,
                               std::string_view feature_set, std::uint64_t seed) {
  std::vector<double> y;
  for (std::size_t r : train_rows) y.push_back(double(labels[r]));
  const auto model = gbt::gbt_fit(take_rows(x, train_rows), y, gbt::GbtConfig::classifier());
  const auto scores = gbt::gbt_predict_proba(model, take_rows(x, test_rows));
  std::vector<int> test_labels;
  for (std::size_t r : test_rows) test_labels.push_back(labels[r]);
  return {std::string(task), std::string(feature_set), stats::auc(scores, test_labels), seed, train_rows.size(),
          test_rows.size()};
}

}  // namespace

std::pair<DownstreamResult, DownstreamResult> downstream_task(const Tensor& signatures, std::span<const double> rhr,
                                                              std::span<const int> labels, std::string_view task,
                                                              std::uint64_t seed) {
  const std::size_t n = labels.size();
  if (signatures.rank() != 2 || signatures.dim(0) != n || rhr.size() != n) {
    throw std::invalid_argument("downstream_task: features and labels differ in length");
  }
  const auto positives = std::size_t(std::count(labels.begin(), labels.end(), 1));
  if (positives < kMinPerClass || n - positives < kMinPerClass) {
    throw std::invalid_argument("downstream task " + std::string(task) + ": class starvation (" +
                                std::to_string(positives) + " positive, " + std::to_string(n - positives) +
                                " negative; need " + std::to_string(kMinPerClass) + " each)");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = std::size_t(std::llround(kTrainShare * double(n)));
  std::vector<std::size_t> train_rows(order.begin(), order.begin() + std::ptrdiff_t(n_train));
  std::vector<std::size_t> test_rows(order.begin() + std::ptrdiff_t(n_train), order.end());
  auto both = [&](const std::vector<std::size_t>& rows) {
    std::size_t pos = 0;
    for (std::size_t r : rows) pos += std::size_t(labels[r] == 1);
    return pos > 0 && pos < rows.size();
  };
  if (!both(train_rows) || !both(test_rows)) {
    throw std::invalid_argument("downstream task " + std::string(task) + ": a split lacks one class");
  }
  Tensor rhr_x({n, 1});
  std::copy(rhr.begin(), rhr.end(), rhr_x.raw());
  return {fit_and_score(signatures, labels, train_rows, test_rows, task, "signature", seed),
          fit_and_score(rhr_x, labels, train_rows, test_rows, task, "rhr", seed)};
}

std::vector<std::vector<std::size_t>> nested_subsets(std::size_t n, const std::vector<double>& fractions,
                                                     std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw std::invalid_argument("train fraction must be in (0, 1]");
    const auto k = std::size_t(std::ceil(f * double(n) - 1e-9));
    std::vector<std::size_t> subset(order.begin(), order.begin() + std::ptrdiff_t(k));
    std::sort(subset.begin(), subset.end());
    out.push_back(std::move(subset));
  }
  return out;
}

namespace {

void check_increasing(const std::vector<double>& settings, const char* what) {
  if (settings.empty()) throw std::invalid_argument(std::string("empty ") + what + " list");
  for (std::size_t i = 1; i < settings.size(); ++i) {
    if (!(settings[i] > settings[i - 1])) throw std::invalid_argument(std::string(what) + " must be strictly increasing");
  }
}

SweepRow run_cell(double setting, const model::ModelParams& init, const std::vector<const data::PreprocessedSeries*>& train,
                  const SweepData& data, const SweepOptions& options) {
  auto trained = train::train(init, train, data.tune, options.train);
  const auto signatures = encode_all(trained.model, data.validation);
  const auto errors = model_errors(trained.model, data.validation, signatures, options.eval_from);
  SweepRow row;
  row.setting = setting;
  row.best_epoch = trained.history.best_epoch;
  for (const auto& e : errors) {
    row.first_error += e.first_mse;
    row.second_error += e.second_mse;
  }
  row.first_error /= double(errors.size());
  row.second_error /= double(errors.size());
  return row;
}

void check_sweep_data(const SweepData& data) {
  if (data.train.empty() || data.tune.empty() || data.validation.empty()) {
    throw std::invalid_argument("sweep needs non-empty train, tune and validation sets");
  }
  check_pairs(data.validation);
}

}  // namespace

SweepTable sweep_signature_size(const std::vector<std::size_t>& sizes, const SweepData& data,
                                const SweepOptions& options) {
  check_increasing(std::vector<double>(sizes.begin(), sizes.end()), "signature sizes");
  check_sweep_data(data);
  options.train.validate();
  SweepTable table{"signature_size", {}};
  for (std::size_t s : sizes) {
    table.rows.push_back(run_cell(double(s), model::init_model(s, options.init_seed), data.train, data, options));
  }
  return table;
}

SweepTable sweep_train_fraction(const std::vector<double>& fractions, const SweepData& data,
                                const SweepOptions& options) {
  check_increasing(fractions, "train fractions");
  check_sweep_data(data);
  options.train.validate();
  const auto subsets = nested_subsets(data.train.size(), fractions, options.subset_seed);
  for (std::size_t i = 0; i < subsets.size(); ++i) {
    if (subsets[i].size() < options.train.batch_size) {
      throw std::invalid_argument("train fraction " + csv::format_double(fractions[i]) + " gives " +
                                  std::to_string(subsets[i].size()) + " persons, fewer than the batch size " +
                                  std::to_string(options.train.batch_size));
    }
  }
  SweepTable table{"train_fraction", {}};
  const auto init = model::init_model(options.signature_size, options.init_seed);
  for (std::size_t i = 0; i < subsets.size(); ++i) {
    std::vector<const data::PreprocessedSeries*> subset;
    for (std::size_t k : subsets[i]) subset.push_back(data.train[k]);
    table.rows.push_back(run_cell(fractions[i], init, subset, data, options));
  }
  return table;
}

void write_sweep_csv(const std::filesystem::path& path, const SweepTable& table) {
  std::ofstream out = csv::open_for_write(path);
  out << table.axis << ",window1_error,window2_error,best_epoch\n";
  for (const auto& r : table.rows) {
    out << csv::format_double(r.setting) << ',' << csv::format_double(r.first_error) << ','
        << csv::format_double(r.second_error) << ',' << r.best_epoch << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_consistency_csv(const std::filesystem::path& path, const ConsistencyResult& result) {
  std::ofstream out = csv::open_for_write(path);
  out << "person_id,other_id,own_mse,other_mse,ratio\n";
  for (const auto& r : result.rows) {
    out << r.person_id << ',' << r.other_id << ',' << csv::format_double(r.own_mse) << ','
        << csv::format_double(r.other_mse) << ',' << csv::format_double(r.ratio) << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_model_errors_csv(const std::filesystem::path& path, const std::vector<ModelErrorRow>& rows) {
  std::ofstream out = csv::open_for_write(path);
  out << "person_id,window1_mse,window2_mse\n";
  for (const auto& r : rows) {
    out << r.person_id << ',' << csv::format_double(r.first_mse) << ',' << csv::format_double(r.second_mse) << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_downstream_csv(const std::filesystem::path& path, const std::vector<DownstreamResult>& rows) {
  std::ofstream out = csv::open_for_write(path);
  out << "task,feature_set,seed,auc,n_train,n_test\n";
  for (const auto& r : rows) {
    out << r.task << ',' << r.feature_set << ',' << r.seed << ',' << csv::format_double(r.auc) << ',' << r.n_train
        << ',' << r.n_test << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace cvsig::eval
