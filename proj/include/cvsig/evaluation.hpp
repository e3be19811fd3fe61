#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cvsig/model.hpp"
#include "cvsig/preprocess.hpp"
#include "cvsig/stats.hpp"
#include "cvsig/tensor.hpp"
#include "cvsig/trainer.hpp"

namespace cvsig::eval {

// One person's two windows: the signature comes from `first`, the held-out
// prediction target is `second`.
struct WindowPair {
  const data::PreprocessedSeries* first = nullptr;
  const data::PreprocessedSeries* second = nullptr;
  const std::string& person_id() const { return first->person_id; }
};

void check_pairs(const std::vector<WindowPair>& persons);

std::vector<model::Signature> encode_all(const model::ModelParams& model, const std::vector<WindowPair>& persons);

// Masked MSE of decoding `series` with `signature`, scored from minute `from`.
double decoded_mse(const model::ModelParams& model, const data::PreprocessedSeries& series,
                   const model::Signature& signature, std::size_t from = 0);

struct ModelErrorRow {
  std::string person_id;
  double first_mse = 0.0;   // reconstruction of the signature window
  double second_mse = 0.0;  // held-out window with the first window's signature
};

std::vector<ModelErrorRow> model_errors(const model::ModelParams& model, const std::vector<WindowPair>& persons,
                                        const std::vector<model::Signature>& signatures, std::size_t from = 0);

struct ConsistencyRow {
  std::string person_id;
  std::string other_id;
  double own_mse = 0.0;
  double other_mse = 0.0;
  double ratio = 0.0;  // other / own
};

struct ConsistencyResult {
  std::vector<ConsistencyRow> rows;
  double median_ratio = 0.0;
  stats::WilcoxonResult wilcoxon;
};

// For every person, one uniformly drawn other person (never itself).
std::vector<std::size_t> draw_other_persons(std::size_t n, std::uint64_t seed);

ConsistencyResult consistency_test(const model::ModelParams& model, const std::vector<WindowPair>& persons,
                                   std::uint64_t seed, std::size_t from = 0);
ConsistencyResult consistency_test(const model::ModelParams& model, const std::vector<WindowPair>& persons,
                                   const std::vector<model::Signature>& signatures, std::uint64_t seed,
                                   std::size_t from = 0);

// Downstream classification.
enum class Task { kMedianAge, kObese, kMedianFitness };
std::string_view to_string(Task task);
Task parse_task(std::string_view text);

// Above the cohort median (strictly) for the median tasks; bmi >= 30 for kObese.
std::vector<int> task_labels(Task task, std::span<const double> values);

struct DownstreamResult {
  std::string task;
  std::string feature_set;  // "signature" or "rhr"
  double auc = 0.5;
  std::uint64_t seed = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
};

inline constexpr std::size_t kMinPerClass = 20;
inline constexpr double kTrainShare = 0.7;

// signatures [n x s]; rhr [n]; labels [n]. Returns {signature, rhr}.
std::pair<DownstreamResult, DownstreamResult> downstream_task(const Tensor& signatures, std::span<const double> rhr,
                                                              std::span<const int> labels, std::string_view task,
                                                              std::uint64_t seed);

Tensor signature_matrix(const std::vector<model::Signature>& signatures);

// Sweeps over signature size or training-set fraction.
struct SweepRow {
  double setting = 0.0;
  double first_error = 0.0;
  double second_error = 0.0;
  std::size_t best_epoch = 0;
};

struct SweepTable {
  std::string axis;  // signature_size | train_fraction
  std::vector<SweepRow> rows;
};

struct SweepData {
  std::vector<const data::PreprocessedSeries*> train;
  std::vector<const data::PreprocessedSeries*> tune;
  std::vector<WindowPair> validation;
};

struct SweepOptions {
  train::TrainConfig train;
  std::size_t signature_size = 32;  // fixed size for the fraction sweep
  std::uint64_t init_seed = 1;
  std::uint64_t subset_seed = 1;
  std::size_t eval_from = 0;
};

SweepTable sweep_signature_size(const std::vector<std::size_t>& sizes, const SweepData& data,
                                const SweepOptions& options);
SweepTable sweep_train_fraction(const std::vector<double>& fractions, const SweepData& data,
                                const SweepOptions& options);

// Nested prefixes of one seeded shuffle; sizes are ceil(fraction * n).
std::vector<std::vector<std::size_t>> nested_subsets(std::size_t n, const std::vector<double>& fractions,
                                                     std::uint64_t seed);

// setting,window1_error,window2_error,best_epoch
void write_sweep_csv(const std::filesystem::path& path, const SweepTable& table);
void write_consistency_csv(const std::filesystem::path& path, const ConsistencyResult& result);
void write_model_errors_csv(const std::filesystem::path& path, const std::vector<ModelErrorRow>& rows);
void write_downstream_csv(const std::filesystem::path& path, const std::vector<DownstreamResult>& rows);

}  // namespace cvsig::eval
