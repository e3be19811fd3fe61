#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "cvsig/autodiff.hpp"
#include "cvsig/model.hpp"
#include "cvsig/preprocess.hpp"

namespace cvsig::train {

struct AdamConfig {
  double alpha = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;

  void validate() const;
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t t = 0;
};

// One bias-corrected Adam update; initialises the moments on first use.
void adam_step(ad::ParameterSet& params, const ad::Gradients& grads, AdamState& state, const AdamConfig& config);

struct TrainConfig {
  AdamConfig adam;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 30;
  std::size_t patience = 5;
  std::size_t window_length = 1440;
  // Random windows drawn per training series per epoch; 0 draws
  // ceil(length / window_length), about one pass over the data.
  std::size_t windows_per_person = 0;
  // Tuning loss is computed on the first `tune_minutes` of every tuning
  // series; 0 uses the full series.
  std::size_t tune_minutes = 0;
  std::uint64_t seed = 1;

  void validate() const;
};

enum class StopReason { kEarlyStop, kMaxEpochs };
std::string_view to_string(StopReason reason);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double tune_loss = 0.0;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 1-based
  StopReason stop_reason = StopReason::kMaxEpochs;
};

// Patience counter over per-epoch tuning losses.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}
  // Records the loss of the next epoch; returns true when training should stop.
  bool update(double tune_loss);
  bool improved() const { return improved_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }
  std::size_t epochs_seen() const { return epoch_; }

 private:
  std::size_t patience_;
  std::size_t epoch_ = 0;
  std::size_t best_epoch_ = 0;
  std::size_t stale_ = 0;
  double best_loss_ = 0.0;
  bool improved_ = false;
};

using Batch = std::vector<data::PreprocessedSeries>;

// Contiguous windows of exactly `window_length`, shuffled and grouped into
// batches of at most `batch_size`; deterministic in (seed, epoch).
std::vector<Batch> make_batches(const std::vector<const data::PreprocessedSeries*>& persons,
                                std::size_t window_length, std::size_t batch_size, std::uint64_t seed,
                                std::size_t epoch, std::size_t windows_per_person = 1);

// Masked MSE of one series under its own signature.
double person_error(const model::ModelParams& model, const data::PreprocessedSeries& series);
// Unweighted mean of per-person masked MSE.
double eval_split(const model::ModelParams& model, const std::vector<const data::PreprocessedSeries*>& persons);

struct TrainResult {
  model::ModelParams model;
  TrainHistory history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

TrainResult train(model::ModelParams initial, const std::vector<const data::PreprocessedSeries*>& train_set,
                  const std::vector<const data::PreprocessedSeries*>& tune_set, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

// epoch,train_loss,tune_loss,seconds
void write_training_log(const std::filesystem::path& path, const TrainHistory& history);

}  // namespace cvsig::train
