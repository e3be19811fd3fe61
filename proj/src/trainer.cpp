#include "cvsig/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "cvsig/csv.hpp"

namespace cvsig::train {

void AdamConfig::validate() const {
  if (!(alpha > 0.0)) throw std::invalid_argument("adam alpha must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("adam betas must be in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("adam epsilon must be > 0");
}

void TrainConfig::validate() const {
  adam.validate();
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (patience < 1) throw std::invalid_argument("patience must be >= 1");
  if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
  if (window_length < 1) throw std::invalid_argument("window_length must be >= 1");
}

void adam_step(ad::ParameterSet& params, const ad::Gradients& grads, AdamState& state, const AdamConfig& config) {
  if (grads.size() != params.size()) throw std::invalid_argument("adam_step: gradient count mismatch");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.value.shape());
      state.v.emplace_back(p.value.shape());
    }
  }
  if (state.m.size() != params.size()) throw std::invalid_argument("adam_step: optimizer state mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!grads[i].same_shape(params[i].value) || !state.m[i].same_shape(params[i].value)) {
      throw std::invalid_argument("adam_step: shape mismatch for " + params[i].name);
    }
  }

  state.t += 1;
  const double b1 = config.beta1;
  const double b2 = config.beta2;
  const double c1 = 1.0 - std::pow(b1, double(state.t));
  const double c2 = 1.0 - std::pow(b2, double(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& theta = params[i].value;
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    const Tensor& g = grads[i];
    for (std::size_t k = 0; k < theta.size(); ++k) {
      m[k] = b1 * m[k] + (1.0 - b1) * g[k];
      v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      theta[k] -= config.alpha * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

std::string_view to_string(StopReason reason) {
  return reason == StopReason::kEarlyStop ? "early_stop" : "max_epochs";
}

bool EarlyStopping::update(double tune_loss) {
  ++epoch_;
  improved_ = epoch_ == 1 || tune_loss < best_loss_;
  if (improved_) {
    best_loss_ = tune_loss;
    best_epoch_ = epoch_;
    stale_ = 0;
  } else {
    ++stale_;
  }
  return stale_ >= patience_;
}

std::vector<Batch> make_batches(const std::vector<const data::PreprocessedSeries*>& persons,
                                std::size_t window_length, std::size_t batch_size, std::uint64_t seed,
                                std::size_t epoch, std::size_t windows_per_person) {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  for (const auto* p : persons) {
    if (p->length() < window_length) {
      throw std::invalid_argument(p->person_id + " has " + std::to_string(p->length()) +
                                  " minutes, shorter than the training window of " + std::to_string(window_length));
    }
  }
  std::seed_seq seq{std::uint32_t(seed & 0xffffffffu), std::uint32_t(seed >> 32), std::uint32_t(epoch), 0x5eedu};
  std::mt19937_64 rng(seq);

  // 0 windows per person: as many as it takes to cover each series once
  auto draws = [&](std::size_t i) {
    return windows_per_person ? windows_per_person : (persons[i]->length() + window_length - 1) / window_length;
  };
  std::size_t rounds = 0;
  for (std::size_t i = 0; i < persons.size(); ++i) rounds = std::max(rounds, draws(i));
  std::vector<std::pair<std::size_t, std::size_t>> picks;  // (person, start)
  for (std::size_t r = 0; r < rounds; ++r) {
    for (std::size_t i = 0; i < persons.size(); ++i) {
      if (r >= draws(i)) continue;
      std::uniform_int_distribution<std::size_t> start(0, persons[i]->length() - window_length);
      picks.emplace_back(i, start(rng));
    }
  }
  std::shuffle(picks.begin(), picks.end(), rng);

  std::vector<Batch> batches;
  for (std::size_t k = 0; k < picks.size(); k += batch_size) {
    Batch batch;
    for (std::size_t j = k; j < std::min(picks.size(), k + batch_size); ++j) {
      batch.push_back(persons[picks[j].first]->slice(picks[j].second, window_length));
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

double person_error(const model::ModelParams& model, const data::PreprocessedSeries& series) {
  return model::forward_loss(model, series).value();
}

double eval_split(const model::ModelParams& model, const std::vector<const data::PreprocessedSeries*>& persons) {
  if (persons.empty()) throw std::invalid_argument("eval_split: no persons");
  double total = 0.0;
  for (const auto* p : persons) total += person_error(model, *p);
  return total / double(persons.size());
}

TrainResult train(model::ModelParams initial, const std::vector<const data::PreprocessedSeries*>& train_set,
                  const std::vector<const data::PreprocessedSeries*>& tune_set, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.empty() || tune_set.empty()) throw std::invalid_argument("train: training and tuning sets must be non-empty");

  std::vector<data::PreprocessedSeries> tune_views;
  std::vector<const data::PreprocessedSeries*> tune_ptrs;
  if (config.tune_minutes > 0) {
    for (const auto* p : tune_set) tune_views.push_back(p->slice(0, std::min(config.tune_minutes, p->length())));
    for (const auto& v : tune_views) tune_ptrs.push_back(&v);
  } else {
    tune_ptrs = tune_set;
  }

  TrainResult result{initial, {}};
  model::ModelParams& current = initial;
  AdamState state;
  EarlyStopping stopper(config.patience);

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const auto batches =
        make_batches(train_set, config.window_length, config.batch_size, config.seed, epoch, config.windows_per_person);
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (const auto& batch : batches) {
      ad::Gradients total;
      for (const auto& member : batch) {
        auto fl = model::forward_loss(current, member);
        ad::Gradients g = fl.graph->backward(fl.loss);
        loss_sum += fl.value();
        ++loss_count;
        if (total.empty()) {
          total = std::move(g);
        } else {
          for (std::size_t i = 0; i < total.size(); ++i) {
            for (std::size_t k = 0; k < total[i].size(); ++k) total[i][k] += g[i][k];
          }
        }
      }
      const double inv = 1.0 / double(batch.size());
      for (auto& t : total) {
        for (double& v : t.data()) v *= inv;
      }
      adam_step(current.params, total, state, config.adam);
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / double(loss_count);
    record.tune_loss = eval_split(current, tune_ptrs);
    record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.history.epochs.push_back(record);

    const bool stop = stopper.update(record.tune_loss);
    if (stopper.improved()) result.model = current;
    if (on_epoch) on_epoch(record);
    if (stop) {
      result.history.stop_reason = StopReason::kEarlyStop;
      break;
    }
  }
  result.history.best_epoch = stopper.best_epoch();
  return result;
}

void write_training_log(const std::filesystem::path& path, const TrainHistory& history) {
  std::ofstream out = csv::open_for_write(path);
  out << "epoch,train_loss,tune_loss,seconds\n";
  for (const auto& e : history.epochs) {
    out << e.epoch << ',' << csv::format_double(e.train_loss) << ',' << csv::format_double(e.tune_loss) << ','
        << csv::format_fixed(e.seconds, 3) << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace cvsig::train
