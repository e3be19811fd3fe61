#pragma once

// Gradient-boosted regression trees with exact greedy split search.
//
// Every distinct value of a feature is a candidate boundary, so the split
// found at a node is the best axis-aligned partition of its samples. Split
// points are midpoints between the neighbouring values present in the node.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cvsig/tensor.hpp"

namespace cvsig::gbt {

enum class Loss { kSquared, kLogistic };

struct GbtConfig {
  double learning_rate = 0.3;
  std::size_t n_rounds = 100;
  std::size_t max_depth = 6;
  std::size_t min_samples_leaf = 1;
  Loss loss = Loss::kSquared;
  // L2 penalty on leaf values and minimum hessian per child (logistic only;
  // the squared loss runs unregularised).
  double lambda = 0.0;
  double min_child_weight = 0.0;

  // Settings used by the downstream classifiers.
  static GbtConfig classifier();
  void validate() const;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // go left when x < threshold
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(std::span<const double> row) const;
  std::size_t depth() const;
};

struct GbtModel {
  GbtConfig config;
  std::size_t n_features = 0;
  double base_score = 0.0;
  std::vector<Tree> trees;
};

struct FitTrace {
  // Training loss after each round (MSE or mean log-loss); entry 0 is the
  // loss of the base score alone.
  std::vector<double> train_loss;
};

// features [n x F], targets [n].
GbtModel gbt_fit(const Tensor& features, std::span<const double> targets, const GbtConfig& config,
                 FitTrace* trace = nullptr);

// Raw margin: base_score + learning_rate * sum of tree outputs.
std::vector<double> gbt_predict(const GbtModel& model, const Tensor& features);
// Sigmoid of the margin for logistic models.
std::vector<double> gbt_predict_proba(const GbtModel& model, const Tensor& features);

nlohmann::json to_json(const GbtModel& model);
GbtModel gbt_from_json(const nlohmann::json& doc);
void save_gbt(const std::filesystem::path& path, const GbtModel& model);
GbtModel load_gbt(const std::filesystem::path& path);

}  // namespace cvsig::gbt
