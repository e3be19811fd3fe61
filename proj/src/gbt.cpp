#include "cvsig/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "cvsig/csv.hpp"

namespace cvsig::gbt {

namespace {

constexpr double kMinGain = 1e-12;

struct HistEntry {
  double g = 0.0;
  double h = 0.0;
  double n = 0.0;
};

struct SplitChoice {
  bool valid = false;
  std::size_t feature = 0;
  std::size_t last_left_bin = 0;  // feature-local bin index
  double threshold = 0.0;
  double gain = 0.0;
};

struct Pending {
  int node = 0;
  std::vector<std::uint32_t> rows;
  std::vector<HistEntry> hist;
};

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Sorted distinct values of every column.
std::vector<std::vector<double>> distinct_values(const Tensor& features) {
  const std::size_t n = features.dim(0);
  const std::size_t f = features.dim(1);
  std::vector<std::vector<double>> cuts(f);
  std::vector<double> column(n);
  for (std::size_t j = 0; j < f; ++j) {
    for (std::size_t i = 0; i < n; ++i) column[i] = features.at(i, j);
    std::sort(column.begin(), column.end());
    column.erase(std::unique(column.begin(), column.end()), column.end());
    cuts[j] = column;
    column.resize(n);
  }
  return cuts;
}

template <class Bin>
class TreeBuilder {
 public:
  TreeBuilder(const Tensor& features, const std::vector<std::vector<double>>& cuts, const GbtConfig& config)
      : n_rows_(features.dim(0)), n_feat_(features.dim(1)), cuts_(cuts), config_(config) {
    offsets_.resize(n_feat_ + 1, 0);
    for (std::size_t j = 0; j < n_feat_; ++j) offsets_[j + 1] = offsets_[j] + cuts_[j].size();
    bins_.resize(n_rows_ * n_feat_);
    for (std::size_t i = 0; i < n_rows_; ++i) {
      for (std::size_t j = 0; j < n_feat_; ++j) {
        const auto& c = cuts_[j];
        bins_[i * n_feat_ + j] = Bin(std::lower_bound(c.begin(), c.end(), features.at(i, j)) - c.begin());
      }
    }
  }

  // Grows one tree on (grad, hess); writes each row's leaf value.
  Tree grow(std::span<const double> grad, std::span<const double> hess, std::vector<double>& row_value) const {
    Tree tree;
    tree.nodes.emplace_back();
    std::vector<Pending> level(1);
    level[0].node = 0;
    level[0].rows.resize(n_rows_);
    for (std::size_t i = 0; i < n_rows_; ++i) level[0].rows[i] = std::uint32_t(i);
    if (config_.max_depth > 0) build_hist(level[0].rows, grad, hess, level[0].hist);

    for (std::size_t depth = 0; !level.empty(); ++depth) {
      std::vector<Pending> next;
      for (auto& p : level) {
        SplitChoice split;
        if (depth < config_.max_depth) split = find_split(p.hist);
        if (!split.valid) {
          make_leaf(tree, p, grad, hess, row_value);
          continue;
        }
        Pending left;
        Pending right;
        for (std::uint32_t r : p.rows) {
          (bins_[std::size_t(r) * n_feat_ + split.feature] <= split.last_left_bin ? left.rows : right.rows).push_back(r);
        }
        left.node = int(tree.nodes.size());
        right.node = left.node + 1;
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        TreeNode& node = tree.nodes[std::size_t(p.node)];
        node.feature = int(split.feature);
        node.threshold = split.threshold;
        node.left = left.node;
        node.right = right.node;

        if (depth + 1 < config_.max_depth) {
          // Histogram of the smaller child; the sibling is parent minus it.
          Pending& small = left.rows.size() <= right.rows.size() ? left : right;
          Pending& large = &small == &left ? right : left;
          build_hist(small.rows, grad, hess, small.hist);
          large.hist = std::move(p.hist);
          for (std::size_t b = 0; b < large.hist.size(); ++b) {
            large.hist[b].g -= small.hist[b].g;
            large.hist[b].h -= small.hist[b].h;
            large.hist[b].n -= small.hist[b].n;
          }
        }
        p.hist.clear();
        p.hist.shrink_to_fit();
        next.push_back(std::move(left));
        next.push_back(std::move(right));
      }
      level = std::move(next);
    }
    return tree;
  }

 private:
  void build_hist(const std::vector<std::uint32_t>& rows, std::span<const double> grad, std::span<const double> hess,
                  std::vector<HistEntry>& hist) const {
    hist.assign(offsets_.back(), HistEntry{});
    const std::size_t* off = offsets_.data();
    for (std::uint32_t r : rows) {
      const Bin* b = bins_.data() + std::size_t(r) * n_feat_;
      const double g = grad[r];
      const double h = hess[r];
      for (std::size_t j = 0; j < n_feat_; ++j) {
        HistEntry& e = hist[off[j] + b[j]];
        e.g += g;
        e.h += h;
        e.n += 1.0;
      }
    }
  }

  SplitChoice find_split(const std::vector<HistEntry>& hist) const {
    SplitChoice best;
    if (hist.empty()) return best;
    double G = 0.0, H = 0.0, N = 0.0;
    for (std::size_t b = offsets_[0]; b < offsets_[1]; ++b) {
      G += hist[b].g;
      H += hist[b].h;
      N += hist[b].n;
    }
    const double lambda = config_.lambda;
    const double min_leaf = double(config_.min_samples_leaf);
    const double parent = G * G / (H + lambda);
    best.gain = kMinGain;
    for (std::size_t j = 0; j < n_feat_; ++j) {
      double gl = 0.0, hl = 0.0, nl = 0.0;
      std::size_t prev = 0;
      bool have_prev = false;
      for (std::size_t b = offsets_[j]; b < offsets_[j + 1]; ++b) {
        const HistEntry& e = hist[b];
        if (e.n <= 0.0) continue;
        const std::size_t local = b - offsets_[j];
        if (have_prev) {
          const double gr = G - gl, hr = H - hl, nr = N - nl;
          if (nl >= min_leaf && nr >= min_leaf && hl >= config_.min_child_weight && hr >= config_.min_child_weight) {
            const double gain = gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent;
            if (gain > best.gain) {
              best.valid = true;
              best.gain = gain;
              best.feature = j;
              best.last_left_bin = prev;
              best.threshold = 0.5 * (cuts_[j][prev] + cuts_[j][local]);
            }
          }
        }
        gl += e.g;
        hl += e.h;
        nl += e.n;
        prev = local;
        have_prev = true;
      }
    }
    return best;
  }

  void make_leaf(Tree& tree, const Pending& p, std::span<const double> grad, std::span<const double> hess,
                 std::vector<double>& row_value) const {
    double g = 0.0, h = 0.0;
    for (std::uint32_t r : p.rows) {
      g += grad[r];
      h += hess[r];
    }
    const double value = p.rows.empty() ? 0.0 : g / (h + config_.lambda);
    tree.nodes[std::size_t(p.node)].value = value;
    for (std::uint32_t r : p.rows) row_value[r] = value;
  }

  std::size_t n_rows_;
  std::size_t n_feat_;
  const std::vector<std::vector<double>>& cuts_;
  const GbtConfig& config_;
  std::vector<std::size_t> offsets_;
  std::vector<Bin> bins_;
};

double training_loss(Loss loss, std::span<const double> y, const std::vector<double>& margin) {
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (loss == Loss::kSquared) {
      const double e = y[i] - margin[i];
      total += e * e;
    } else {
      // log(1 + exp(m)) - y m, written to avoid overflow
      const double m = margin[i];
      total += std::max(m, 0.0) + std::log1p(std::exp(-std::abs(m))) - y[i] * m;
    }
  }
  return total / double(y.size());
}

template <class Bin>
GbtModel fit_impl(const Tensor& features, std::span<const double> y, const GbtConfig& config,
                  const std::vector<std::vector<double>>& cuts, FitTrace* trace) {
  const std::size_t n = features.dim(0);
  GbtModel model;
  model.config = config;
  model.n_features = features.dim(1);
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= double(n);
  if (config.loss == Loss::kLogistic) {
    const double p = std::clamp(mean, 1e-6, 1.0 - 1e-6);
    model.base_score = std::log(p / (1.0 - p));
  } else {
    model.base_score = mean;
  }

  std::vector<double> margin(n, model.base_score);
  if (trace) trace->train_loss.push_back(training_loss(config.loss, y, margin));
  if (config.n_rounds == 0) return model;

  TreeBuilder<Bin> builder(features, cuts, config);
  std::vector<double> grad(n), hess(n, 1.0), row_value(n);
  for (std::size_t round = 0; round < config.n_rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      if (config.loss == Loss::kSquared) {
        grad[i] = y[i] - margin[i];
      } else {
        const double p = sigmoid(margin[i]);
        grad[i] = y[i] - p;
        hess[i] = std::max(p * (1.0 - p), 1e-16);
      }
    }
    model.trees.push_back(builder.grow(grad, hess, row_value));
    for (std::size_t i = 0; i < n; ++i) margin[i] += config.learning_rate * row_value[i];
    if (trace) trace->train_loss.push_back(training_loss(config.loss, y, margin));
  }
  return model;
}

}  // namespace

GbtConfig GbtConfig::classifier() {
  GbtConfig c;
  c.learning_rate = 0.3;
  c.n_rounds = 50;
  c.max_depth = 3;
  c.loss = Loss::kLogistic;
  c.lambda = 1.0;
  c.min_child_weight = 1.0;
  return c;
}

void GbtConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (min_samples_leaf < 1) throw std::invalid_argument("min_samples_leaf must be >= 1");
  if (lambda < 0.0 || min_child_weight < 0.0) throw std::invalid_argument("lambda and min_child_weight must be >= 0");
}

double Tree::predict(std::span<const double> row) const {
  std::size_t i = 0;
  while (nodes[i].feature >= 0) {
    const TreeNode& node = nodes[i];
    i = std::size_t(row[std::size_t(node.feature)] < node.threshold ? node.left : node.right);
  }
  return nodes[i].value;
}

std::size_t Tree::depth() const {
  std::vector<std::size_t> depth(nodes.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, depth[i]);
    if (nodes[i].feature >= 0) {
      depth[std::size_t(nodes[i].left)] = depth[i] + 1;
      depth[std::size_t(nodes[i].right)] = depth[i] + 1;
    }
  }
  return deepest;
}

GbtModel gbt_fit(const Tensor& features, std::span<const double> targets, const GbtConfig& config, FitTrace* trace) {
  config.validate();
  if (features.rank() != 2) throw std::invalid_argument("gbt_fit: features must be [n x F]");
  const std::size_t n = features.dim(0);
  if (n == 0) throw std::invalid_argument("gbt_fit: no samples");
  if (targets.size() != n) throw std::invalid_argument("gbt_fit: feature rows and targets differ");
  if (!features.all_finite()) throw std::invalid_argument("gbt_fit: non-finite feature values");
  if (config.loss == Loss::kLogistic) {
    for (double y : targets) {
      if (y != 0.0 && y != 1.0) throw std::invalid_argument("gbt_fit: logistic targets must be 0 or 1");
    }
  }
  const auto cuts = distinct_values(features);
  std::size_t widest = 0;
  for (const auto& c : cuts) widest = std::max(widest, c.size());
  if (widest <= 65536) return fit_impl<std::uint16_t>(features, targets, config, cuts, trace);
  return fit_impl<std::uint32_t>(features, targets, config, cuts, trace);
}

std::vector<double> gbt_predict(const GbtModel& model, const Tensor& features) {
  if (features.rank() != 2 || features.dim(1) != model.n_features) {
    throw std::invalid_argument("gbt_predict: expected " + std::to_string(model.n_features) +
                                " feature columns, got " + shape_string(features.shape()));
  }
  const std::size_t n = features.dim(0);
  std::vector<double> out(n, model.base_score);
  for (std::size_t i = 0; i < n; ++i) {
    std::span<const double> row(features.raw() + i * model.n_features, model.n_features);
    double sum = 0.0;
    for (const auto& tree : model.trees) sum += tree.predict(row);
    out[i] += model.config.learning_rate * sum;
  }
  return out;
}

std::vector<double> gbt_predict_proba(const GbtModel& model, const Tensor& features) {
  auto margin = gbt_predict(model, features);
  for (double& m : margin) m = sigmoid(m);
  return margin;
}

nlohmann::json to_json(const GbtModel& model) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : model.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : tree.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
    trees.push_back(std::move(nodes));
  }
  const auto& c = model.config;
  return {{"format", "cvsig-gbt"},
          {"loss", c.loss == Loss::kSquared ? "squared" : "logistic"},
          {"learning_rate", c.learning_rate},
          {"n_rounds", c.n_rounds},
          {"max_depth", c.max_depth},
          {"min_samples_leaf", c.min_samples_leaf},
          {"lambda", c.lambda},
          {"min_child_weight", c.min_child_weight},
          {"n_features", model.n_features},
          {"base_score", model.base_score},
          {"trees", std::move(trees)}};
}

GbtModel gbt_from_json(const nlohmann::json& doc) {
  if (doc.at("format").get<std::string>() != "cvsig-gbt") throw std::runtime_error("not a gbt model");
  GbtModel m;
  m.config.loss = doc.at("loss").get<std::string>() == "logistic" ? Loss::kLogistic : Loss::kSquared;
  m.config.learning_rate = doc.at("learning_rate").get<double>();
  m.config.n_rounds = doc.at("n_rounds").get<std::size_t>();
  m.config.max_depth = doc.at("max_depth").get<std::size_t>();
  m.config.min_samples_leaf = doc.at("min_samples_leaf").get<std::size_t>();
  m.config.lambda = doc.at("lambda").get<double>();
  m.config.min_child_weight = doc.at("min_child_weight").get<double>();
  m.n_features = doc.at("n_features").get<std::size_t>();
  m.base_score = doc.at("base_score").get<double>();
  for (const auto& jt : doc.at("trees")) {
    Tree tree;
    for (const auto& jn : jt) {
      TreeNode n;
      n.feature = jn.at(0).get<int>();
      n.threshold = jn.at(1).get<double>();
      n.left = jn.at(2).get<int>();
      n.right = jn.at(3).get<int>();
      n.value = jn.at(4).get<double>();
      tree.nodes.push_back(n);
    }
    m.trees.push_back(std::move(tree));
  }
  return m;
}

void save_gbt(const std::filesystem::path& path, const GbtModel& model) {
  std::ofstream out = csv::open_for_write(path);
  out << to_json(model).dump() << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

GbtModel load_gbt(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    nlohmann::json doc;
    in >> doc;
    return gbt_from_json(doc);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("corrupt gbt model " + path.string() + ": " + e.what());
  }
}

}  // namespace cvsig::gbt
