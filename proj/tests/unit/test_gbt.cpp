#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "cvsig/gbt.hpp"
#include "helpers.hpp"

using namespace cvsig;
using namespace cvsig::gbt;

namespace {

struct Dataset {
  Tensor x;
  std::vector<double> y;
};

Dataset random_regression(std::size_t n, std::size_t f, std::uint64_t seed, bool integer_features = false) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.3);
  std::uniform_int_distribution<int> small(0, 4);
  Dataset d{testing::random_tensor({n, f}, rng), {}};
  if (integer_features) {
    for (double& v : d.x.data()) v = small(rng);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double a = d.x.at(i, 0);
    const double b = f > 1 ? d.x.at(i, 1) : 0.0;
    d.y.push_back(std::sin(3.0 * a) + (b > 0.2 ? 1.0 : -0.5) + noise(rng));
  }
  return d;
}

double mse(const std::vector<double>& p, const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (p[i] - y[i]) * (p[i] - y[i]);
  return s / double(y.size());
}

// Exhaustive best single split on one feature: threshold between sorted
// distinct values minimising the summed squared error.
double best_threshold_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> distinct = x;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  double best = std::numeric_limits<double>::infinity(), thr = 0.0;
  for (std::size_t k = 0; k + 1 < distinct.size(); ++k) {
    const double t = 0.5 * (distinct[k] + distinct[k + 1]);
    double sl = 0, sr = 0, nl = 0, nr = 0;
    for (std::size_t i = 0; i < x.size(); ++i) (x[i] < t ? (sl += y[i], nl += 1) : (sr += y[i], nr += 1));
    double sse = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double m = x[i] < t ? sl / nl : sr / nr;
      sse += (y[i] - m) * (y[i] - m);
    }
    if (sse < best - 1e-12) best = sse, thr = t;
  }
  return thr;
}

}  // namespace

TEST_CASE("zero rounds predicts the training mean") {
  const auto d = random_regression(50, 3, 1);
  GbtConfig cfg;
  cfg.n_rounds = 0;
  const auto m = gbt_fit(d.x, d.y, cfg);
  double mean = 0;
  for (double v : d.y) mean += v;
  mean /= 50.0;
  CHECK(m.trees.empty());
  for (double p : gbt_predict(m, d.x)) CHECK(p == doctest::Approx(mean).epsilon(1e-14));
}

TEST_CASE("depth-1 single round recovers a step threshold") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int rep = 0; rep < 10; ++rep) {
    const double cut = 2.0 + rep * 0.6;
    std::vector<double> xs, ys;
    Tensor x({80, 1});
    for (std::size_t i = 0; i < 80; ++i) {
      x[i] = u(rng);
      xs.push_back(x[i]);
      ys.push_back(x[i] < cut ? 1.0 : 4.0);
    }
    GbtConfig cfg;
    cfg.n_rounds = 1;
    cfg.max_depth = 1;
    const auto m = gbt_fit(x, ys, cfg);
    REQUIRE(m.trees.size() == 1);
    REQUIRE(m.trees[0].nodes[0].feature == 0);
    CHECK(m.trees[0].nodes[0].threshold == best_threshold_oracle(xs, ys));
    // the oracle threshold separates the two levels
    for (std::size_t i = 0; i < 80; ++i) CHECK((xs[i] < m.trees[0].nodes[0].threshold) == (xs[i] < cut));
  }
}

TEST_CASE("training loss never increases over 100 rounds") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto d = random_regression(120, 4, seed, seed % 2 == 0);
    FitTrace trace;
    const auto m = gbt_fit(d.x, d.y, GbtConfig{}, &trace);
    REQUIRE(trace.train_loss.size() == 101);
    for (std::size_t r = 1; r < trace.train_loss.size(); ++r) CHECK(trace.train_loss[r] <= trace.train_loss[r - 1] + 1e-12);
    CHECK(mse(gbt_predict(m, d.x), d.y) == doctest::Approx(trace.train_loss.back()).epsilon(1e-9));
  }
}

TEST_CASE("trees respect max_depth and leaves hold the mean residual") {
  const auto d = random_regression(200, 3, 3);
  GbtConfig cfg;
  cfg.n_rounds = 1;
  cfg.max_depth = 2;
  const auto m = gbt_fit(d.x, d.y, cfg);
  CHECK(m.trees[0].depth() <= 2);
  // group rows by the leaf they reach and compare with the leaf value
  std::map<double, std::pair<double, double>> by_leaf;
  for (std::size_t i = 0; i < 200; ++i) {
    std::span<const double> row(d.x.raw() + i * 3, 3);
    auto& acc = by_leaf[m.trees[0].predict(row)];
    acc.first += d.y[i] - m.base_score;
    acc.second += 1.0;
  }
  for (const auto& [value, acc] : by_leaf) CHECK(value == doctest::Approx(acc.first / acc.second).epsilon(1e-10));

  cfg.n_rounds = 20;
  cfg.max_depth = 6;
  for (const auto& t : gbt_fit(d.x, d.y, cfg).trees) CHECK(t.depth() <= 6);
}

TEST_CASE("hand-traced stump prediction") {
  GbtModel m;
  m.n_features = 2;
  m.base_score = 1.0;
  m.config.learning_rate = 0.5;
  Tree t;
  t.nodes = {{1, 0.0, 1, 2, 0.0}, {-1, 0, -1, -1, -2.0}, {-1, 0, -1, -1, 4.0}};
  m.trees = {t, t};
  const auto p = gbt_predict(m, Tensor({2, 2}, std::vector<double>{9, -1, 9, 1}));
  CHECK(p[0] == doctest::Approx(1.0 + 0.5 * (-4.0)));
  CHECK(p[1] == doctest::Approx(1.0 + 0.5 * 8.0));
  CHECK_THROWS(gbt_predict(m, Tensor({2, 3})));
}

TEST_CASE("pure noise does not generalise") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  const std::size_t N = 400;
  Tensor xtr = testing::random_tensor({N, 5}, rng), xte = testing::random_tensor({N, 5}, rng);
  std::vector<double> ytr(N), yte(N);
  for (auto& v : ytr) v = n(rng);
  for (auto& v : yte) v = n(rng);
  const auto m = gbt_fit(xtr, ytr, GbtConfig{});
  double mean = 0, var = 0;
  for (double v : yte) mean += v;
  mean /= double(N);
  for (double v : yte) var += (v - mean) * (v - mean);
  var /= double(N);
  CHECK(mse(gbt_predict(m, xte), yte) >= 0.95 * var);
}

TEST_CASE("fits are deterministic and survive JSON round trip") {
  const auto dir = testing::tmp_dir("gbt_json");
  const auto d = random_regression(100, 3, 5);
  GbtConfig cfg;
  cfg.n_rounds = 15;
  const auto a = gbt_fit(d.x, d.y, cfg);
  const auto b = gbt_fit(d.x, d.y, cfg);
  CHECK(gbt_predict(a, d.x) == gbt_predict(b, d.x));
  save_gbt(dir / "m.json", a);
  const auto back = load_gbt(dir / "m.json");
  CHECK(gbt_predict(back, d.x) == gbt_predict(a, d.x));
}

TEST_CASE("logistic classifier separates a threshold") {
  std::mt19937_64 rng(2);
  Tensor x = testing::random_tensor({200, 2}, rng);
  std::vector<double> y;
  for (std::size_t i = 0; i < 200; ++i) y.push_back(x.at(i, 1) > 0.1 ? 1.0 : 0.0);
  FitTrace trace;
  const auto m = gbt_fit(x, y, GbtConfig::classifier(), &trace);
  CHECK(m.trees.size() == 50);
  CHECK(trace.train_loss.back() < trace.train_loss.front());
  const auto p = gbt_predict_proba(m, x);
  std::size_t right = 0;
  for (std::size_t i = 0; i < 200; ++i) right += (p[i] > 0.5) == (y[i] == 1.0);
  CHECK(right >= 195);
  CHECK_THROWS(gbt_fit(x, std::vector<double>(200, 0.5), GbtConfig::classifier()));
}

TEST_CASE("input validation") {
  GbtConfig cfg;
  CHECK_THROWS(gbt_fit(Tensor({0, 2}), std::vector<double>{}, cfg));
  CHECK_THROWS(gbt_fit(Tensor({3, 2}), std::vector<double>{1, 2}, cfg));
  cfg.learning_rate = 0.0;
  CHECK_THROWS(gbt_fit(Tensor({3, 2}), std::vector<double>{1, 2, 3}, cfg));
}
