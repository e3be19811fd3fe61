#include <doctest.h>

#include <cmath>
#include <fstream>

#include "cvsig/baselines.hpp"
#include "helpers.hpp"

using namespace cvsig;
using namespace cvsig::baselines;

TEST_CASE("mean baseline predicts per-state means") {
  auto s = testing::random_series(10, 1, 0.0);
  s.activity = Tensor({3, 10});
  // minutes 0..3 awake, 4..6 asleep, 7..9 restless
  for (std::size_t t = 4; t < 7; ++t) s.activity.at(1, t) = 1.0;
  for (std::size_t t = 7; t < 10; ++t) s.activity.at(2, t) = 1.0;
  for (std::size_t t = 0; t < 10; ++t) s.hr[t] = double(t);
  s.loss_mask[0] = 0.0;  // minute 0 unobserved
  const auto m = fit_mean_baseline(s);
  CHECK(m.awake_mean == doctest::Approx(2.0));
  CHECK(m.asleep_mean == doctest::Approx((4 + 5 + 6 + 7 + 8 + 9) / 6.0));
  const auto p = predict_mean_baseline(m, s.activity);
  CHECK(p[1] == m.awake_mean);
  CHECK(p[8] == m.asleep_mean);

  // no asleep minutes: fall back to the overall mean
  s.activity = Tensor({3, 10});
  const auto awake_only = fit_mean_baseline(s);
  CHECK(awake_only.asleep_mean == awake_only.awake_mean);
  s.loss_mask = Tensor({10});
  CHECK_THROWS(fit_mean_baseline(s));
}

TEST_CASE("lag features match a naive construction") {
  std::mt19937_64 rng(3);
  const Tensor a = testing::random_tensor({3, 40}, rng);
  const std::size_t lag = 7;
  const Tensor f = build_lag_features(a, lag);
  REQUIRE(f.dim(0) == 33);
  REQUIRE(f.dim(1) == 21);
  for (std::size_t r = 0; r < 33; ++r) {
    const std::size_t target = r + lag;
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t k = 0; k < lag; ++k) {
        // column c*lag + k is minute target - lag + k: strictly before the target
        REQUIRE(target - lag + k < target);
        CHECK(f.at(r, c * lag + k) == a.at(c, target - lag + k));
      }
    }
  }
  CHECK(build_lag_features(Tensor({3, 121})).dim(0) == 1);
  CHECK_THROWS(build_lag_features(Tensor({3, 120})));
  CHECK_THROWS(build_lag_features(Tensor({2, 200})));
}

TEST_CASE("lag features never include the target minute") {
  // Changing activity at minute t must not change the row predicting t.
  std::mt19937_64 rng(4);
  Tensor a = testing::random_tensor({3, 300}, rng);
  const Tensor before = build_lag_features(a);
  a.at(0, 250) += 10.0;
  const Tensor after = build_lag_features(a);
  for (std::size_t j = 0; j < before.dim(1); ++j) CHECK(before.at(250 - 120, j) == after.at(250 - 120, j));
}

TEST_CASE("masked mse scores observed minutes from the start minute") {
  auto s = testing::random_series(6, 2, 0.0);
  for (std::size_t t = 0; t < 6; ++t) s.hr[t] = 1.0;
  s.loss_mask[4] = 0.0;
  const std::vector<double> p = {9, 9, 3, 1, 100, 2};
  CHECK(masked_mse(p, s) == doctest::Approx((64 + 64 + 4 + 0 + 1) / 5.0));
  CHECK(masked_mse(p, s, 2) == doctest::Approx((4 + 0 + 1) / 3.0));
  CHECK_THROWS(masked_mse(std::vector<double>{1, 2}, s));
  s.loss_mask = Tensor({6});
  CHECK_THROWS(masked_mse(p, s));
}

TEST_CASE("baselines recover an analytic signal") {
  // Heart rate equals steps ten minutes earlier; GBT sees that lag.
  std::vector<data::PreprocessedSeries> windows;
  for (int w = 0; w < 2; ++w) {
    auto s = testing::random_series(1000, 10 + std::uint64_t(w), 0.05, "P1");
    for (std::size_t t = 0; t < 1000; ++t) s.hr[t] = t >= 10 ? 3.0 * s.activity.at(0, t - 10) : 0.0;
    windows.push_back(s);
  }
  BaselineOptions opt;
  opt.gbt.n_rounds = 60;
  const std::vector<PersonPair> pairs = {{&windows[0], &windows[1]}};
  const double mean = run_baselines(pairs, {}, Mode::kMean, opt)[0].mse;
  const double indiv = run_baselines(pairs, {}, Mode::kIndividualGbt, opt)[0].mse;
  const double pop = run_baselines(pairs, {&windows[0]}, Mode::kPopulationGbt, opt)[0].mse;
  CHECK(indiv < 0.1 * mean);
  CHECK(pop == doctest::Approx(indiv));  // same training rows
  CHECK_THROWS(run_baselines(pairs, {}, Mode::kPopulationGbt, opt));
}

TEST_CASE("population subsampling is deterministic and capped") {
  std::vector<data::PreprocessedSeries> s;
  for (int i = 0; i < 4; ++i) s.push_back(testing::random_series(400, std::uint64_t(i), 0.1, "P" + std::to_string(i)));
  std::vector<const data::PreprocessedSeries*> pop = {&s[0], &s[1], &s[2]};
  BaselineOptions opt;
  opt.gbt.n_rounds = 5;
  opt.population_max_rows = 300;
  const std::vector<PersonPair> pairs = {{&s[3], &s[3]}};
  const auto a = run_baselines(pairs, pop, Mode::kPopulationGbt, opt);
  const auto b = run_baselines(pairs, pop, Mode::kPopulationGbt, opt);
  CHECK(a[0].mse == b[0].mse);
  opt.seed = 99;
  CHECK(run_baselines(pairs, pop, Mode::kPopulationGbt, opt)[0].mse != a[0].mse);
}

TEST_CASE("mode names and CSV") {
  for (Mode m : {Mode::kMean, Mode::kIndividualGbt, Mode::kPopulationGbt}) CHECK(parse_mode(to_string(m)) == m);
  CHECK_THROWS(parse_mode("lstm"));
  const auto dir = testing::tmp_dir("baseline_csv");
  write_baseline_csv(dir / "b.csv", {{"P1", Mode::kMean, 0.5}, {"P2", Mode::kPopulationGbt, 0.25}});
  std::ifstream in(dir / "b.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "person_id,mode,mse");
  std::getline(in, line);
  CHECK(line == "P1,mean,0.5");
  std::getline(in, line);
  CHECK(line == "P2,population_gbt,0.25");
  CHECK(mean_mse({{"a", Mode::kMean, 1.0}, {"b", Mode::kMean, 3.0}}) == 2.0);
  CHECK_THROWS(mean_mse({}));
}
