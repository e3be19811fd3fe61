#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "cvsig/evaluation.hpp"
#include "helpers.hpp"

using namespace cvsig;
using namespace cvsig::eval;

namespace {

model::ModelConfig small_model(std::size_t s) {
  model::ModelConfig c;
  c.signature_size = s;
  c.hr_block = {1, 4, 2, {1, 2, 4}};
  c.activity_block = {3, 3, 2, {1, 2, 4}};
  c.attention_dim = 3;
  c.decoder_hidden = 4;
  return c;
}

struct Cohort {
  std::vector<data::PreprocessedSeries> first, second;
  std::vector<WindowPair> pairs() const {
    std::vector<WindowPair> out;
    for (std::size_t i = 0; i < first.size(); ++i) out.push_back({&first[i], &second[i]});
    return out;
  }
};

Cohort make_cohort(std::size_t n, std::size_t T, bool identical = false) {
  Cohort c;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string id = "P" + std::to_string(i);
    const std::uint64_t seed = identical ? 0 : i;
    c.first.push_back(testing::random_series(T, 2 * seed, 0.1, id));
    c.second.push_back(testing::random_series(T, 2 * seed + 1, 0.1, id));
  }
  return c;
}

}  // namespace

TEST_CASE("other persons are uniform draws that never pick self") {
  for (std::size_t n : {2, 3, 10}) {
    const auto o = draw_other_persons(n, 4);
    REQUIRE(o.size() == n);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(o[i] != i);
      CHECK(o[i] < n);
    }
    CHECK(draw_other_persons(n, 4) == o);
  }
  CHECK_THROWS(draw_other_persons(1, 1));
  // every other person is reachable
  std::set<std::size_t> seen;
  for (std::uint64_t seed = 0; seed < 200; ++seed) seen.insert(draw_other_persons(5, seed)[0]);
  CHECK(seen == std::set<std::size_t>{1, 2, 3, 4});
}

TEST_CASE("identical persons give a consistency ratio of one") {
  const auto m = model::init_model(small_model(4), 3);
  const auto c = make_cohort(5, 150, true);
  const auto r = consistency_test(m, c.pairs(), 7);
  REQUIRE(r.rows.size() == 5);
  for (const auto& row : r.rows) {
    CHECK(row.own_mse == row.other_mse);
    CHECK(row.person_id != row.other_id);
  }
  CHECK(r.median_ratio == 1.0);
  CHECK(r.wilcoxon.p_value == 1.0);
}

TEST_CASE("consistency rows use the drawn partner's signature") {
  const auto m = model::init_model(small_model(4), 5);
  const auto c = make_cohort(4, 160);
  const auto pairs = c.pairs();
  const auto sigs = encode_all(m, pairs);
  const auto r = consistency_test(m, pairs, sigs, 9, 20);
  const auto other = draw_other_persons(4, 9);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(r.rows[i].other_id == pairs[other[i]].person_id());
    CHECK(r.rows[i].own_mse == decoded_mse(m, *pairs[i].second, sigs[i], 20));
    CHECK(r.rows[i].other_mse == decoded_mse(m, *pairs[i].second, sigs[other[i]], 20));
    CHECK(r.rows[i].ratio == doctest::Approx(r.rows[i].other_mse / r.rows[i].own_mse));
  }
  const auto errs = model_errors(m, pairs, sigs, 20);
  CHECK(errs[2].second_mse == r.rows[2].own_mse);
  CHECK(errs[2].first_mse == decoded_mse(m, *pairs[2].first, sigs[2], 20));
  const auto dir = testing::tmp_dir("consistency_csv");
  write_consistency_csv(dir / "c.csv", r);
  write_model_errors_csv(dir / "e.csv", errs);
  CHECK(std::filesystem::file_size(dir / "c.csv") > 0);

  auto bad = pairs;
  bad[0].second = &c.second[1];
  CHECK_THROWS(check_pairs(bad));
}

TEST_CASE("task labels") {
  const std::vector<double> ages = {30, 40, 50, 60};
  CHECK(task_labels(Task::kMedianAge, ages) == std::vector<int>{0, 0, 1, 1});
  const std::vector<double> odd = {1, 2, 3};
  CHECK(task_labels(Task::kMedianFitness, odd) == std::vector<int>{0, 0, 1});
  const std::vector<double> bmi = {29.99, 30.0, 35.0};
  CHECK(task_labels(Task::kObese, bmi) == std::vector<int>{0, 1, 1});
  for (Task t : {Task::kMedianAge, Task::kObese, Task::kMedianFitness}) CHECK(parse_task(to_string(t)) == t);
  CHECK_THROWS(parse_task("height"));
}

TEST_CASE("a perfectly informative feature reaches AUC 1") {
  const std::size_t n = 120;
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g(0.0, 1.0);
  Tensor x({n, 3});
  std::vector<double> rhr(n);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = i % 2;
    x.at(i, 0) = g(rng);
    x.at(i, 1) = y[i] ? 1.0 + g(rng) * 0.1 : -1.0 + g(rng) * 0.1;
    x.at(i, 2) = g(rng);
    rhr[i] = g(rng);
  }
  const auto [sig, base] = downstream_task(x, rhr, y, "t", 3);
  CHECK(sig.auc == 1.0);
  CHECK(sig.feature_set == "signature");
  CHECK(base.feature_set == "rhr");
  CHECK(sig.n_train == 84);
  CHECK(sig.n_test == 36);
  CHECK(base.auc < 0.85);
  // identical across calls
  CHECK(downstream_task(x, rhr, y, "t", 3).second.auc == base.auc);

  std::vector<int> starved(n, 0);
  for (std::size_t i = 0; i < 10; ++i) starved[i] = 1;
  CHECK_THROWS_WITH(downstream_task(x, rhr, starved, "t", 3), doctest::Contains("class starvation"));
}

TEST_CASE("nested subsets grow by inclusion with ceil sizes") {
  const auto s = nested_subsets(10, {0.01, 0.25, 0.5, 1.0}, 3);
  REQUIRE(s.size() == 4);
  CHECK(s[0].size() == 1);
  CHECK(s[1].size() == 3);
  CHECK(s[2].size() == 5);
  CHECK(s[3].size() == 10);
  for (std::size_t k = 1; k < s.size(); ++k) {
    CHECK(std::includes(s[k].begin(), s[k].end(), s[k - 1].begin(), s[k - 1].end()));
  }
  CHECK(std::set<std::size_t>(s[3].begin(), s[3].end()).size() == 10);
  CHECK_THROWS(nested_subsets(10, {0.0}, 1));
  CHECK_THROWS(nested_subsets(10, {1.5}, 1));
}

TEST_CASE("sweeps produce one finite row per setting") {
  const auto c = make_cohort(6, 200);
  SweepData data;
  data.train = {&c.first[0], &c.first[1], &c.first[2], &c.first[3]};
  data.tune = {&c.first[4]};
  const auto pairs = c.pairs();
  data.validation = {pairs[4], pairs[5]};
  SweepOptions opt;
  opt.train.batch_size = 2;
  opt.train.max_epochs = 2;
  opt.train.window_length = 150;
  opt.eval_from = 128;
  const auto t = sweep_signature_size({2, 4}, data, opt);
  CHECK(t.axis == "signature_size");
  REQUIRE(t.rows.size() == 2);
  for (const auto& r : t.rows) {
    CHECK(std::isfinite(r.first_error));
    CHECK(std::isfinite(r.second_error));
    CHECK(r.best_epoch >= 1);
  }
  CHECK(t.rows[1].setting == 4.0);
  const auto f = sweep_train_fraction({0.5, 1.0}, data, opt);
  CHECK(f.axis == "train_fraction");
  CHECK(f.rows.size() == 2);
  CHECK_THROWS(sweep_train_fraction({0.25}, data, opt));  // one person < batch size
  CHECK_THROWS(sweep_signature_size({4, 2}, data, opt));

  const auto dir = testing::tmp_dir("sweep_csv");
  write_sweep_csv(dir / "s.csv", t);
  std::ifstream in(dir / "s.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "signature_size,window1_error,window2_error,best_epoch");
}
