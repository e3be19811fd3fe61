#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "cvsig/preprocess.hpp"

using namespace cvsig;
using namespace cvsig::data;

namespace {

RawMinuteSeries make_raw(std::vector<std::optional<int>> steps, std::vector<std::optional<double>> hr,
                         std::vector<std::optional<SleepState>> sleep) {
  RawMinuteSeries r;
  r.person_id = "P1";
  r.window_label = "w1";
  r.steps = std::move(steps);
  r.heart_rate = std::move(hr);
  r.sleep_state = std::move(sleep);
  return r;
}

}  // namespace

TEST_CASE("steps transform closed form") {
  CHECK(transform_steps(0) == 0.0);
  CHECK(transform_steps(99) == doctest::Approx(0.921034).epsilon(1e-6));
  CHECK(transform_steps(99) == doctest::Approx(std::log(100.0) / 5.0));
  CHECK_THROWS(transform_steps(-1));
}

TEST_CASE("whitening closed form and round trip") {
  const std::vector<double> hr = {60, 70, 80};
  const auto w = whiten_hr(hr);
  CHECK(w.values[0] == doctest::Approx(-1.224745).epsilon(1e-6));
  CHECK(w.values[1] == doctest::Approx(0.0));
  CHECK(w.values[2] == doctest::Approx(1.224745).epsilon(1e-6));
  CHECK(w.mean == 70.0);

  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(70.0, 12.0);
  std::vector<double> many(5000);
  for (double& v : many) v = n(rng);
  const auto ww = whiten_hr(many);
  double max_err = 0.0;
  for (std::size_t i = 0; i < many.size(); ++i) max_err = std::max(max_err, std::abs(ww.values[i] * ww.std + ww.mean - many[i]));
  CHECK(max_err < 1e-9);

  CHECK_THROWS(whiten_hr(std::vector<double>{70.0}));
  CHECK_THROWS(whiten_hr(std::vector<double>{70.0, 70.0, 70.0}));
}

TEST_CASE("sleep encoding") {
  CHECK(encode_sleep(SleepState::kAwake).asleep == 0.0);
  CHECK(encode_sleep(SleepState::kAsleep).asleep == 1.0);
  CHECK(encode_sleep(SleepState::kRestless).restless == 1.0);
  CHECK(encode_sleep(SleepState::kRestless).asleep == 0.0);
  CHECK(parse_sleep_state("restless") == SleepState::kRestless);
  CHECK_FALSE(parse_sleep_state("dozing").has_value());
}

TEST_CASE("build_channels imputes missing heart rate with the resting awake mean") {
  using S = SleepState;
  // minutes: awake rest 60, awake rest 70, walking 100, missing (awake rest), asleep 50
  auto raw = make_raw({0, 0, 80, 0, 0}, {60.0, 70.0, 100.0, std::nullopt, 50.0},
                      {S::kAwake, S::kAwake, S::kAwake, S::kAwake, S::kAsleep});
  const auto p = build_channels(raw);
  const auto w = whiten_hr(std::vector<double>{60, 70, 100, 50});
  CHECK(p.hr_mean == doctest::Approx(w.mean));
  CHECK(p.loss_mask[3] == 0.0);
  CHECK(p.loss_mask[0] == 1.0);
  CHECK(p.hr[3] == doctest::Approx((65.0 - w.mean) / w.std));
  CHECK(p.activity.at(0, 2) == doctest::Approx(transform_steps(80)));
  CHECK(p.activity.at(1, 4) == 1.0);
  CHECK(p.observed_fraction() == doctest::Approx(0.8));
}

TEST_CASE("build_channels defaults: missing steps are 0 and missing sleep is awake; no rest minutes -> 0") {
  auto raw = make_raw({std::nullopt, 50, 60}, {std::nullopt, 90.0, 110.0}, {std::nullopt, std::nullopt, std::nullopt});
  const auto p = build_channels(raw);
  CHECK(p.activity.at(0, 0) == 0.0);
  CHECK(p.activity.at(1, 0) == 0.0);
  CHECK(p.activity.at(2, 0) == 0.0);
  CHECK(p.hr[0] == 0.0);
}

TEST_CASE("raw series validation") {
  auto raw = make_raw({0, 1}, {60.0}, {SleepState::kAwake, SleepState::kAwake});
  CHECK_THROWS(raw.validate());
  auto neg = make_raw({-3}, {60.0}, {SleepState::kAwake});
  CHECK_THROWS(neg.validate());
}

TEST_CASE("eligibility boundaries") {
  std::vector<int> ten_full(10, 1200);
  CHECK(eligibility_filter(ten_full));
  std::vector<int> nine_full(9, 1440);
  CHECK_FALSE(eligibility_filter(nine_full));
  std::vector<int> short_day(10, 1440);
  short_day[4] = 1199;
  CHECK_FALSE(eligibility_filter(short_day));
  short_day.push_back(1200);
  CHECK(eligibility_filter(short_day));
  CHECK(eligibility_filter(std::vector<int>(3, 1440), 3));
}

TEST_CASE("reported minutes per day counts minutes with steps") {
  RawMinuteSeries r;
  r.steps.assign(2 * kMinutesPerDay, 0);
  r.heart_rate.assign(r.steps.size(), 60.0);
  r.sleep_state.assign(r.steps.size(), SleepState::kAwake);
  for (int t = 0; t < 300; ++t) r.steps[std::size_t(t)] = std::nullopt;
  const auto d = reported_minutes_per_day(r);
  REQUIRE(d.size() == 2);
  CHECK(d[0] == 1140);
  CHECK(d[1] == 1440);
}

TEST_CASE("split assignment") {
  std::vector<PersonWindows> persons;
  for (int i = 0; i < 50; ++i) {
    PersonWindows p{"P" + std::to_string(100 + i), {"a"}};
    if (i % 5 == 0) p.windows.push_back("b");
    persons.push_back(p);
  }
  const auto s1 = assign_splits(persons, 9);
  auto reversed = persons;
  std::reverse(reversed.begin(), reversed.end());
  CHECK(assign_splits(reversed, 9) == s1);  // input order does not matter
  std::size_t train = 0, tune = 0, val = 0;
  for (const auto& [id, s] : s1) {
    train += s == Split::kTrain;
    tune += s == Split::kTune;
    val += s == Split::kValidation;
  }
  CHECK(val == 10);
  CHECK(train == 32);  // round(0.8 * 40)
  CHECK(tune == 8);
  CHECK(s1.at("P100") == Split::kValidation);
  // the same window twice does not make a validation person
  CHECK(assign_splits({{"X", {"a", "a"}}}, 1).at("X") != Split::kValidation);
}

TEST_CASE("slice keeps whitening statistics") {
  auto raw = make_raw({0, 10, 20, 30}, {60.0, 70.0, 80.0, 90.0},
                      {SleepState::kAwake, SleepState::kAwake, SleepState::kAwake, SleepState::kAwake});
  const auto p = build_channels(raw);
  const auto s = p.slice(1, 2);
  CHECK(s.length() == 2);
  CHECK(s.hr_mean == p.hr_mean);
  CHECK(s.hr[0] == p.hr[1]);
  CHECK(s.activity.at(0, 1) == p.activity.at(0, 2));
  CHECK_THROWS(p.slice(3, 2));
}

TEST_CASE("resting heart rate is the mean asleep heart rate") {
  RawMinuteSeries r;
  for (int t = 0; t < 100; ++t) {
    r.steps.push_back(0);
    const bool asleep = t < 40;
    r.sleep_state.push_back(asleep ? SleepState::kAsleep : SleepState::kAwake);
    r.heart_rate.push_back(asleep ? 50.0 + (t % 2) : 80.0);
  }
  CHECK(compute_rhr(r) == doctest::Approx(50.5));
  r.sleep_state.assign(100, SleepState::kAwake);
  CHECK_THROWS(compute_rhr(r));
}
