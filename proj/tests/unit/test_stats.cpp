#include <doctest.h>

#include <cmath>
#include <random>

#include "cvsig/stats.hpp"

using namespace cvsig::stats;

namespace {

// Brute force over all 2^n sign assignments of the midranks.
std::pair<double, double> enumerate_wilcoxon(const std::vector<double>& d) {
  std::vector<double> nz, mag;
  for (double x : d) {
    if (x != 0.0) nz.push_back(x);
  }
  for (double x : nz) mag.push_back(std::abs(x));
  const auto r = midranks(mag);
  double v = 0.0;
  for (std::size_t i = 0; i < nz.size(); ++i) v += nz[i] > 0 ? r[i] : 0.0;
  const std::size_t n = nz.size();
  std::size_t hits = 0;
  for (std::size_t mask = 0; mask < (std::size_t(1) << n); ++mask) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += (mask >> i & 1) ? r[i] : 0.0;
    hits += s >= v - 1e-9;
  }
  return {v, double(hits) / double(std::size_t(1) << n)};
}

double auc_oracle(const std::vector<double>& s, const std::vector<int>& y) {
  double num = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] != 1 || y[j] != 0) continue;
      num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      pairs += 1.0;
    }
  }
  return num / pairs;
}

}  // namespace

TEST_CASE("midranks and median") {
  const std::vector<double> v = {3.0, 1.0, 3.0, 2.0};
  CHECK(midranks(v) == std::vector<double>{3.5, 1.0, 3.5, 2.0});
  CHECK(median({5.0, 1.0, 3.0}) == 3.0);
  CHECK(median({4.0, 1.0, 3.0, 2.0}) == 2.5);
  CHECK_THROWS(median({}));
}

TEST_CASE("three positive differences give V = 6 and p = 1/8") {
  const std::vector<double> d = {1.0, 2.0, 3.0};
  const auto r = wilcoxon_signed_rank(d);
  CHECK(r.v == 6.0);
  CHECK(r.p_value == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(r.exact);
  CHECK(r.n == 3);
}

TEST_CASE("exact p matches enumeration for n <= 10") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> small(-4, 6);
  std::normal_distribution<double> g(0.3, 1.0);
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t n = 1 + std::size_t(rep % 10);
    std::vector<double> d(n);
    // half the instances use integers so ties and zeros appear
    for (double& x : d) x = rep % 2 ? double(small(rng)) : g(rng);
    if (std::all_of(d.begin(), d.end(), [](double x) { return x == 0.0; })) continue;
    const auto [v, p] = enumerate_wilcoxon(d);
    const auto r = wilcoxon_signed_rank(d, PMethod::kExact);
    CHECK(r.v == v);
    CHECK(r.p_value == doctest::Approx(p).epsilon(1e-12));
  }
}

TEST_CASE("normal approximation tracks the exact p") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.2, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> d(25);
    for (double& x : d) x = g(rng);
    const auto e = wilcoxon_signed_rank(d, PMethod::kExact);
    const auto a = wilcoxon_signed_rank(d, PMethod::kNormal);
    CHECK(e.v == a.v);
    CHECK_FALSE(a.exact);
    CHECK(std::abs(e.p_value - a.p_value) < 0.02);
  }
  std::vector<double> big(100, 1.0);
  const auto r = wilcoxon_signed_rank(big);
  CHECK_FALSE(r.exact);
  CHECK(r.p_value < 1e-15);
}

TEST_CASE("zero differences are dropped and all-zero input is an error") {
  const std::vector<double> d = {0.0, 1.0, 0.0, 2.0, 3.0};
  const auto r = wilcoxon_signed_rank(d);
  CHECK(r.n == 3);
  CHECK(r.v == 6.0);
  CHECK_THROWS(wilcoxon_signed_rank(std::vector<double>{0.0, 0.0}));
  const std::vector<double> neg = {-1.0, -2.0, -3.0};
  CHECK(wilcoxon_signed_rank(neg).p_value == 1.0);
}

TEST_CASE("auc matches the pairwise oracle with ties") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> score(0, 5), label(0, 1);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 4 + std::size_t(rep % 30);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = score(rng);
      y[i] = label(rng);
    }
    y[0] = 0;
    y[1] = 1;
    CHECK(auc(s, y) == auc_oracle(s, y));
  }
}

TEST_CASE("auc properties") {
  const std::vector<double> s = {0.1, 0.4, 0.35, 0.8};
  const std::vector<int> y = {0, 0, 1, 1};
  CHECK(auc(s, y) == 0.75);
  const std::vector<double> flipped = {-0.1, -0.4, -0.35, -0.8};
  CHECK(auc(flipped, y) == 0.25);
  CHECK(auc(std::vector<double>(4, 1.0), y) == 0.5);
  CHECK_THROWS(auc(s, std::vector<int>{1, 1, 1, 1}));
  CHECK_THROWS(auc(s, std::vector<int>{0, 1, 2, 1}));
  CHECK_THROWS(auc(s, std::vector<int>{0, 1}));
}
