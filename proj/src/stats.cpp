#include "cvsig/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cvsig::stats {

std::vector<double> midranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = 0.5 * double(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace {

// P(V >= v) under the sign-flip null, counting subsets of the doubled
// (integer) midranks.
double exact_upper_p(const std::vector<double>& ranks, double v) {
  std::vector<std::size_t> twice(ranks.size());
  std::size_t total = 0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    twice[i] = std::size_t(std::llround(2.0 * ranks[i]));
    total += twice[i];
  }
  std::vector<double> ways(total + 1, 0.0);
  ways[0] = 1.0;
  std::size_t reach = 0;
  for (std::size_t r : twice) {
    for (std::size_t s = reach + 1; s-- > 0;) {
      if (ways[s] != 0.0) ways[s + r] += ways[s];
    }
    reach += r;
  }
  const std::size_t target = std::size_t(std::llround(2.0 * v));
  double upper = 0.0;
  for (std::size_t s = target; s <= total; ++s) upper += ways[s];
  return upper / std::ldexp(1.0, int(ranks.size()));
}

}  // namespace

WilcoxonResult wilcoxon_signed_rank(std::span<const double> differences, PMethod method) {
  std::vector<double> d;
  for (double x : differences) {
    if (!std::isfinite(x)) throw std::invalid_argument("wilcoxon: non-finite difference");
    if (x != 0.0) d.push_back(x);
  }
  if (d.empty()) throw std::invalid_argument("wilcoxon: all differences are zero");
  const std::size_t n = d.size();
  std::vector<double> mag(n);
  for (std::size_t i = 0; i < n; ++i) mag[i] = std::abs(d[i]);
  const auto ranks = midranks(mag);

  WilcoxonResult res;
  res.n = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (d[i] > 0.0) res.v += ranks[i];
  }

  const bool exact = method == PMethod::kExact || (method == PMethod::kAuto && n <= kExactMaxN);
  if (exact) {
    if (n > 62) throw std::invalid_argument("wilcoxon: exact p limited to n <= 62");
    res.exact = true;
    res.p_value = exact_upper_p(ranks, res.v);
    return res;
  }

  const double dn = double(n);
  double tie_term = 0.0;
  auto sorted = mag;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && sorted[j + 1] == sorted[i]) ++j;
    const double t = double(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  const double mean = dn * (dn + 1.0) / 4.0;
  const double var = dn * (dn + 1.0) * (2.0 * dn + 1.0) / 24.0 - tie_term / 48.0;
  const double z = (res.v - mean - 0.5) / std::sqrt(var);
  res.p_value = 0.5 * std::erfc(z / std::sqrt(2.0));
  return res;
}

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auc: scores and labels differ in length");
  double n_pos = 0.0, n_neg = 0.0;
  for (int y : labels) {
    if (y == 1) {
      n_pos += 1.0;
    } else if (y == 0) {
      n_neg += 1.0;
    } else {
      throw std::invalid_argument("auc: labels must be 0 or 1");
    }
  }
  if (n_pos == 0.0 || n_neg == 0.0) throw std::invalid_argument("auc: both classes must be present");
  const auto ranks = midranks(scores);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    if (labels[i] == 1) rank_sum += ranks[i];
  }
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

}  // namespace cvsig::stats
