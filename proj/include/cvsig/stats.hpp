#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cvsig::stats {

// 1-based ranks; tied values share the mean of their positions.
std::vector<double> midranks(std::span<const double> values);

double median(std::vector<double> values);

enum class PMethod { kAuto, kExact, kNormal };

struct WilcoxonResult {
  double v = 0.0;        // sum of ranks of the positive differences
  double p_value = 1.0;  // one-sided, alternative: differences tend to be positive
  std::size_t n = 0;     // non-zero differences used
  bool exact = false;
};

inline constexpr std::size_t kExactMaxN = 25;

// Zero differences are dropped. kAuto enumerates exactly when n <= 25 and
// otherwise uses the continuity-corrected normal approximation with the tie
// correction of the variance.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> differences, PMethod method = PMethod::kAuto);

// Mann-Whitney AUC; ties count one half. labels are 0 or 1.
double auc(std::span<const double> scores, std::span<const int> labels);

}  // namespace cvsig::stats
