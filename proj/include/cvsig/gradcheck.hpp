#pragma once

#include <string>
#include <vector>

#include "cvsig/autodiff.hpp"

namespace cvsig::ad {

struct GradCheckEntry {
  std::string name;
  std::size_t count = 0;
  // ||analytic - numeric|| / max(||analytic|| + ||numeric||, 1e-6) over the
  // whole parameter tensor; decides `passed`.
  double relative_error = 0.0;
  // Per-element |a - n| / (|n| + 1e-8). Diagnostic only: near-zero entries
  // are dominated by the O(1e-10) rounding noise of central differences.
  double max_elementwise_relative_error = 0.0;
  double max_absolute_error = 0.0;
  std::size_t worst_index = 0;  // largest absolute error
  bool passed = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tolerance = 0.0;

  bool passed() const;
  double worst_relative_error() const;
};

// Compares backward() against central differences by perturbing each
// parameter leaf in place and replaying the tape. Leaves the graph values as
// they were on entry.
GradCheckReport finite_diff_check(Graph& graph, Var loss, double tolerance, double epsilon = 1e-5);

// Same, against caller-supplied analytic gradients (aligned with the graph's
// parameter set).
GradCheckReport finite_diff_check(Graph& graph, Var loss, const Gradients& analytic, double tolerance,
                                  double epsilon = 1e-5);

}  // namespace cvsig::ad
