#include "cvsig/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cvsig::ad {

namespace {
// Norm floor for the relative error. Gradients that vanish identically (a
// key bias under softmax shift invariance) are then judged on absolute error.
constexpr double kNormFloor = 1e-6;
}  // namespace

bool GradCheckReport::passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.passed; });
}

double GradCheckReport::worst_relative_error() const {
  double worst = 0.0;
  for (const auto& e : entries) worst = std::max(worst, e.relative_error);
  return worst;
}

GradCheckReport finite_diff_check(Graph& graph, Var loss, double tolerance, double epsilon) {
  if (graph.parameter_set() == nullptr) return {{}, tolerance};
  Gradients analytic = graph.backward(loss);
  return finite_diff_check(graph, loss, analytic, tolerance, epsilon);
}

GradCheckReport finite_diff_check(Graph& graph, Var loss, const Gradients& analytic, double tolerance,
                                  double epsilon) {
  GradCheckReport report{{}, tolerance};
  const ParameterSet* params = graph.parameter_set();
  if (params == nullptr) return report;
  if (graph.value(loss.id).size() != 1) throw std::invalid_argument("finite_diff_check needs a scalar loss");
  if (analytic.size() != params->size()) {
    throw std::invalid_argument("analytic gradients do not match the parameter set");
  }

  for (auto [pid, node] : graph.parameter_nodes()) {
    GradCheckEntry entry;
    entry.name = (*params)[pid].name;
    Tensor& value = graph.mutable_value(node);
    const Tensor& grad = analytic[pid];
    entry.count = value.size();
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double original = value[i];
      value[i] = original + epsilon;
      graph.replay();
      const double up = graph.value(loss.id)[0];
      value[i] = original - epsilon;
      graph.replay();
      const double down = graph.value(loss.id)[0];
      value[i] = original;

      const double numeric = (up - down) / (2.0 * epsilon);
      const double abs_err = std::abs(grad[i] - numeric);
      diff2 += abs_err * abs_err;
      a2 += grad[i] * grad[i];
      n2 += numeric * numeric;
      entry.max_elementwise_relative_error =
          std::max(entry.max_elementwise_relative_error, abs_err / (std::abs(numeric) + 1e-8));
      if (abs_err > entry.max_absolute_error) {
        entry.max_absolute_error = abs_err;
        entry.worst_index = i;
      }
    }
    const double scale = std::sqrt(a2) + std::sqrt(n2);
    entry.relative_error = std::sqrt(diff2) / std::max(scale, kNormFloor);
    entry.passed = entry.relative_error < tolerance;
    report.entries.push_back(std::move(entry));
  }
  graph.replay();
  return report;
}

}  // namespace cvsig::ad
