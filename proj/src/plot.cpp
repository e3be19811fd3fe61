#include "cvsig/plot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "cvsig/csv.hpp"

namespace cvsig::plot {

namespace {

constexpr double kWidth = 1200;
constexpr double kHeight = 620;
constexpr double kLeft = 70;
constexpr double kRight = 20;
constexpr double kTopY0 = 50, kTopY1 = 240;
constexpr double kBotY0 = 290, kBotY1 = 570;

std::string num(double v) { return csv::format_fixed(v, 2); }

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '&':
        out += "&amp;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

struct Axis {
  double lo, hi, y0, y1;
  double map(double v) const { return y1 - (v - lo) / (hi - lo) * (y1 - y0); }
};

double x_of(std::size_t i, std::size_t n) {
  const double span = kWidth - kLeft - kRight;
  return n <= 1 ? kLeft : kLeft + span * double(i) / double(n - 1);
}

std::string polyline(const std::vector<double>& v, const Axis& axis, const char* id, const char* color, double width) {
  std::ostringstream out;
  out << "<polyline id=\"" << id << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << width
      << "\" points=\"";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out << ' ';
    out << num(x_of(i, v.size())) << ',' << num(axis.map(v[i]));
  }
  out << "\"/>\n";
  return out.str();
}

// Observed values as a path broken at missing minutes.
std::string observed_path(const std::vector<double>& v, const Axis& axis) {
  std::ostringstream out;
  out << "<path id=\"observed\" fill=\"none\" stroke=\"#222222\" stroke-width=\"1\" d=\"";
  bool pen = false;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (std::isnan(v[i])) {
      pen = false;
      continue;
    }
    out << (pen ? " L" : " M") << num(x_of(i, v.size())) << ',' << num(axis.map(v[i]));
    pen = true;
  }
  out << "\"/>\n";
  return out.str();
}

void shade_runs(std::ostringstream& out, const std::vector<double>& flag, const char* cls, const char* color) {
  const std::size_t n = flag.size();
  const double step = n <= 1 ? 0.0 : (kWidth - kLeft - kRight) / double(n - 1);
  for (std::size_t i = 0; i < n;) {
    if (flag[i] == 0.0) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && flag[j] != 0.0) ++j;
    const double x0 = x_of(i, n) - step / 2;
    const double w = std::max(step * double(j - i), 1.0);
    out << "<rect class=\"" << cls << "\" x=\"" << num(std::max(x0, kLeft)) << "\" y=\"" << num(kTopY0)
        << "\" width=\"" << num(w) << "\" height=\"" << num(kTopY1 - kTopY0) << "\" fill=\"" << color
        << "\" fill-opacity=\"0.5\"/>\n";
    i = j;
  }
}

void frame(std::ostringstream& out, double y0, double y1, const Axis& axis, const std::string& label) {
  out << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(y0) << "\" width=\"" << num(kWidth - kLeft - kRight)
      << "\" height=\"" << num(y1 - y0) << "\" fill=\"none\" stroke=\"#888888\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = axis.lo + (axis.hi - axis.lo) * k / 4.0;
    out << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(axis.map(v) + 4)
        << "\" font-size=\"11\" text-anchor=\"end\">" << num(v) << "</text>\n";
  }
  out << "<text x=\"14\" y=\"" << num((y0 + y1) / 2) << "\" font-size=\"12\" transform=\"rotate(-90 14 "
      << num((y0 + y1) / 2) << ")\" text-anchor=\"middle\">" << escape(label) << "</text>\n";
}

}  // namespace

void ReconstructionPlot::validate() const {
  const std::size_t n = steps.size();
  if (n == 0) throw std::invalid_argument("plot: empty series");
  if (asleep.size() != n || restless.size() != n || observed.size() != n || own_prediction.size() != n ||
      other_prediction.size() != n) {
    throw std::invalid_argument("plot: series lengths differ");
  }
}

std::string render_svg(const ReconstructionPlot& plot) {
  plot.validate();
  const std::size_t n = plot.steps.size();

  double smax = 0.0;
  for (double s : plot.steps) smax = std::max(smax, s);
  const Axis top{0.0, std::max(smax, 0.1) * 1.05, kTopY0, kTopY1};

  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto* series : {&plot.observed, &plot.own_prediction, &plot.other_prediction}) {
    for (double v : *series) {
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
  }
  if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
  if (hi - lo < 1e-6) hi = lo + 1.0;
  const double pad = 0.05 * (hi - lo);
  const Axis bottom{lo - pad, hi + pad, kBotY0, kBotY1};

  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << num(kLeft) << "\" y=\"24\" font-size=\"15\">" << escape(plot.title) << "</text>\n";

  out << "<g id=\"activity-panel\">\n";
  shade_runs(out, plot.asleep, "asleep", "#9db4d8");
  shade_runs(out, plot.restless, "restless", "#e3b35a");
  out << polyline(plot.steps, top, "steps", "#2a7f3f", 1.0);
  frame(out, kTopY0, kTopY1, top, "steps (transformed)");
  out << "</g>\n";

  out << "<g id=\"heart-rate-panel\">\n";
  out << observed_path(plot.observed, bottom);
  out << polyline(plot.own_prediction, bottom, "prediction-own", "#d62728", 1.2);
  out << polyline(plot.other_prediction, bottom, "prediction-other", "#1f77b4", 1.2);
  frame(out, kBotY0, kBotY1, bottom, plot.value_label);
  out << "</g>\n";

  // hour ticks along the shared time axis
  const std::size_t tick = n > 2880 ? 360 : 60;
  for (std::size_t m = 0; m < n; m += tick) {
    const std::size_t minute = plot.start_minute + m;
    out << "<text x=\"" << num(x_of(m, n)) << "\" y=\"" << num(kBotY1 + 16)
        << "\" font-size=\"10\" text-anchor=\"middle\">" << minute / 60 << "h</text>\n";
  }

  const double ly = kHeight - 14;
  const struct {
    const char* color;
    std::string label;
  } legend[] = {{"#222222", "observed"}, {"#d62728", plot.own_label}, {"#1f77b4", plot.other_label}};
  double lx = kLeft;
  for (const auto& item : legend) {
    out << "<line x1=\"" << num(lx) << "\" y1=\"" << num(ly - 4) << "\" x2=\"" << num(lx + 24) << "\" y2=\""
        << num(ly - 4) << "\" stroke=\"" << item.color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << num(lx + 30) << "\" y=\"" << num(ly) << "\" font-size=\"12\">" << escape(item.label)
        << "</text>\n";
    lx += 60 + 7.0 * double(item.label.size());
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace cvsig::plot
