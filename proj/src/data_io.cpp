#include "cvsig/data_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <string>
#include <string_view>

#include "cvsig/csv.hpp"

namespace cvsig::data {

namespace {

constexpr std::string_view kMinuteHeader = "person_id,window_label,minute_index,steps,heart_rate,sleep_state";
constexpr std::string_view kPersonsHeader = "person_id,age,bmi,rhr,split";

std::vector<double> channel_row(const Tensor& t, std::size_t row, std::size_t n) {
  return {t.raw() + row * n, t.raw() + (row + 1) * n};
}

}  // namespace

void write_minute_csv(const std::filesystem::path& path, const std::vector<RawMinuteSeries>& series) {
  std::ofstream out = csv::open_for_write(path);
  out << kMinuteHeader << '\n';
  std::string line;
  for (const auto& s : series) {
    s.validate();
    for (std::size_t t = 0; t < s.length(); ++t) {
      line.clear();
      line += s.person_id;
      line += ',';
      line += s.window_label;
      line += ',';
      line += std::to_string(t);
      line += ',';
      if (s.steps[t]) line += std::to_string(*s.steps[t]);
      line += ',';
      if (s.heart_rate[t]) line += csv::format_fixed(*s.heart_rate[t], 4);
      line += ',';
      if (s.sleep_state[t]) line += to_string(*s.sleep_state[t]);
      line += '\n';
      out << line;
    }
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<RawMinuteSeries> read_minute_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || csv::trim(line) != kMinuteHeader) {
    throw std::runtime_error(path.string() + ": expected header '" + std::string(kMinuteHeader) + "'");
  }

  std::vector<RawMinuteSeries> out;
  std::size_t line_no = 1;
  std::vector<std::string_view> cells;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = csv::trim(line);
    if (row.empty()) continue;
    csv::split(row, cells);
    const auto where = [&] { return path.string() + ":" + std::to_string(line_no); };
    if (cells.size() != 6) throw std::runtime_error(where() + ": expected 6 columns");

    if (out.empty() || out.back().person_id != cells[0] || out.back().window_label != cells[1]) {
      out.push_back({});
      out.back().person_id = std::string(cells[0]);
      out.back().window_label = std::string(cells[1]);
    }
    RawMinuteSeries& s = out.back();
    if (csv::parse_int(cells[2], where()) != std::int64_t(s.length())) {
      throw std::runtime_error(where() + ": minute_index out of sequence");
    }
    s.steps.push_back(cells[3].empty() ? std::nullopt
                                       : std::optional<int>(int(csv::parse_int(cells[3], where()))));
    s.heart_rate.push_back(cells[4].empty() ? std::nullopt
                                            : std::optional<double>(csv::parse_double(cells[4], where())));
    if (cells[5].empty()) {
      s.sleep_state.push_back(std::nullopt);
    } else {
      auto state = parse_sleep_state(cells[5]);
      if (!state) throw std::runtime_error(where() + ": unknown sleep state '" + std::string(cells[5]) + "'");
      s.sleep_state.push_back(state);
    }
  }
  for (const auto& s : out) s.validate();
  return out;
}

void write_persons_csv(const std::filesystem::path& path, const std::vector<PersonMeta>& persons) {
  std::ofstream out = csv::open_for_write(path);
  out << kPersonsHeader << '\n';
  for (const auto& p : persons) {
    out << p.person_id << ',' << csv::format_double(p.age) << ',' << csv::format_double(p.bmi) << ','
        << csv::format_double(p.rhr) << ',' << to_string(p.split) << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<PersonMeta> read_persons_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || csv::trim(line) != kPersonsHeader) {
    throw std::runtime_error(path.string() + ": expected header '" + std::string(kPersonsHeader) + "'");
  }
  std::vector<PersonMeta> out;
  std::vector<std::string_view> cells;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = csv::trim(line);
    if (row.empty()) continue;
    csv::split(row, cells);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (cells.size() != 5) throw std::runtime_error(where + ": expected 5 columns");
    PersonMeta p;
    p.person_id = std::string(cells[0]);
    p.age = csv::parse_double(cells[1], where);
    p.bmi = csv::parse_double(cells[2], where);
    p.rhr = csv::parse_double(cells[3], where);
    p.split = parse_split(cells[4]);
    if (!(p.age > 0.0) || !(p.bmi > 0.0)) throw std::runtime_error(where + ": age and bmi must be positive");
    out.push_back(std::move(p));
  }
  return out;
}

void write_preprocessed_json(const std::filesystem::path& path, const std::vector<PreprocessedSeries>& series) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& s : series) {
    const std::size_t n = s.length();
    doc.push_back({{"person_id", s.person_id},
                   {"window_label", s.window_label},
                   {"hr_mean", s.hr_mean},
                   {"hr_std", s.hr_std},
                   {"steps", channel_row(s.activity, 0, n)},
                   {"asleep", channel_row(s.activity, 1, n)},
                   {"restless", channel_row(s.activity, 2, n)},
                   {"hr", channel_row(s.hr, 0, n)},
                   {"loss_mask", channel_row(s.loss_mask, 0, n)}});
  }
  std::ofstream out = csv::open_for_write(path);
  out << doc.dump() << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<PreprocessedSeries> read_preprocessed_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  std::vector<PreprocessedSeries> out;
  for (const auto& item : doc) {
    PreprocessedSeries s;
    s.person_id = item.at("person_id").get<std::string>();
    s.window_label = item.at("window_label").get<std::string>();
    s.hr_mean = item.at("hr_mean").get<double>();
    s.hr_std = item.at("hr_std").get<double>();
    auto steps = item.at("steps").get<std::vector<double>>();
    auto asleep = item.at("asleep").get<std::vector<double>>();
    auto restless = item.at("restless").get<std::vector<double>>();
    auto hr = item.at("hr").get<std::vector<double>>();
    auto mask = item.at("loss_mask").get<std::vector<double>>();
    const std::size_t n = steps.size();
    if (asleep.size() != n || restless.size() != n || hr.size() != n || mask.size() != n || n == 0) {
      throw std::runtime_error(path.string() + ": inconsistent channel lengths for " + s.person_id);
    }
    std::vector<double> activity;
    activity.reserve(3 * n);
    activity.insert(activity.end(), steps.begin(), steps.end());
    activity.insert(activity.end(), asleep.begin(), asleep.end());
    activity.insert(activity.end(), restless.begin(), restless.end());
    s.activity = Tensor({kActivityChannels, n}, std::move(activity));
    s.hr = Tensor({1, n}, std::move(hr));
    s.loss_mask = Tensor({n}, std::move(mask));
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace cvsig::data
