#include "cvsig/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "cvsig/csv.hpp"

namespace cvsig::config {

namespace {

std::uint64_t parse_u64(const std::string& text, const std::string& where) {
  const auto v = csv::parse_int(csv::trim(text), where);
  if (v < 0) throw std::invalid_argument(where + ": must be non-negative, got " + text);
  return std::uint64_t(v);
}

std::size_t parse_size(const std::string& text, const std::string& where) {
  return std::size_t(parse_u64(text, where));
}

double parse_real(const std::string& text, const std::string& where) {
  return csv::parse_double(csv::trim(text), where);
}

bool parse_bool(const std::string& text, const std::string& where) {
  const auto t = csv::trim(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw std::invalid_argument(where + ": expected a boolean, got '" + text + "'");
}

std::vector<std::string> parse_list(const std::string& text) {
  std::vector<std::string_view> cells;
  csv::split(text, cells);
  std::vector<std::string> out;
  for (auto c : cells) {
    if (!csv::trim(c).empty()) out.emplace_back(csv::trim(c));
  }
  return out;
}

template <class T, class F>
std::vector<T> map_list(const std::string& text, F f) {
  std::vector<T> out;
  for (const auto& item : parse_list(text)) out.push_back(f(item));
  return out;
}

template <class T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    if constexpr (std::is_floating_point_v<T>) {
      out += csv::format_double(values[i]);
    } else if constexpr (std::is_arithmetic_v<T>) {
      out += std::to_string(values[i]);
    } else {
      out += values[i];
    }
  }
  return out;
}

struct Field {
  const char* section;
  const char* key;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define CVSIG_SIZE(sec, k, member)                                                                   \
  Field {                                                                                            \
    sec, k, [](RunConfig& c, const std::string& v, const std::string& w) { c.member = parse_size(v, w); }, \
        [](const RunConfig& c) { return std::to_string(c.member); }                                  \
  }
#define CVSIG_REAL(sec, k, member)                                                                   \
  Field {                                                                                            \
    sec, k, [](RunConfig& c, const std::string& v, const std::string& w) { c.member = parse_real(v, w); }, \
        [](const RunConfig& c) { return csv::format_double(c.member); }                              \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"run", "seed", [](RunConfig& c, const std::string& v, const std::string& w) { c.set_seed(parse_u64(v, w)); },
       [](const RunConfig& c) { return std::to_string(c.seed); }},
      {"run", "output_dir", [](RunConfig& c, const std::string& v, const std::string&) { c.output_dir = v; },
       [](const RunConfig& c) { return c.output_dir.string(); }},
      {"run", "data_dir", [](RunConfig& c, const std::string& v, const std::string&) { c.data_dir = v; },
       [](const RunConfig& c) { return c.data_dir.string(); }},

      CVSIG_SIZE("simulate", "n_persons", sim.n_persons),
      CVSIG_SIZE("simulate", "days", sim.days),
      {"simulate", "windows",
       [](RunConfig& c, const std::string& v, const std::string&) { c.sim.windows = parse_list(v); },
       [](const RunConfig& c) { return join(c.sim.windows); }},
      CVSIG_REAL("simulate", "missing_rate", sim.missing_rate),
      CVSIG_REAL("simulate", "single_window_fraction", sim.single_window_fraction),

      CVSIG_SIZE("preprocess", "min_eligible_days", min_eligible_days),

      CVSIG_SIZE("model", "signature_size", signature_size),

      CVSIG_REAL("train", "learning_rate", train.adam.alpha),
      CVSIG_REAL("train", "beta1", train.adam.beta1),
      CVSIG_REAL("train", "beta2", train.adam.beta2),
      CVSIG_REAL("train", "epsilon", train.adam.epsilon),
      CVSIG_SIZE("train", "batch_size", train.batch_size),
      CVSIG_SIZE("train", "max_epochs", train.max_epochs),
      CVSIG_SIZE("train", "patience", train.patience),
      CVSIG_SIZE("train", "window_length", train.window_length),
      CVSIG_SIZE("train", "windows_per_person", train.windows_per_person),
      CVSIG_SIZE("train", "tune_minutes", train.tune_minutes),
      {"train", "log_wall_time",
       [](RunConfig& c, const std::string& v, const std::string& w) { c.log_wall_time = parse_bool(v, w); },
       [](const RunConfig& c) { return std::string(c.log_wall_time ? "true" : "false"); }},

      CVSIG_SIZE("baselines", "lag", baselines.lag),
      CVSIG_SIZE("baselines", "gbt_rounds", baselines.gbt.n_rounds),
      CVSIG_SIZE("baselines", "gbt_max_depth", baselines.gbt.max_depth),
      CVSIG_REAL("baselines", "gbt_learning_rate", baselines.gbt.learning_rate),
      CVSIG_SIZE("baselines", "gbt_min_samples_leaf", baselines.gbt.min_samples_leaf),
      CVSIG_SIZE("baselines", "population_max_rows", baselines.population_max_rows),

      CVSIG_SIZE("eval", "eval_from", eval_from),
      CVSIG_SIZE("eval", "downstream_repeats", downstream_repeats),
      {"eval", "checkpoint", [](RunConfig& c, const std::string& v, const std::string&) { c.checkpoint = v; },
       [](const RunConfig& c) { return c.checkpoint.string(); }},

      {"sweep", "axis", [](RunConfig& c, const std::string& v, const std::string&) { c.sweep_axis = v; },
       [](const RunConfig& c) { return c.sweep_axis; }},
      {"sweep", "signature_sizes",
       [](RunConfig& c, const std::string& v, const std::string& w) {
         c.signature_sizes = map_list<std::size_t>(v, [&](const std::string& s) { return parse_size(s, w); });
       },
       [](const RunConfig& c) { return join(c.signature_sizes); }},
      {"sweep", "train_fractions",
       [](RunConfig& c, const std::string& v, const std::string& w) {
         c.train_fractions = map_list<double>(v, [&](const std::string& s) { return parse_real(s, w); });
       },
       [](const RunConfig& c) { return join(c.train_fractions); }},

      {"plot", "person_id", [](RunConfig& c, const std::string& v, const std::string&) { c.plot_person = v; },
       [](const RunConfig& c) { return c.plot_person; }},
      {"plot", "window", [](RunConfig& c, const std::string& v, const std::string&) { c.plot_window = v; },
       [](const RunConfig& c) { return c.plot_window; }},
      CVSIG_SIZE("plot", "start_minute", plot_start),
      CVSIG_SIZE("plot", "minutes", plot_minutes),
  };
  return table;
}

#undef CVSIG_SIZE
#undef CVSIG_REAL

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t purpose) {
  // splitmix64 finaliser over (seed, purpose)
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (purpose + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

void RunConfig::set_seed(std::uint64_t value) {
  seed = value;
  sim.seed = value;
  train.seed = derive_seed(value, kTrainSeed);
  baselines.seed = derive_seed(value, kBaselineSeed);
}

void RunConfig::validate() const {
  sim.validate();
  train.validate();
  baselines.gbt.validate();
  if (sim.windows.size() != 2) throw std::invalid_argument("config: exactly two windows are required");
  if (min_eligible_days < 1) throw std::invalid_argument("config: min_eligible_days must be >= 1");
  if (min_eligible_days > sim.days) {
    throw std::invalid_argument("config: min_eligible_days (" + std::to_string(min_eligible_days) +
                                ") exceeds the simulated days (" + std::to_string(sim.days) + ")");
  }
  if (signature_size < 1) throw std::invalid_argument("config: signature_size must be >= 1");
  if (baselines.lag < 1) throw std::invalid_argument("config: baselines lag must be >= 1");
  if (eval_from >= sim.minutes_per_window()) throw std::invalid_argument("config: eval_from beyond the window");
  if (train.window_length > sim.minutes_per_window()) {
    throw std::invalid_argument("config: training window longer than the simulated window");
  }
  if (downstream_repeats < 1) throw std::invalid_argument("config: downstream_repeats must be >= 1");
  if (sweep_axis != "signature_size" && sweep_axis != "train_fraction") {
    throw std::invalid_argument("config: unknown sweep axis '" + sweep_axis + "'");
  }
  if (signature_sizes.empty() || train_fractions.empty()) throw std::invalid_argument("config: empty sweep list");
  for (std::size_t s : signature_sizes) {
    if (s < 1) throw std::invalid_argument("config: signature sizes must be >= 1");
  }
  for (double f : train_fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw std::invalid_argument("config: train fractions must be in (0, 1]");
  }
  if (plot_minutes < 1) throw std::invalid_argument("config: plot minutes must be >= 1");
  if (output_dir.empty()) throw std::invalid_argument("config: output_dir is empty");
}

std::filesystem::path RunConfig::resolved_data_dir() const {
  return data_dir.empty() ? output_dir / "data" : data_dir;
}

std::filesystem::path RunConfig::resolved_checkpoint() const {
  return checkpoint.empty() ? output_dir / "model" / "checkpoint.json" : checkpoint;
}

RunConfig parse_config(std::string_view text) {
  boost::property_tree::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.message() + " at line " + std::to_string(e.line()));
  }
  RunConfig cfg;
  cfg.set_seed(cfg.seed);
  // seed first so that any later key is not overwritten by the propagation
  if (auto run = tree.get_child_optional("run")) {
    if (auto s = run->get_optional<std::string>("seed")) cfg.set_seed(parse_u64(*s, "run.seed"));
  }
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw std::invalid_argument("config: key '" + section + "' must sit inside a [section]");
    for (const auto& [key, value] : body) {
      const std::string where = section + "." + key;
      if (where == "run.seed") continue;
      bool known = false;
      for (const auto& f : fields()) {
        if (section == f.section && key == f.key) {
          f.set(cfg, value.data(), where);
          known = true;
          break;
        }
      }
      if (!known) throw std::invalid_argument("config: unknown key '" + where + "'");
    }
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string to_ini(const RunConfig& config) {
  std::string out;
  std::string current;
  for (const auto& f : fields()) {
    if (current != f.section) {
      if (!current.empty()) out += '\n';
      current = f.section;
      out += "[" + current + "]\n";
    }
    out += std::string(f.key) + " = " + f.get(config) + "\n";
  }
  return out;
}

}  // namespace cvsig::config
