#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cvsig/config.hpp"
#include "cvsig/gbt.hpp"
#include "cvsig/model.hpp"
#include "cvsig/pipeline.hpp"
#include "cvsig/preprocess.hpp"
#include "cvsig/stats.hpp"
#include "cvsig/synthetic.hpp"

namespace py = pybind11;
using namespace cvsig;

namespace {

std::vector<std::vector<double>> rows_of(const Tensor& t) {
  std::vector<std::vector<double>> out(t.dim(0));
  for (std::size_t r = 0; r < t.dim(0); ++r) out[r].assign(t.raw() + r * t.dim(1), t.raw() + (r + 1) * t.dim(1));
  return out;
}

Tensor matrix_from(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw std::invalid_argument("empty feature matrix");
  Tensor t({rows.size(), rows[0].size()});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows[0].size()) throw std::invalid_argument("ragged feature matrix");
    std::copy(rows[r].begin(), rows[r].end(), t.raw() + r * rows[0].size());
  }
  return t;
}

data::RawMinuteSeries make_raw(const std::string& person_id, const std::string& window,
                               const std::vector<std::optional<int>>& steps,
                               const std::vector<std::optional<double>>& hr,
                               const std::vector<std::optional<std::string>>& sleep) {
  data::RawMinuteSeries raw;
  raw.person_id = person_id;
  raw.window_label = window;
  raw.steps = steps;
  raw.heart_rate = hr;
  for (const auto& s : sleep) {
    if (!s) {
      raw.sleep_state.push_back(std::nullopt);
      continue;
    }
    auto parsed = data::parse_sleep_state(*s);
    if (!parsed) throw std::invalid_argument("unknown sleep state '" + *s + "'");
    raw.sleep_state.push_back(parsed);
  }
  raw.validate();
  return raw;
}

config::RunConfig make_config(const std::optional<std::filesystem::path>& path, std::optional<std::uint64_t> seed,
                              const std::optional<std::filesystem::path>& out) {
  config::RunConfig cfg = path ? config::load_config(*path) : config::RunConfig{};
  if (seed) cfg.set_seed(*seed);
  if (out) cfg.output_dir = *out;
  cfg.validate();
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_cvsig, m) {
  m.doc() = "Cardiovascular signature pipeline";

  // preprocessing
  m.def("transform_steps", &data::transform_steps, py::arg("steps"));
  m.def(
      "whiten_hr",
      [](const std::vector<double>& hr) {
        auto r = data::whiten_hr(hr);
        return py::make_tuple(r.values, r.mean, r.std);
      },
      py::arg("hr"));
  m.def(
      "eligibility_filter",
      [](const std::vector<int>& minutes, int min_days) { return data::eligibility_filter(minutes, min_days); },
      py::arg("reported_minutes_per_day"), py::arg("min_days") = data::kMinEligibleDays);

  py::class_<data::PreprocessedSeries>(m, "PreprocessedSeries")
      .def_readonly("person_id", &data::PreprocessedSeries::person_id)
      .def_readonly("window_label", &data::PreprocessedSeries::window_label)
      .def_readonly("hr_mean", &data::PreprocessedSeries::hr_mean)
      .def_readonly("hr_std", &data::PreprocessedSeries::hr_std)
      .def_property_readonly("activity", [](const data::PreprocessedSeries& s) { return rows_of(s.activity); })
      .def_property_readonly("hr",
                             [](const data::PreprocessedSeries& s) {
                               return std::vector<double>(s.hr.data().begin(), s.hr.data().end());
                             })
      .def_property_readonly("loss_mask",
                             [](const data::PreprocessedSeries& s) {
                               return std::vector<double>(s.loss_mask.data().begin(), s.loss_mask.data().end());
                             })
      .def("__len__", &data::PreprocessedSeries::length);

  m.def(
      "build_channels",
      [](const std::string& person_id, const std::string& window, const std::vector<std::optional<int>>& steps,
         const std::vector<std::optional<double>>& hr, const std::vector<std::optional<std::string>>& sleep) {
        return data::build_channels(make_raw(person_id, window, steps, hr, sleep));
      },
      py::arg("person_id"), py::arg("window"), py::arg("steps"), py::arg("heart_rate"), py::arg("sleep_state"));

  // simulation
  m.def(
      "simulate",
      [](std::size_t n_persons, std::size_t days, std::uint64_t seed, double missing_rate) {
        sim::SimConfig cfg;
        cfg.n_persons = n_persons;
        cfg.days = days;
        cfg.seed = seed;
        cfg.missing_rate = missing_rate;
        const auto cohort = sim::gen_cohort(cfg);
        py::list series;
        for (const auto& s : cohort.series) series.append(data::build_channels(s));
        py::list persons;
        for (const auto& p : cohort.persons) {
          persons.append(py::dict(py::arg("person_id") = p.person_id, py::arg("age") = p.age, py::arg("bmi") = p.bmi,
                                  py::arg("rhr") = p.rhr, py::arg("split") = std::string(data::to_string(p.split))));
        }
        py::list latent;
        for (const auto& l : cohort.latent) {
          latent.append(py::dict(py::arg("person_id") = l.person_id, py::arg("rhr_true") = l.rhr_true,
                                 py::arg("hr_gain") = l.hr_gain, py::arg("tau_rise") = l.tau_rise,
                                 py::arg("tau_decay") = l.tau_decay, py::arg("sleep_dip") = l.sleep_dip,
                                 py::arg("fitness") = l.fitness, py::arg("age") = l.age, py::arg("bmi") = l.bmi));
        }
        return py::dict(py::arg("series") = series, py::arg("persons") = persons, py::arg("latent") = latent);
      },
      py::arg("n_persons"), py::arg("days"), py::arg("seed") = 2017, py::arg("missing_rate") = 0.05);

  // model
  py::class_<model::ModelParams>(m, "Model")
      .def_property_readonly("signature_size", &model::ModelParams::signature_size)
      .def_property_readonly("parameter_count", [](const model::ModelParams& p) { return p.params.scalar_count(); });
  m.def(
      "init_model", [](std::size_t s, std::uint64_t seed) { return model::init_model(s, seed); },
      py::arg("signature_size") = 32, py::arg("seed") = 1);
  m.def("receptive_field", []() { return model::receptive_field(model::ModelConfig{}.hr_block); });
  m.def(
      "encode",
      [](const model::ModelParams& p, const data::PreprocessedSeries& s) {
        auto r = model::encode(p, s);
        return py::make_tuple(r.signature.values, r.attention);
      },
      py::arg("model"), py::arg("series"));
  m.def(
      "decode",
      [](const model::ModelParams& p, const data::PreprocessedSeries& s, const std::vector<double>& signature) {
        return model::decode(p, s.activity, model::Signature{signature, s.person_id, s.window_label});
      },
      py::arg("model"), py::arg("series"), py::arg("signature"));
  m.def(
      "masked_loss", [](const model::ModelParams& p, const data::PreprocessedSeries& s) {
        return model::forward_loss(p, s).value();
      },
      py::arg("model"), py::arg("series"));
  m.def("save_checkpoint", &model::save_checkpoint, py::arg("path"), py::arg("model"));
  m.def("load_checkpoint", &model::load_checkpoint, py::arg("path"));

  // trees and statistics
  py::class_<gbt::GbtModel>(m, "GbtModel")
      .def_readonly("base_score", &gbt::GbtModel::base_score)
      .def_property_readonly("n_trees", [](const gbt::GbtModel& g) { return g.trees.size(); });
  m.def(
      "gbt_fit",
      [](const std::vector<std::vector<double>>& x, const std::vector<double>& y, std::size_t n_rounds,
         std::size_t max_depth, double learning_rate) {
        gbt::GbtConfig cfg;
        cfg.n_rounds = n_rounds;
        cfg.max_depth = max_depth;
        cfg.learning_rate = learning_rate;
        return gbt::gbt_fit(matrix_from(x), y, cfg);
      },
      py::arg("features"), py::arg("targets"), py::arg("n_rounds") = 100, py::arg("max_depth") = 6,
      py::arg("learning_rate") = 0.3);
  m.def(
      "gbt_predict",
      [](const gbt::GbtModel& g, const std::vector<std::vector<double>>& x) {
        return gbt::gbt_predict(g, matrix_from(x));
      },
      py::arg("model"), py::arg("features"));
  m.def(
      "wilcoxon_signed_rank",
      [](const std::vector<double>& d, const std::string& method) {
        stats::PMethod pm = method == "exact"    ? stats::PMethod::kExact
                            : method == "normal" ? stats::PMethod::kNormal
                            : method == "auto"   ? stats::PMethod::kAuto
                                                 : throw std::invalid_argument("method must be auto, exact or normal");
        auto r = stats::wilcoxon_signed_rank(d, pm);
        return py::dict(py::arg("v") = r.v, py::arg("p_value") = r.p_value, py::arg("n") = r.n,
                        py::arg("exact") = r.exact);
      },
      py::arg("differences"), py::arg("method") = "auto");
  m.def(
      "auc", [](const std::vector<double>& s, const std::vector<int>& y) { return stats::auc(s, y); },
      py::arg("scores"), py::arg("labels"));

  // pipeline commands
  m.def(
      "run_command",
      [](const std::string& command, std::optional<std::filesystem::path> config, std::optional<std::uint64_t> seed,
         std::optional<std::filesystem::path> out) -> py::object {
        const auto cfg = make_config(config, seed, out);
        if (command == "simulate") {
          pipeline::cmd_simulate(cfg);
        } else if (command == "preprocess") {
          pipeline::cmd_preprocess(cfg);
        } else if (command == "train") {
          return py::int_(pipeline::cmd_train(cfg).history.epochs.size());
        } else if (command == "eval") {
          return py::str(pipeline::cmd_eval(cfg).dump());
        } else if (command == "sweep") {
          return py::int_(pipeline::cmd_sweep(cfg, cfg.sweep_axis).rows.size());
        } else if (command == "plot") {
          return py::str(pipeline::cmd_plot(cfg).string());
        } else {
          throw std::invalid_argument("unknown command '" + command + "'");
        }
        return py::none();
      },
      py::arg("command"), py::arg("config") = py::none(), py::arg("seed") = py::none(), py::arg("out") = py::none());
}
