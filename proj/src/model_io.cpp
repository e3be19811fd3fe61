#include <fstream>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "cvsig/csv.hpp"
#include "cvsig/model.hpp"

namespace cvsig::model {

namespace {

constexpr const char* kCheckpointFormat = "cvsig-checkpoint";
constexpr int kCheckpointVersion = 1;

nlohmann::json block_to_json(const WaveNetBlockConfig& b) {
  return {{"input_channels", b.input_channels},
          {"filters", b.filters},
          {"kernel_width", b.kernel_width},
          {"dilations", b.dilations}};
}

WaveNetBlockConfig block_from_json(const nlohmann::json& j) {
  WaveNetBlockConfig b;
  b.input_channels = j.at("input_channels").get<std::size_t>();
  b.filters = j.at("filters").get<std::size_t>();
  b.kernel_width = j.at("kernel_width").get<std::size_t>();
  b.dilations = j.at("dilations").get<std::vector<std::size_t>>();
  return b;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParams& model) {
  nlohmann::json doc;
  doc["format"] = kCheckpointFormat;
  doc["version"] = kCheckpointVersion;
  const ModelConfig& c = model.config;
  doc["config"] = {{"signature_size", c.signature_size},
                   {"attention_dim", c.attention_dim},
                   {"decoder_hidden", c.decoder_hidden},
                   {"hr_block", block_to_json(c.hr_block)},
                   {"activity_block", block_to_json(c.activity_block)}};
  nlohmann::json params = nlohmann::json::array();
  for (const auto& p : model.params) {
    auto data = p.value.data();
    params.push_back({{"name", p.name},
                      {"shape", p.value.shape()},
                      {"data", std::vector<double>(data.begin(), data.end())}});
  }
  doc["parameters"] = std::move(params);
  std::ofstream out = csv::open_for_write(path);
  out << doc.dump() << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  try {
    nlohmann::json doc;
    in >> doc;
    if (doc.at("format").get<std::string>() != kCheckpointFormat) {
      throw std::runtime_error("not a checkpoint file");
    }
    if (doc.at("version").get<int>() != kCheckpointVersion) {
      throw std::runtime_error("unsupported checkpoint version");
    }
    const auto& jc = doc.at("config");
    ModelConfig config;
    config.signature_size = jc.at("signature_size").get<std::size_t>();
    config.attention_dim = jc.at("attention_dim").get<std::size_t>();
    config.decoder_hidden = jc.at("decoder_hidden").get<std::size_t>();
    config.hr_block = block_from_json(jc.at("hr_block"));
    config.activity_block = block_from_json(jc.at("activity_block"));
    config.validate();

    // Rebuild the expected layout, then overwrite values by name so a
    // checkpoint with missing or reshaped tensors is rejected.
    ModelParams model = init_model(config, 0);
    std::size_t seen = 0;
    for (const auto& jp : doc.at("parameters")) {
      const auto name = jp.at("name").get<std::string>();
      const auto id = model.params.find(name);
      if (!id) throw std::runtime_error("unexpected parameter '" + name + "'");
      Tensor value(jp.at("shape").get<Shape>(), jp.at("data").get<std::vector<double>>());
      if (value.shape() != model.params[*id].value.shape()) {
        throw std::runtime_error("parameter '" + name + "' has shape " + shape_string(value.shape()) + ", expected " +
                                 shape_string(model.params[*id].value.shape()));
      }
      if (!value.all_finite()) throw std::runtime_error("parameter '" + name + "' contains non-finite values");
      model.params[*id].value = std::move(value);
      ++seen;
    }
    if (seen != model.params.size()) throw std::runtime_error("checkpoint is missing parameters");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("corrupt checkpoint " + path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error("corrupt checkpoint " + path.string() + ": " + e.what());
  } catch (const std::runtime_error& e) {
    throw std::runtime_error("corrupt checkpoint " + path.string() + ": " + e.what());
  }
}

void write_signatures_csv(const std::filesystem::path& path, const std::vector<Signature>& signatures) {
  std::ofstream out = csv::open_for_write(path);
  const std::size_t s = signatures.empty() ? 0 : signatures.front().values.size();
  out << "person_id,window_label";
  for (std::size_t k = 0; k < s; ++k) out << ",s" << k;
  out << '\n';
  for (const auto& sig : signatures) {
    if (sig.values.size() != s) throw std::invalid_argument("signatures have different lengths");
    out << sig.person_id << ',' << sig.window_label;
    for (double v : sig.values) out << ',' << csv::format_double(v);
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<Signature> read_signatures_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::vector<std::string_view> cells;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
  csv::split(csv::trim(line), cells);
  if (cells.size() < 2 || cells[0] != "person_id" || cells[1] != "window_label") {
    throw std::runtime_error(path.string() + ": unexpected header");
  }
  const std::size_t width = cells.size();
  std::vector<Signature> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    csv::split(csv::trim(line), cells);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (cells.size() != width) throw std::runtime_error(where + ": wrong column count");
    Signature sig;
    sig.person_id = std::string(cells[0]);
    sig.window_label = std::string(cells[1]);
    for (std::size_t k = 2; k < width; ++k) sig.values.push_back(csv::parse_double(cells[k], where));
    out.push_back(std::move(sig));
  }
  return out;
}

}  // namespace cvsig::model
