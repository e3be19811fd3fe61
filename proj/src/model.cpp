#include "cvsig/model.hpp"

#include <cmath>
#include <stdexcept>

namespace cvsig::model {

namespace {

Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = dist(rng);
  return t;
}

// Conv weights [out x in x width]; Keras-style fans scale by the kernel width.
void add_conv(ad::ParameterSet& params, const std::string& name, std::size_t out, std::size_t in, std::size_t width,
              std::mt19937_64& rng) {
  params.add(name + ".w", glorot_uniform({out, in, width}, in * width, out * width, rng));
  params.add(name + ".b", Tensor({out}));
}

ad::Var conv(ad::Graph& g, const std::string& name, ad::Var input, std::size_t dilation = 1) {
  return ad::conv1d_dilated_causal(input, g.parameter(name + ".w"), g.parameter(name + ".b"), dilation);
}

std::string layer_name(const std::string& prefix, std::size_t layer, const char* part) {
  return prefix + ".l" + std::to_string(layer) + "." + part;
}

}  // namespace

void WaveNetBlockConfig::validate() const {
  if (input_channels < 1 || filters < 1) throw std::invalid_argument("block channel counts must be >= 1");
  if (kernel_width < 1) throw std::invalid_argument("kernel width must be >= 1");
  if (dilations.empty()) throw std::invalid_argument("block needs at least one layer");
  for (std::size_t d : dilations) {
    if (d < 1) throw std::invalid_argument("dilations must be >= 1");
  }
}

std::size_t WaveNetBlockConfig::parameter_count() const {
  const std::size_t f = filters;
  const std::size_t per_layer = 2 * (f * f * kernel_width + f) + (f * f + f);
  return f * input_channels + f + n_layers() * per_layer;
}

std::size_t receptive_field(const WaveNetBlockConfig& config) {
  std::size_t field = 1;
  for (std::size_t d : config.dilations) field += (config.kernel_width - 1) * d;
  return field;
}

ModelConfig ModelConfig::with_signature_size(std::size_t signature_size) {
  ModelConfig c;
  c.signature_size = signature_size;
  return c;
}

void ModelConfig::validate() const {
  if (signature_size < 1) throw std::invalid_argument("signature_size must be >= 1");
  if (attention_dim < 1 || decoder_hidden < 1) throw std::invalid_argument("attention/decoder widths must be >= 1");
  hr_block.validate();
  activity_block.validate();
  if (hr_block.input_channels != 1) throw std::invalid_argument("heart-rate block takes exactly 1 channel");
  if (activity_block.input_channels != data::kActivityChannels) {
    throw std::invalid_argument("activity block takes exactly 3 channels");
  }
}

std::size_t ModelConfig::decoder_unique_parameter_count() const {
  const std::size_t in = activity_block.filters + signature_size;
  return in * decoder_hidden + decoder_hidden + decoder_hidden * 1 + 1;
}

std::size_t ModelConfig::parameter_count() const {
  const std::size_t f = feature_channels();
  const std::size_t attention = (attention_dim * f + attention_dim) * 2 + (signature_size * f + signature_size);
  return hr_block.parameter_count() + activity_block.parameter_count() + attention + decoder_unique_parameter_count();
}

void add_block_parameters(ad::ParameterSet& params, const std::string& prefix, const WaveNetBlockConfig& config,
                          std::mt19937_64& rng) {
  config.validate();
  const std::size_t f = config.filters;
  add_conv(params, prefix + ".lift", f, config.input_channels, 1, rng);
  for (std::size_t l = 0; l < config.n_layers(); ++l) {
    add_conv(params, layer_name(prefix, l, "filter"), f, f, config.kernel_width, rng);
    add_conv(params, layer_name(prefix, l, "gate"), f, f, config.kernel_width, rng);
    add_conv(params, layer_name(prefix, l, "res"), f, f, 1, rng);
  }
}

ModelParams init_model(std::size_t signature_size, std::uint64_t seed) {
  if (signature_size < 1) throw std::invalid_argument("signature_size must be >= 1");
  return init_model(ModelConfig::with_signature_size(signature_size), seed);
}

ModelParams init_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelParams model;
  model.config = config;
  std::mt19937_64 rng(seed);
  auto& p = model.params;
  add_block_parameters(p, kHrBlock, config.hr_block, rng);
  add_block_parameters(p, kActivityBlock, config.activity_block, rng);

  const std::size_t f = config.feature_channels();
  const std::size_t dk = config.attention_dim;
  p.add("attn.query.w", glorot_uniform({dk, f}, f, dk, rng));
  p.add("attn.query.b", Tensor({dk}));
  add_conv(p, "attn.key", dk, f, 1, rng);
  add_conv(p, "attn.value", config.signature_size, f, 1, rng);

  add_conv(p, "dec.hidden", config.decoder_hidden, config.activity_block.filters + config.signature_size, 1, rng);
  add_conv(p, "dec.out", 1, config.decoder_hidden, 1, rng);
  return model;
}

ad::Var wavenet_block(ad::Graph& g, const std::string& prefix, const WaveNetBlockConfig& config, ad::Var input) {
  ad::Var stream = conv(g, prefix + ".lift", input);
  for (std::size_t l = 0; l < config.n_layers(); ++l) {
    const std::size_t d = config.dilations[l];
    ad::Var f = conv(g, layer_name(prefix, l, "filter"), stream, d);
    ad::Var s = conv(g, layer_name(prefix, l, "gate"), stream, d);
    ad::Var z = ad::gated_activation(f, s);
    stream = ad::add(stream, conv(g, layer_name(prefix, l, "res"), z));
  }
  return stream;
}

EncoderNodes build_encoder(ad::Graph& g, const ModelParams& model, ad::Var hr, ad::Var activity) {
  const ModelConfig& c = model.config;
  if (hr.value().rank() != 2 || hr.value().dim(0) != 1) {
    throw std::invalid_argument("encoder expects heart rate of shape [1 x T], got " + shape_string(hr.shape()));
  }
  if (activity.value().rank() != 2 || activity.value().dim(0) != c.activity_block.input_channels ||
      activity.value().dim(1) != hr.value().dim(1)) {
    throw std::invalid_argument("encoder expects activity of shape [3 x T], got " + shape_string(activity.shape()));
  }
  ad::Var hr_features = wavenet_block(g, kHrBlock, c.hr_block, hr);
  ad::Var act_features = wavenet_block(g, kActivityBlock, c.activity_block, activity);
  ad::Var features = ad::concat_channels(hr_features, act_features);

  ad::Var query = ad::linear(g.parameter("attn.query.w"), ad::mean_over_time(features), g.parameter("attn.query.b"));
  ad::Var keys = conv(g, "attn.key", features);
  ad::Var values = conv(g, "attn.value", features);
  ad::Var scores = ad::scale(ad::matvec_transposed(keys, query), 1.0 / std::sqrt(double(c.attention_dim)));
  ad::Var weights = ad::softmax(scores);
  ad::Var signature = ad::matvec(values, weights);
  return {signature, weights, act_features};
}

ad::Var build_decoder_head(ad::Graph& g, const ModelParams& model, ad::Var activity_features, ad::Var signature) {
  if (signature.value().size() != model.config.signature_size) {
    throw std::invalid_argument("signature has length " + std::to_string(signature.value().size()) +
                                ", model expects " + std::to_string(model.config.signature_size));
  }
  ad::Var joined = ad::broadcast_concat(activity_features, signature);
  ad::Var hidden = ad::relu(conv(g, "dec.hidden", joined));
  ad::Var out = conv(g, "dec.out", hidden);
  return ad::reshape(out, {out.value().dim(1)});
}

EncodeResult encode(const ModelParams& model, const data::PreprocessedSeries& series) {
  if (series.length() < 1) throw std::invalid_argument("encode: empty series");
  ad::Graph g(model.params);
  ad::Var hr = g.constant(series.hr);
  ad::Var act = g.constant(series.activity);
  EncoderNodes enc = build_encoder(g, model, hr, act);
  EncodeResult out;
  auto sig = enc.signature.value().data();
  out.signature.values.assign(sig.begin(), sig.end());
  out.signature.person_id = series.person_id;
  out.signature.window_label = series.window_label;
  auto att = enc.attention.value().data();
  out.attention.assign(att.begin(), att.end());
  return out;
}

std::vector<double> decode(const ModelParams& model, const Tensor& activity, const Signature& signature) {
  if (activity.rank() != 2 || activity.dim(0) != model.config.activity_block.input_channels || activity.dim(1) < 1) {
    throw std::invalid_argument("decode expects activity of shape [3 x T], got " + shape_string(activity.shape()));
  }
  if (signature.values.size() != model.config.signature_size) {
    throw std::invalid_argument("signature has length " + std::to_string(signature.values.size()) +
                                ", model expects " + std::to_string(model.config.signature_size));
  }
  ad::Graph g(model.params);
  ad::Var act = g.constant(activity);
  ad::Var features = wavenet_block(g, kActivityBlock, model.config.activity_block, act);
  ad::Var sig = g.constant(Tensor::vector(signature.values));
  ad::Var pred = build_decoder_head(g, model, features, sig);
  auto values = pred.value().data();
  return {values.begin(), values.end()};
}

ForwardLoss forward_loss(const ModelParams& model, const data::PreprocessedSeries& series,
                         const ForwardOptions& options) {
  ForwardLoss out;
  out.graph = std::make_unique<ad::Graph>(model.params);
  ad::Graph& g = *out.graph;
  ad::Var hr = g.constant(series.hr);
  ad::Var act = g.constant(series.activity);
  EncoderNodes enc = build_encoder(g, model, hr, act);
  ad::Var dec_features = enc.activity_features;
  if (options.decoder_activity_block != kActivityBlock) {
    dec_features = wavenet_block(g, options.decoder_activity_block, model.config.activity_block, act);
  }
  out.prediction = build_decoder_head(g, model, dec_features, enc.signature);
  out.target = g.constant(series.hr.reshaped({series.length()}));
  ad::Var mask = g.constant(series.loss_mask);
  out.loss = ad::masked_mse(out.prediction, out.target, mask);
  return out;
}

}  // namespace cvsig::model
