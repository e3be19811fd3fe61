#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "cvsig/autodiff.hpp"
#include "cvsig/preprocess.hpp"

namespace cvsig::model {

// Stack of gated, dilated causal convolutions with residual connections.
// The input is lifted to `filters` channels by a width-1 convolution; each
// layer adds a width-1 projection of tanh(filter) * sigmoid(gate) to the
// residual stream, and the block returns the final stream.
struct WaveNetBlockConfig {
  std::size_t input_channels = 1;
  std::size_t filters = 32;
  std::size_t kernel_width = 2;
  std::vector<std::size_t> dilations = {1, 2, 4, 8, 16, 32, 64};

  std::size_t n_layers() const { return dilations.size(); }
  void validate() const;
  std::size_t parameter_count() const;
};

// 1 + sum_i (kernel_width - 1) * dilation_i
std::size_t receptive_field(const WaveNetBlockConfig& config);

struct ModelConfig {
  std::size_t signature_size = 32;
  WaveNetBlockConfig hr_block{1, 32, 2, {1, 2, 4, 8, 16, 32, 64}};
  WaveNetBlockConfig activity_block{data::kActivityChannels, 16, 2, {1, 2, 4, 8, 16, 32, 64}};
  std::size_t attention_dim = 8;
  std::size_t decoder_hidden = 16;

  static ModelConfig with_signature_size(std::size_t signature_size);
  void validate() const;
  std::size_t feature_channels() const { return hr_block.filters + activity_block.filters; }
  // Closed-form count of every learnable scalar (W2 counted once).
  std::size_t parameter_count() const;
  // (activity filters + s) * hidden + hidden + hidden * 1 + 1
  std::size_t decoder_unique_parameter_count() const;
};

// Learnable weights of encoder and decoder. The activity block ("w2") is
// stored once and read by both halves.
struct ModelParams {
  ModelConfig config;
  ad::ParameterSet params;

  std::size_t signature_size() const { return config.signature_size; }
};

inline constexpr const char* kHrBlock = "w1";
inline constexpr const char* kActivityBlock = "w2";

// Glorot-uniform weights, zero biases; deterministic in `seed`.
ModelParams init_model(std::size_t signature_size, std::uint64_t seed);
ModelParams init_model(const ModelConfig& config, std::uint64_t seed);
// Adds parameters for one block under `prefix` (used by init_model).
void add_block_parameters(ad::ParameterSet& params, const std::string& prefix, const WaveNetBlockConfig& config,
                          std::mt19937_64& rng);

struct Signature {
  std::vector<double> values;
  std::string person_id;
  std::string window_label;
};

// ---- graph builders -----------------------------------------------------

ad::Var wavenet_block(ad::Graph& graph, const std::string& prefix, const WaveNetBlockConfig& config, ad::Var input);

struct EncoderNodes {
  ad::Var signature;          // [s]
  ad::Var attention;          // [T]
  ad::Var activity_features;  // [16 x T], output of the activity block
};

EncoderNodes build_encoder(ad::Graph& graph, const ModelParams& model, ad::Var hr, ad::Var activity);
// Prediction [T] from activity-block features and a signature node.
ad::Var build_decoder_head(ad::Graph& graph, const ModelParams& model, ad::Var activity_features, ad::Var signature);

// ---- inference ----------------------------------------------------------

struct EncodeResult {
  Signature signature;
  std::vector<double> attention;
};

EncodeResult encode(const ModelParams& model, const data::PreprocessedSeries& series);
// Predicted whitened heart rate for activity [3 x T].
std::vector<double> decode(const ModelParams& model, const Tensor& activity, const Signature& signature);

// ---- training objective -------------------------------------------------

struct ForwardLoss {
  std::unique_ptr<ad::Graph> graph;
  ad::Var loss;
  ad::Var prediction;
  ad::Var target;  // constant node, separate from the encoder's heart-rate input
  double value() const { return loss.value()[0]; }
};

struct ForwardOptions {
  // Prefix of the block the decoder runs on the activity channels. Any value
  // other than "w2" (the tied default) must name a separate block in the set.
  std::string decoder_activity_block = kActivityBlock;
};

ForwardLoss forward_loss(const ModelParams& model, const data::PreprocessedSeries& series,
                         const ForwardOptions& options = {});

// ---- persistence --------------------------------------------------------

void save_checkpoint(const std::filesystem::path& path, const ModelParams& model);
ModelParams load_checkpoint(const std::filesystem::path& path);

void write_signatures_csv(const std::filesystem::path& path, const std::vector<Signature>& signatures);
std::vector<Signature> read_signatures_csv(const std::filesystem::path& path);

}  // namespace cvsig::model
