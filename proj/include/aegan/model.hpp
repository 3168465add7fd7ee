#pragma once

// Generator (autoencoder) and critic networks.
//
// Encoder: five 4x4 stride-2 convolutions, 128 -> 4 spatial, channels
// base*{1,2,4,8,16}, then a valid 4x4 convolution to the latent vector.
// Decoder mirrors with transposed convolutions and a tanh output. The critic
// repeats the encoder stack and ends in a depth-wise 4x4 convolution whose
// flattened output is the embedding; the critic scalar is the embedding mean.
//
// Normalization is switchable: layer norm everywhere (reference), or batch
// norm in the generator with layer norm kept in the critic. Layer norm here
// normalizes each sample's own spatial activations per channel, so outputs
// never depend on batch composition. No normalization on the encoder's first
// layer, the decoder's output layer, or the critic's depth-wise head.

#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "aegan/config.hpp"
#include "aegan/frontend.hpp"

namespace aegan {

class LayerNorm2dImpl : public torch::nn::Module {
 public:
  LayerNorm2dImpl(int64_t channels, double eps = 1e-10);

  torch::Tensor forward(const torch::Tensor& x);

  // Per-sample per-channel (mu, sigma) of the pre-normalization input,
  // each (N, C). sigma is the plain population std, no epsilon.
  static std::pair<torch::Tensor, torch::Tensor> stats(const torch::Tensor& x);

  torch::Tensor gamma, beta;
  double eps;
};
TORCH_MODULE(LayerNorm2d);

// Collects per-LN-layer (mu | sigma) blocks, each (N, 2*C), in layer order.
using LnStatsCollector = std::vector<torch::Tensor>;

// Normalization slot shared by generator and critic stages.
class NormStackImpl : public torch::nn::Module {
 public:
  NormStackImpl(const std::vector<int64_t>& channels, bool use_layer_norm);
  torch::Tensor apply(size_t i, const torch::Tensor& x, LnStatsCollector* stats);
  bool layer_norm() const { return use_ln_; }

 private:
  bool use_ln_;
  std::vector<LayerNorm2d> ln_;
  std::vector<torch::nn::BatchNorm2d> bn_;
};
TORCH_MODULE(NormStack);

class GeneratorImpl : public torch::nn::Module {
 public:
  explicit GeneratorImpl(const ModelConfig& cfg);

  torch::Tensor encode(const torch::Tensor& x, LnStatsCollector* stats = nullptr);
  torch::Tensor decode(const torch::Tensor& z, LnStatsCollector* stats = nullptr);
  torch::Tensor reconstruct(const torch::Tensor& x) { return decode(encode(x)); }

  const ModelConfig& config() const { return cfg_; }
  bool uses_layer_norm() const { return enc_norms_->layer_norm(); }
  // Channel width of every LN slot, encoder then decoder order.
  std::vector<int64_t> ln_channels() const;

 private:
  ModelConfig cfg_;
  std::vector<torch::nn::Conv2d> enc_convs_;
  std::vector<torch::nn::ConvTranspose2d> dec_convs_;
  NormStack enc_norms_{nullptr}, dec_norms_{nullptr};
};
TORCH_MODULE(Generator);

class CriticImpl : public torch::nn::Module {
 public:
  explicit CriticImpl(const ModelConfig& cfg);

  // Embedding of shape (N, embedding_dim); the critic scalar is its mean.
  torch::Tensor embed(const torch::Tensor& x, LnStatsCollector* stats = nullptr);
  torch::Tensor critic_value(const torch::Tensor& x) { return embed(x).mean(1); }

  const ModelConfig& config() const { return cfg_; }
  std::vector<int64_t> ln_channels() const;

 private:
  ModelConfig cfg_;
  std::vector<torch::nn::Conv2d> convs_;
  torch::nn::Conv2d head_{nullptr};
  NormStack norms_{nullptr};
};
TORCH_MODULE(Critic);

// Deterministic for a fixed seed: conv weights ~ N(0, 0.02), biases zero,
// normalization gains one.
std::pair<Generator, Critic> init_models(const ModelConfig& cfg, int64_t seed);

int64_t parameter_count(const torch::nn::Module& m);

// ---- Inference wrappers (eval mode, no grad). Accept (128,128), (N,128,128)
// ---- or (N,1,128,128) segments.

torch::Tensor encode(Generator& g, const torch::Tensor& segments);
torch::Tensor reconstruct(Generator& g, const torch::Tensor& segments);
// (critic values (N), embeddings (N, embedding_dim))
std::pair<torch::Tensor, torch::Tensor> discriminate(Critic& d,
                                                     const torch::Tensor& segments);

// Concatenated per-layer [mu | sigma] feature vector, (N, sum 2*C).
// Requesting stats from a batch-norm generator is a configuration error.
torch::Tensor export_ln_stats(Generator& g, const torch::Tensor& segments);
torch::Tensor export_ln_stats(Critic& d, const torch::Tensor& segments);

// Total feature length the export produces, from the layer widths.
int64_t ln_stats_length(const std::vector<int64_t>& ln_channels);

// ---- Checkpoint: one per machine type. Binary tensor container plus a JSON
// ---- sidecar carrying configs, scaler, machine type and step.

struct Checkpoint {
  ModelConfig model;
  FrontendConfig frontend;
  TrainConfig train;
  Scaler scaler;
  std::string machine_type;
  int64_t step = 0;
  Generator gen{nullptr};
  Critic critic{nullptr};
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace aegan
