#pragma once

// Adversarial training: WGAN-GP critic updates alternating with
// feature-matching + MSE generator updates.

#include <functional>
#include <optional>
#include <vector>

#include <torch/torch.h>

#include "aegan/config.hpp"
#include "aegan/model.hpp"

namespace aegan {

using CriticFn = std::function<torch::Tensor(const torch::Tensor&)>;

// lambda * mean_i (||grad_xhat D(xhat_i)||_2 - 1)^2 with xhat = eps*real +
// (1-eps)*fake, eps ~ U(0,1) per sample (or the supplied tensor, shape (N)).
// Returns a scalar tensor; with create_graph the penalty stays differentiable
// w.r.t. the critic parameters.
torch::Tensor gradient_penalty(const CriticFn& critic, const torch::Tensor& real,
                               const torch::Tensor& fake, double lambda_gp,
                               std::optional<torch::Tensor> eps = std::nullopt,
                               bool create_graph = true);

struct CriticLossParts {
  torch::Tensor fake_mean;  // mean D(fake)
  torch::Tensor real_mean;  // mean D(real)
  torch::Tensor penalty;
  torch::Tensor total;  // fake_mean - real_mean + penalty
};

CriticLossParts critic_loss_components(const CriticFn& critic,
                                       const torch::Tensor& real,
                                       const torch::Tensor& fake, double lambda_gp,
                                       std::optional<torch::Tensor> eps = std::nullopt,
                                       bool create_graph = true);

// ||mu_r - mu_f||^2 + ||sigma_r - sigma_f||^2 over embedding channels, with
// batch statistics taken per channel (population std). Batches of one sample
// are rejected.
torch::Tensor feature_matching_loss(const torch::Tensor& emb_real,
                                    const torch::Tensor& emb_fake);

struct GeneratorLossParts {
  torch::Tensor fm;
  torch::Tensor mse;
  torch::Tensor total;  // alpha_fm * fm + beta_mse * mse
};

GeneratorLossParts generator_loss_components(const torch::Tensor& emb_real,
                                             const torch::Tensor& emb_fake,
                                             const torch::Tensor& real,
                                             const torch::Tensor& fake,
                                             const TrainConfig& cfg);

struct StepRecord {
  int64_t step = 0;
  int epoch = 0;
  double critic_total = 0, gp = 0, d_real = 0, d_fake = 0;
  double fm = 0, mse = 0, gen_total = 0;
};

struct EpochRecord {
  int epoch = 0;
  double critic_loss = 0, gp = 0, fm = 0, mse = 0;
};

struct TrainResult {
  std::vector<EpochRecord> epochs;
  int64_t total_steps = 0;
};

using StepObserver = std::function<void(const StepRecord&)>;

// One critic update on `real` (the fake batch is the generator's detached
// reconstruction). Only critic parameters change.
StepRecord critic_step(Critic& critic, Generator& gen, const torch::Tensor& real,
                       const TrainConfig& cfg, torch::optim::Adam& critic_opt);

// One generator update against the frozen critic. Only generator parameters
// change.
void generator_step(Generator& gen, Critic& critic, const torch::Tensor& real,
                    const TrainConfig& cfg, torch::optim::Adam& gen_opt,
                    StepRecord& rec);

// Per-epoch seeded shuffling; a trailing batch of one sample is merged into
// the previous batch so embedding statistics stay defined.
std::vector<std::vector<int64_t>> epoch_batches(int64_t n, int batch_size,
                                                int64_t seed, int epoch);

// Throws NumericError with a diagnostic dump when any component is not finite.
void ensure_finite(const StepRecord& rec);

// Full loop over `segments` (M,128,128). Models must already be initialized;
// optimizer state lives inside. Iterations run n_critic critic steps then one
// generator step on the same shuffled batch.
TrainResult train_loop(Generator& gen, Critic& critic, const torch::Tensor& segments,
                       const TrainConfig& cfg, const StepObserver& observer = {});

void write_loss_csv(const std::string& path, const std::vector<EpochRecord>& epochs);

}  // namespace aegan
