#include "aegan/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "aegan/errors.hpp"

namespace aegan {

torch::Tensor gradient_penalty(const CriticFn& critic, const torch::Tensor& real,
                               const torch::Tensor& fake, double lambda_gp,
                               std::optional<torch::Tensor> eps,
                               bool create_graph) {
  if (!real.sizes().equals(fake.sizes()))
    throw InvalidInput("gradient_penalty: real and fake shapes differ");

  const int64_t n = real.size(0);
  torch::Tensor e = eps ? *eps : torch::rand({n}, real.options());
  std::vector<int64_t> shape(real.dim(), 1);
  shape[0] = n;
  e = e.view(shape);

  torch::Tensor xhat =
      (e * real.detach() + (1 - e) * fake.detach()).requires_grad_(true);
  torch::Tensor d = critic(xhat);
  if (d.numel() != n)
    throw InvalidInput("critic must return one value per sample");

  torch::Tensor grad = torch::autograd::grad({d.sum()}, {xhat},
                                             /*grad_outputs=*/{},
                                             /*retain_graph=*/create_graph,
                                             /*create_graph=*/create_graph)[0];
  if (!grad.isfinite().all().item<bool>())
    throw NumericError("gradient_penalty: non-finite critic gradient");

  torch::Tensor norms = grad.flatten(1).norm(2, 1);
  return lambda_gp * (norms - 1).pow(2).mean();
}

CriticLossParts critic_loss_components(const CriticFn& critic,
                                       const torch::Tensor& real,
                                       const torch::Tensor& fake, double lambda_gp,
                                       std::optional<torch::Tensor> eps,
                                       bool create_graph) {
  CriticLossParts parts;
  parts.fake_mean = critic(fake).mean();
  parts.real_mean = critic(real).mean();
  parts.penalty = gradient_penalty(critic, real, fake, lambda_gp, std::move(eps),
                                   create_graph);
  parts.total = parts.fake_mean - parts.real_mean + parts.penalty;
  return parts;
}

torch::Tensor feature_matching_loss(const torch::Tensor& emb_real,
                                    const torch::Tensor& emb_fake) {
  if (emb_real.size(0) < 2)
    throw ConfigError("feature matching needs at least two samples per batch");
  auto mu_r = emb_real.mean(0);
  auto mu_f = emb_fake.mean(0);
  // Population std; the 1e-12 keeps the sqrt differentiable at zero variance.
  auto sigma_r = (emb_real.var(0, /*unbiased=*/false) + 1e-12).sqrt();
  auto sigma_f = (emb_fake.var(0, /*unbiased=*/false) + 1e-12).sqrt();
  return (mu_r - mu_f).pow(2).sum() + (sigma_r - sigma_f).pow(2).sum();
}

GeneratorLossParts generator_loss_components(const torch::Tensor& emb_real,
                                             const torch::Tensor& emb_fake,
                                             const torch::Tensor& real,
                                             const torch::Tensor& fake,
                                             const TrainConfig& cfg) {
  GeneratorLossParts parts;
  parts.fm = feature_matching_loss(emb_real, emb_fake);
  parts.mse = (real - fake).pow(2).mean();
  parts.total = cfg.alpha_fm * parts.fm + cfg.beta_mse * parts.mse;
  return parts;
}

StepRecord critic_step(Critic& critic, Generator& gen, const torch::Tensor& real,
                       const TrainConfig& cfg, torch::optim::Adam& critic_opt) {
  torch::Tensor fake;
  {
    torch::NoGradGuard ng;
    fake = gen->reconstruct(real);
  }
  auto critic_fn = [&](const torch::Tensor& x) { return critic->critic_value(x); };

  critic_opt.zero_grad();
  CriticLossParts parts =
      critic_loss_components(critic_fn, real, fake, cfg.lambda_gp);
  parts.total.backward();
  critic_opt.step();

  StepRecord rec;
  rec.critic_total = parts.total.item<double>();
  rec.gp = parts.penalty.item<double>();
  rec.d_real = parts.real_mean.item<double>();
  rec.d_fake = parts.fake_mean.item<double>();
  return rec;
}

void generator_step(Generator& gen, Critic& critic, const torch::Tensor& real,
                    const TrainConfig& cfg, torch::optim::Adam& gen_opt,
                    StepRecord& rec) {
  // Freeze critic parameter gradients; activations still carry gradients
  // back into the generator.
  std::vector<torch::Tensor> critic_params = critic->parameters();
  for (auto& p : critic_params) p.set_requires_grad(false);

  gen_opt.zero_grad();
  torch::Tensor fake = gen->reconstruct(real);
  torch::Tensor emb_fake = critic->embed(fake);
  torch::Tensor emb_real;
  {
    torch::NoGradGuard ng;
    emb_real = critic->embed(real);
  }
  GeneratorLossParts parts =
      generator_loss_components(emb_real, emb_fake, real, fake, cfg);
  parts.total.backward();
  gen_opt.step();

  for (auto& p : critic_params) p.set_requires_grad(true);

  rec.fm = parts.fm.item<double>();
  rec.mse = parts.mse.item<double>();
  rec.gen_total = parts.total.item<double>();
}

std::vector<std::vector<int64_t>> epoch_batches(int64_t n, int batch_size,
                                                int64_t seed, int epoch) {
  std::vector<int64_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(static_cast<uint64_t>(seed) * 0x9E3779B97F4A7C15ull +
                      static_cast<uint64_t>(epoch) + 1);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::vector<int64_t>> batches;
  for (int64_t i = 0; i < n; i += batch_size) {
    const int64_t end = std::min<int64_t>(i + batch_size, n);
    batches.emplace_back(order.begin() + i, order.begin() + end);
  }
  if (batches.size() > 1 && batches.back().size() < 2) {
    batches[batches.size() - 2].push_back(batches.back()[0]);
    batches.pop_back();
  }
  return batches;
}

void ensure_finite(const StepRecord& rec) {
  for (double v : {rec.critic_total, rec.gp, rec.d_real, rec.d_fake, rec.fm,
                   rec.mse, rec.gen_total})
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os << "non-finite loss at step " << rec.step << " (epoch " << rec.epoch
         << "): critic=" << rec.critic_total << " gp=" << rec.gp
         << " d_real=" << rec.d_real << " d_fake=" << rec.d_fake
         << " fm=" << rec.fm << " mse=" << rec.mse;
      throw NumericError(os.str());
    }
}

TrainResult train_loop(Generator& gen, Critic& critic, const torch::Tensor& segments,
                       const TrainConfig& cfg, const StepObserver& observer) {
  cfg.validate();
  if (segments.dim() != 3 || segments.size(0) == 0)
    throw InvalidInput("train_loop expects a nonempty (M,128,128) segment tensor");
  const int64_t m = segments.size(0);
  if (m < 2) throw ConfigError("training needs at least two segments");

  torch::Tensor data = segments.unsqueeze(1).to(torch::kFloat32);
  gen->train();
  critic->train();

  torch::optim::Adam gen_opt(
      gen->parameters(), torch::optim::AdamOptions(cfg.learning_rate)
                             .betas({cfg.adam_beta1, cfg.adam_beta2}));
  torch::optim::Adam critic_opt(
      critic->parameters(), torch::optim::AdamOptions(cfg.learning_rate)
                                .betas({cfg.adam_beta1, cfg.adam_beta2}));

  TrainResult result;
  int64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto batches = epoch_batches(m, cfg.batch_size, cfg.seed, epoch);
    EpochRecord erec;
    erec.epoch = epoch;
    for (const auto& batch : batches) {
      torch::Tensor idx =
          torch::from_blob(const_cast<int64_t*>(batch.data()),
                           {static_cast<int64_t>(batch.size())}, torch::kInt64)
              .clone();
      torch::Tensor real = data.index_select(0, idx);

      StepRecord rec;
      for (int c = 0; c < cfg.n_critic; ++c)
        rec = critic_step(critic, gen, real, cfg, critic_opt);
      generator_step(gen, critic, real, cfg, gen_opt, rec);
      rec.step = ++step;
      rec.epoch = epoch;
      ensure_finite(rec);
      if (observer) observer(rec);

      erec.critic_loss += rec.critic_total;
      erec.gp += rec.gp;
      erec.fm += rec.fm;
      erec.mse += rec.mse;
    }
    const auto nb = static_cast<double>(batches.size());
    erec.critic_loss /= nb;
    erec.gp /= nb;
    erec.fm /= nb;
    erec.mse /= nb;
    result.epochs.push_back(erec);
  }
  result.total_steps = step;
  return result;
}

void write_loss_csv(const std::string& path, const std::vector<EpochRecord>& epochs) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write loss log: " + path);
  out << "epoch,critic_loss,gp,fm,mse\n";
  char buf[256];
  for (const auto& e : epochs) {
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g\n", e.epoch,
                  e.critic_loss, e.gp, e.fm, e.mse);
    out << buf;
  }
}

}  // namespace aegan
