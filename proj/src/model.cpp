#include "aegan/model.hpp"

#include <fstream>

#include <json.hpp>

#include "aegan/errors.hpp"
#include "aegan/tensor_io.hpp"

namespace aegan {

namespace {

torch::Tensor as_nchw(const torch::Tensor& segments) {
  constexpr int64_t S = ModelConfig::input_size;
  torch::Tensor x = segments;
  if (x.dim() == 2) x = x.unsqueeze(0);
  if (x.dim() == 3) x = x.unsqueeze(1);
  if (x.dim() != 4 || x.size(1) != 1 || x.size(2) != S || x.size(3) != S)
    throw InvalidInput("expected segments of shape (N,1,128,128), got " +
                       std::string(x.toString()) + " sized " +
                       std::to_string(x.dim()) + "d");
  return x.to(torch::kFloat32);
}

}  // namespace

LayerNorm2dImpl::LayerNorm2dImpl(int64_t channels, double eps_in) : eps(eps_in) {
  gamma = register_parameter("gamma", torch::ones({channels}));
  beta = register_parameter("beta", torch::zeros({channels}));
}

torch::Tensor LayerNorm2dImpl::forward(const torch::Tensor& x) {
  auto mu = x.mean({2, 3}, /*keepdim=*/true);
  auto var = (x - mu).pow(2).mean({2, 3}, /*keepdim=*/true);
  auto y = (x - mu) / torch::sqrt(var + eps);
  return y * gamma.view({1, -1, 1, 1}) + beta.view({1, -1, 1, 1});
}

std::pair<torch::Tensor, torch::Tensor> LayerNorm2dImpl::stats(
    const torch::Tensor& x) {
  auto mu = x.mean({2, 3});
  auto var = (x - mu.unsqueeze(-1).unsqueeze(-1)).pow(2).mean({2, 3});
  return {mu, var.sqrt()};
}

NormStackImpl::NormStackImpl(const std::vector<int64_t>& channels, bool use_ln)
    : use_ln_(use_ln) {
  for (size_t i = 0; i < channels.size(); ++i) {
    if (use_ln_) {
      ln_.push_back(register_module("ln" + std::to_string(i),
                                    LayerNorm2d(channels[i])));
    } else {
      bn_.push_back(register_module("bn" + std::to_string(i),
                                    torch::nn::BatchNorm2d(channels[i])));
    }
  }
}

torch::Tensor NormStackImpl::apply(size_t i, const torch::Tensor& x,
                                   LnStatsCollector* stats) {
  if (use_ln_) {
    if (stats) {
      auto [mu, sigma] = LayerNorm2dImpl::stats(x);
      stats->push_back(torch::cat({mu, sigma}, 1));
    }
    return ln_[i]->forward(x);
  }
  if (stats)
    throw ConfigError("LN statistics requested from a batch-norm network");
  return bn_[i]->forward(x);
}

GeneratorImpl::GeneratorImpl(const ModelConfig& cfg) : cfg_(cfg) {
  cfg.validate();
  const auto ch = cfg.stage_channels();

  auto conv = [&](int64_t in, int64_t out, int64_t k, int64_t s, int64_t p) {
    return torch::nn::Conv2d(
        torch::nn::Conv2dOptions(in, out, k).stride(s).padding(p));
  };
  auto convt = [&](int64_t in, int64_t out, int64_t k, int64_t s, int64_t p) {
    return torch::nn::ConvTranspose2d(
        torch::nn::ConvTranspose2dOptions(in, out, k).stride(s).padding(p));
  };

  enc_convs_.push_back(register_module("enc0", conv(1, ch[0], 4, 2, 1)));
  for (int i = 1; i < 5; ++i)
    enc_convs_.push_back(register_module("enc" + std::to_string(i),
                                         conv(ch[i - 1], ch[i], 4, 2, 1)));
  enc_convs_.push_back(register_module("enc5", conv(ch[4], cfg.latent_dim, 4, 1, 0)));

  dec_convs_.push_back(register_module("dec0", convt(cfg.latent_dim, ch[4], 4, 1, 0)));
  for (int i = 1; i < 5; ++i)
    dec_convs_.push_back(register_module("dec" + std::to_string(i),
                                         convt(ch[5 - i], ch[4 - i], 4, 2, 1)));
  dec_convs_.push_back(register_module("dec5", convt(ch[0], 1, 4, 2, 1)));

  const bool ln = cfg.norm_scheme == NormScheme::kLayerNormBoth;
  enc_norms_ = register_module(
      "enc_norms", NormStack(std::vector<int64_t>{ch[1], ch[2], ch[3], ch[4]}, ln));
  dec_norms_ = register_module(
      "dec_norms",
      NormStack(std::vector<int64_t>{ch[4], ch[3], ch[2], ch[1], ch[0]}, ln));
}

torch::Tensor GeneratorImpl::encode(const torch::Tensor& x,
                                    LnStatsCollector* stats) {
  const double slope = cfg_.leaky_slope;
  torch::Tensor h = torch::leaky_relu(enc_convs_[0]->forward(x), slope);
  for (int i = 1; i < 5; ++i) {
    h = enc_convs_[i]->forward(h);
    h = enc_norms_->apply(i - 1, h, stats);
    h = torch::leaky_relu(h, slope);
  }
  return enc_convs_[5]->forward(h).flatten(1);
}

torch::Tensor GeneratorImpl::decode(const torch::Tensor& z,
                                    LnStatsCollector* stats) {
  const double slope = cfg_.leaky_slope;
  torch::Tensor h = z.view({z.size(0), cfg_.latent_dim, 1, 1});
  for (int i = 0; i < 5; ++i) {
    h = dec_convs_[i]->forward(h);
    h = dec_norms_->apply(i, h, stats);
    h = torch::leaky_relu(h, slope);
  }
  return torch::tanh(dec_convs_[5]->forward(h));
}

std::vector<int64_t> GeneratorImpl::ln_channels() const {
  const auto ch = cfg_.stage_channels();
  return {ch[1], ch[2], ch[3], ch[4], ch[4], ch[3], ch[2], ch[1], ch[0]};
}

CriticImpl::CriticImpl(const ModelConfig& cfg) : cfg_(cfg) {
  cfg.validate();
  const auto ch = cfg.stage_channels();

  auto conv = [&](int64_t in, int64_t out) {
    return torch::nn::Conv2d(
        torch::nn::Conv2dOptions(in, out, 4).stride(2).padding(1));
  };
  convs_.push_back(register_module("conv0", conv(1, ch[0])));
  for (int i = 1; i < 5; ++i)
    convs_.push_back(register_module("conv" + std::to_string(i),
                                     conv(ch[i - 1], ch[i])));
  // Depth-wise head: one 4x4 filter per channel over the final 4x4 map.
  head_ = register_module(
      "head", torch::nn::Conv2d(
                  torch::nn::Conv2dOptions(ch[4], ch[4], 4).groups(ch[4])));

  // The critic keeps layer norm under both schemes (a batch-norm critic
  // would couple samples inside the gradient penalty).
  norms_ = register_module(
      "norms", NormStack(std::vector<int64_t>{ch[1], ch[2], ch[3], ch[4]}, true));
}

torch::Tensor CriticImpl::embed(const torch::Tensor& x, LnStatsCollector* stats) {
  const double slope = cfg_.leaky_slope;
  torch::Tensor h = torch::leaky_relu(convs_[0]->forward(x), slope);
  for (int i = 1; i < 5; ++i) {
    h = convs_[i]->forward(h);
    h = norms_->apply(i - 1, h, stats);
    h = torch::leaky_relu(h, slope);
  }
  return head_->forward(h).flatten(1);
}

std::vector<int64_t> CriticImpl::ln_channels() const {
  const auto ch = cfg_.stage_channels();
  return {ch[1], ch[2], ch[3], ch[4]};
}

std::pair<Generator, Critic> init_models(const ModelConfig& cfg, int64_t seed) {
  torch::manual_seed(seed);
  Generator gen(cfg);
  Critic critic(cfg);

  // DCGAN-style init, applied after construction in registration order so it
  // is the only RNG consumer.
  torch::manual_seed(seed);
  torch::NoGradGuard ng;
  for (auto* m : {static_cast<torch::nn::Module*>(gen.get()),
                  static_cast<torch::nn::Module*>(critic.get())}) {
    for (auto& p : m->named_parameters()) {
      const auto& key = p.key();
      if (key.ends_with(".weight") && key.find("norm") == std::string::npos &&
          key.find(".ln") == std::string::npos && key.find(".bn") == std::string::npos) {
        p.value().normal_(0.0, 0.02);
      } else if (key.ends_with(".bias")) {
        p.value().zero_();
      } else if (key.ends_with(".gamma") || key.ends_with(".weight")) {
        p.value().fill_(1.0);
      } else if (key.ends_with(".beta")) {
        p.value().zero_();
      }
    }
  }
  return {gen, critic};
}

int64_t parameter_count(const torch::nn::Module& m) {
  int64_t n = 0;
  for (const auto& p : m.parameters()) n += p.numel();
  return n;
}

torch::Tensor encode(Generator& g, const torch::Tensor& segments) {
  torch::NoGradGuard ng;
  g->eval();
  return g->encode(as_nchw(segments));
}

torch::Tensor reconstruct(Generator& g, const torch::Tensor& segments) {
  torch::NoGradGuard ng;
  g->eval();
  return g->reconstruct(as_nchw(segments)).squeeze(1);
}

std::pair<torch::Tensor, torch::Tensor> discriminate(Critic& d,
                                                     const torch::Tensor& segments) {
  torch::NoGradGuard ng;
  d->eval();
  torch::Tensor emb = d->embed(as_nchw(segments));
  return {emb.mean(1), emb};
}

int64_t ln_stats_length(const std::vector<int64_t>& ln_channels) {
  int64_t n = 0;
  for (int64_t c : ln_channels) n += 2 * c;
  return n;
}

torch::Tensor export_ln_stats(Generator& g, const torch::Tensor& segments) {
  if (!g->uses_layer_norm())
    throw ConfigError(
        "generator uses batch norm; LN statistics are not defined for it");
  torch::NoGradGuard ng;
  g->eval();
  LnStatsCollector stats;
  torch::Tensor x = as_nchw(segments);
  torch::Tensor z = g->encode(x, &stats);
  g->decode(z, &stats);
  return torch::cat(stats, 1);
}

torch::Tensor export_ln_stats(Critic& d, const torch::Tensor& segments) {
  torch::NoGradGuard ng;
  d->eval();
  LnStatsCollector stats;
  d->embed(as_nchw(segments), &stats);
  return torch::cat(stats, 1);
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::map<std::string, torch::Tensor> tensors;
  for (const auto& p : ckpt.gen->named_parameters())
    tensors["gen/" + p.key()] = p.value();
  for (const auto& b : ckpt.gen->named_buffers())
    tensors["gen_buf/" + b.key()] = b.value();
  for (const auto& p : ckpt.critic->named_parameters())
    tensors["critic/" + p.key()] = p.value();
  for (const auto& b : ckpt.critic->named_buffers())
    tensors["critic_buf/" + b.key()] = b.value();
  save_tensors(path, tensors);

  nlohmann::json meta = {
      {"machine_type", ckpt.machine_type},
      {"step", ckpt.step},
      {"model", to_json(ckpt.model)},
      {"frontend", to_json(ckpt.frontend)},
      {"train", to_json(ckpt.train)},
      {"scaler", {{"a", ckpt.scaler.a}, {"b", ckpt.scaler.b}}},
      {"model_hash", model_hash(ckpt.model)},
      {"frontend_hash", frontend_hash(ckpt.frontend)},
  };
  std::ofstream out(path + ".json");
  if (!out) throw IoError("cannot write checkpoint metadata: " + path + ".json");
  out << meta.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path + ".json");
  if (!in) throw IoError("cannot open checkpoint metadata: " + path + ".json");
  nlohmann::json meta = nlohmann::json::parse(in);

  Checkpoint ckpt;
  ckpt.machine_type = meta.at("machine_type");
  ckpt.step = meta.at("step");
  ckpt.model = model_config_from_json(meta.at("model"));
  ckpt.frontend = frontend_config_from_json(meta.at("frontend"));
  ckpt.train = train_config_from_json(meta.at("train"));
  ckpt.scaler.a = meta.at("scaler").at("a");
  ckpt.scaler.b = meta.at("scaler").at("b");

  if (meta.at("model_hash") != model_hash(ckpt.model) ||
      meta.at("frontend_hash") != frontend_hash(ckpt.frontend))
    throw ConfigError("checkpoint metadata hash mismatch: " + path);

  ckpt.gen = Generator(ckpt.model);
  ckpt.critic = Critic(ckpt.model);

  auto tensors = load_tensors(path);
  torch::NoGradGuard ng;
  auto restore = [&](torch::nn::Module& m, const std::string& prefix,
                     bool buffers) {
    auto named = buffers ? m.named_buffers() : m.named_parameters();
    for (auto& p : named) {
      auto it = tensors.find(prefix + p.key());
      if (it == tensors.end())
        throw IoError("checkpoint missing tensor " + prefix + p.key());
      if (!it->second.sizes().equals(p.value().sizes()))
        throw IoError("checkpoint shape mismatch for " + prefix + p.key());
      p.value().copy_(it->second);
    }
  };
  restore(*ckpt.gen, "gen/", false);
  restore(*ckpt.gen, "gen_buf/", true);
  restore(*ckpt.critic, "critic/", false);
  restore(*ckpt.critic, "critic_buf/", true);
  return ckpt;
}

}  // namespace aegan
