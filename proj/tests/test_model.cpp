#include "doctest_compat.hpp"

#include <cmath>

#include "aegan/errors.hpp"
#include "aegan/model.hpp"
#include "testutil.hpp"

using namespace aegan;
using testutil::TempDir;

namespace {

// Layer-shape enumeration oracle: parameter counts assembled from the config
// arithmetic alone, no module introspection.
int64_t oracle_generator_params(const ModelConfig& cfg, bool layer_norm) {
  const auto ch = cfg.stage_channels();
  auto conv = [](int64_t in, int64_t out) { return in * out * 16 + out; };
  int64_t n = conv(1, ch[0]);
  for (int i = 1; i < 5; ++i) n += conv(ch[i - 1], ch[i]);
  n += conv(ch[4], cfg.latent_dim);
  n += conv(cfg.latent_dim, ch[4]);
  for (int i = 4; i >= 1; --i) n += conv(ch[i], ch[i - 1]);
  n += conv(ch[0], 1);
  // norm affine parameters: encoder stages 2..5, decoder stages 1..5
  (void)layer_norm;  // LN and BN both carry 2 parameters per channel
  for (int i = 1; i < 5; ++i) n += 2 * ch[i];
  for (int i = 4; i >= 0; --i) n += 2 * ch[i];
  return n;
}

int64_t oracle_critic_params(const ModelConfig& cfg) {
  const auto ch = cfg.stage_channels();
  auto conv = [](int64_t in, int64_t out) { return in * out * 16 + out; };
  int64_t n = conv(1, ch[0]);
  for (int i = 1; i < 5; ++i) n += conv(ch[i - 1], ch[i]);
  n += ch[4] * 16 + ch[4];  // depth-wise head: one 4x4 filter per channel
  for (int i = 1; i < 5; ++i) n += 2 * ch[i];
  return n;
}

torch::Tensor random_segment(int64_t n = 1) {
  return torch::rand({n, 128, 128}) * 2 - 1;
}

}  // namespace

TEST_SUITE_BEGIN("model");

TEST_CASE("init_models: same seed gives bit-identical parameters") {
  const ModelConfig cfg = testutil::tiny_model();
  auto [g1, c1] = init_models(cfg, 7);
  auto [g2, c2] = init_models(cfg, 7);
  auto p1 = g1->parameters(), p2 = g2->parameters();
  REQUIRE(p1.size() == p2.size());
  for (size_t i = 0; i < p1.size(); ++i) CHECK(torch::equal(p1[i], p2[i]));
  auto q1 = c1->parameters(), q2 = c2->parameters();
  for (size_t i = 0; i < q1.size(); ++i) CHECK(torch::equal(q1[i], q2[i]));

  auto [g3, c3] = init_models(cfg, 8);
  CHECK(!torch::equal(g3->parameters()[0], g1->parameters()[0]));
}

TEST_CASE("encode output length equals latent_dim") {
  ModelConfig cfg = testutil::tiny_model();
  cfg.latent_dim = 48;
  auto [gen, critic] = init_models(cfg, 1);
  torch::Tensor z = encode(gen, torch::zeros({128, 128}));
  CHECK(z.sizes() == torch::IntArrayRef({1, 48}));
  CHECK(z.isfinite().all().item<bool>());
}

TEST_CASE("parameter counts match the layer-shape enumeration oracle") {
  SUBCASE("tiny config") {
    const ModelConfig cfg = testutil::tiny_model();
    auto [gen, critic] = init_models(cfg, 2);
    CHECK(parameter_count(*gen) == oracle_generator_params(cfg, true));
    CHECK(parameter_count(*critic) == oracle_critic_params(cfg));
  }
  SUBCASE("reference config, frozen regression constants") {
    const ModelConfig cfg;  // base 64, latent 256, embedding 1024
    auto [gen, critic] = init_models(cfg, 2);
    CHECK(parameter_count(*gen) == oracle_generator_params(cfg, true));
    CHECK(parameter_count(*critic) == oracle_critic_params(cfg));
    CHECK(parameter_count(*gen) == 30684929);
    CHECK(parameter_count(*critic) == 11165376);
  }
}

TEST_CASE("encode/discriminate are deterministic in eval mode") {
  auto [gen, critic] = init_models(testutil::tiny_model(), 3);
  torch::manual_seed(10);
  torch::Tensor s = random_segment(2);
  CHECK(torch::equal(encode(gen, s), encode(gen, s)));
  CHECK(torch::equal(discriminate(critic, s).second,
                     discriminate(critic, s).second));
}

TEST_CASE("batched and single-sample runs agree under LN") {
  auto [gen, critic] = init_models(testutil::tiny_model(), 4);
  torch::manual_seed(11);
  torch::Tensor batch = random_segment(4);
  torch::Tensor z_batch = encode(gen, batch);
  torch::Tensor e_batch = discriminate(critic, batch).second;
  for (int64_t i = 0; i < 4; ++i) {
    torch::Tensor zi = encode(gen, batch[i]);
    torch::Tensor ei = discriminate(critic, batch[i]).second;
    CHECK((z_batch[i] - zi[0]).abs().max().item<double>() < 1e-5);
    CHECK((e_batch[i] - ei[0]).abs().max().item<double>() < 1e-5);
  }
}

TEST_CASE("no cross-sample leakage: batch order does not change outputs") {
  auto [gen, critic] = init_models(testutil::tiny_model(), 5);
  torch::manual_seed(12);
  torch::Tensor batch = random_segment(5);
  torch::Tensor perm = torch::tensor({4, 2, 0, 3, 1}, torch::kInt64);
  torch::Tensor out_a = reconstruct(gen, batch).index_select(0, perm);
  torch::Tensor out_b = reconstruct(gen, batch.index_select(0, perm));
  CHECK((out_a - out_b).abs().max().item<double>() < 1e-6);
}

TEST_CASE("reconstruct output is bounded by the saturating activation") {
  auto [gen, critic] = init_models(testutil::tiny_model(), 6);
  torch::manual_seed(13);
  torch::Tensor out = reconstruct(gen, random_segment(3) * 5);  // even absurd inputs
  CHECK(out.abs().max().item<double>() <= 1.0);
  CHECK(out.sizes() == torch::IntArrayRef({3, 128, 128}));
}

TEST_CASE("reconstruct equals decode(encode(.)) exactly") {
  auto [gen, critic] = init_models(testutil::tiny_model(), 7);
  torch::manual_seed(14);
  torch::Tensor s = random_segment(2);
  torch::Tensor via_free = reconstruct(gen, s);
  torch::NoGradGuard ng;
  gen->eval();
  torch::Tensor via_parts = gen->decode(gen->encode(s.unsqueeze(1))).squeeze(1);
  CHECK(torch::equal(via_free, via_parts));
}

TEST_CASE("critic value is the embedding mean") {
  auto [gen, critic] = init_models(testutil::tiny_model(), 8);
  torch::manual_seed(15);
  auto [value, emb] = discriminate(critic, random_segment(3));
  CHECK((value - emb.mean(1)).abs().max().item<double>() < 1e-6);
  CHECK(emb.size(1) == testutil::tiny_model().embedding_dim);
}

TEST_CASE("LayerNorm2d: constant input has zero sigma and finite output") {
  torch::Tensor x = torch::full({2, 3, 8, 8}, 1.25f);
  auto [mu, sigma] = LayerNorm2dImpl::stats(x);
  CHECK(mu.min().item<float>() == doctest::Approx(1.25));
  CHECK(sigma.abs().max().item<float>() == 0.0f);

  LayerNorm2d ln(3);
  torch::Tensor y = ln->forward(x);
  CHECK(y.isfinite().all().item<bool>());
  CHECK(y.abs().max().item<float>() < 1e-3);  // normalized constant -> ~0
}

TEST_CASE("LayerNorm2d: invariant to per-channel affine input maps") {
  torch::manual_seed(16);
  LayerNorm2d ln(4);
  torch::Tensor x = torch::randn({3, 4, 16, 16});
  // a > 0 and b constant over the normalized (spatial) axes
  torch::Tensor a = torch::rand({3, 4, 1, 1}) * 3 + 0.5;
  torch::Tensor b = torch::randn({3, 4, 1, 1}) * 2;
  torch::Tensor y0 = ln->forward(x);
  torch::Tensor y1 = ln->forward(a * x + b);
  CHECK((y0 - y1).abs().max().item<double>() < 1e-5);
}

TEST_CASE("LN stats export: length matches the layer-enumeration oracle") {
  const ModelConfig cfg = testutil::tiny_model();
  auto [gen, critic] = init_models(cfg, 9);
  torch::manual_seed(17);
  torch::Tensor s = random_segment(2);

  const auto ch = cfg.stage_channels();
  int64_t gen_expect = 0;
  for (int64_t c : {ch[1], ch[2], ch[3], ch[4], ch[4], ch[3], ch[2], ch[1], ch[0]})
    gen_expect += 2 * c;
  int64_t critic_expect = 0;
  for (int64_t c : {ch[1], ch[2], ch[3], ch[4]}) critic_expect += 2 * c;

  torch::Tensor gs = export_ln_stats(gen, s);
  torch::Tensor cs = export_ln_stats(critic, s);
  CHECK(gs.sizes() == torch::IntArrayRef({2, gen_expect}));
  CHECK(cs.sizes() == torch::IntArrayRef({2, critic_expect}));
  CHECK(ln_stats_length(gen->ln_channels()) == gen_expect);
  CHECK(ln_stats_length(critic->ln_channels()) == critic_expect);
  CHECK(gs.isfinite().all().item<bool>());
}

TEST_CASE("LN stats: sigma block is nonnegative") {
  auto [gen, critic] = init_models(testutil::tiny_model(), 18);
  torch::manual_seed(19);
  torch::Tensor stats = export_ln_stats(critic, random_segment(3));
  // layout per layer: [mu_0..mu_C | sigma_0..sigma_C]
  const auto ch = testutil::tiny_model().stage_channels();
  int64_t off = 0;
  for (int64_t c : {ch[1], ch[2], ch[3], ch[4]}) {
    torch::Tensor sigma =
        stats.index({torch::indexing::Slice(),
                     torch::indexing::Slice(off + c, off + 2 * c)});
    CHECK(sigma.min().item<double>() >= 0.0);
    off += 2 * c;
  }
}

TEST_CASE("LN stats: first-layer mu responds monotonically to input shifts") {
  auto [gen, critic] = init_models(testutil::tiny_model(), 20);
  torch::manual_seed(21);
  torch::Tensor base = torch::rand({1, 128, 128}) * 0.8 - 0.4;  // stays in range

  const int64_t c1 = testutil::tiny_model().stage_channels()[1];
  std::vector<torch::Tensor> mus;
  for (double c = -0.3; c <= 0.301; c += 0.1) {
    torch::Tensor stats = export_ln_stats(critic, (base + c).clamp(-1, 1));
    mus.push_back(stats.index({0, torch::indexing::Slice(0, c1)}).clone());
  }

  // per channel: the mu trajectory over the sweep is monotone wherever the
  // response is appreciable
  int checked = 0;
  for (int64_t ch_i = 0; ch_i < c1; ++ch_i) {
    std::vector<double> traj;
    for (const auto& m : mus) traj.push_back(m[ch_i].item<double>());
    const double span =
        *std::max_element(traj.begin(), traj.end()) -
        *std::min_element(traj.begin(), traj.end());
    if (span < 1e-3) continue;
    bool inc = true, dec = true;
    for (size_t i = 1; i < traj.size(); ++i) {
      inc = inc && traj[i] >= traj[i - 1] - 1e-9;
      dec = dec && traj[i] <= traj[i - 1] + 1e-9;
    }
    CHECK((inc || dec));
    ++checked;
  }
  CHECK(checked > 0);
}

TEST_CASE("batch-norm generator refuses LN stats but still trains the critic path") {
  ModelConfig cfg = testutil::tiny_model();
  cfg.norm_scheme = NormScheme::kBatchNormGeneratorLayerNormCritic;
  auto [gen, critic] = init_models(cfg, 22);
  torch::manual_seed(23);
  torch::Tensor s = random_segment(2);
  CHECK_THROWS_AS(export_ln_stats(gen, s), ConfigError);
  CHECK(export_ln_stats(critic, s).isfinite().all().item<bool>());
  CHECK(reconstruct(gen, s).abs().max().item<double>() <= 1.0);
}

TEST_CASE("checkpoint round trip restores parameters bitwise") {
  TempDir dir("ckpt");
  Checkpoint ckpt;
  ckpt.model = testutil::tiny_model();
  auto [gen, critic] = init_models(ckpt.model, 24);
  ckpt.gen = gen;
  ckpt.critic = critic;
  ckpt.machine_type = "fan";
  ckpt.step = 123;
  ckpt.scaler = {0.25, -0.5};
  save_checkpoint(ckpt, dir.str("fan.ckpt"));

  Checkpoint back = load_checkpoint(dir.str("fan.ckpt"));
  CHECK(back.machine_type == "fan");
  CHECK(back.step == 123);
  CHECK(back.scaler.a == 0.25);
  auto pa = gen->parameters(), pb = back.gen->parameters();
  REQUIRE(pa.size() == pb.size());
  for (size_t i = 0; i < pa.size(); ++i) CHECK(torch::equal(pa[i], pb[i]));

  torch::manual_seed(25);
  torch::Tensor s = random_segment(1);
  CHECK(torch::equal(encode(gen, s), encode(back.gen, s)));
}

TEST_CASE("checkpoint with tampered metadata hash is rejected") {
  TempDir dir("ckptbad");
  Checkpoint ckpt;
  ckpt.model = testutil::tiny_model();
  auto [gen, critic] = init_models(ckpt.model, 26);
  ckpt.gen = gen;
  ckpt.critic = critic;
  ckpt.machine_type = "fan";
  save_checkpoint(ckpt, dir.str("fan.ckpt"));

  // flip a config field without updating the stored hash
  std::ifstream in(dir.str("fan.ckpt.json"));
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  in.close();
  const auto pos = text.find("\"leaky_slope\": 0.2");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 18, "\"leaky_slope\": 0.3");
  std::ofstream out(dir.str("fan.ckpt.json"));
  out << text;
  out.close();

  CHECK_THROWS_AS(load_checkpoint(dir.str("fan.ckpt")), ConfigError);
}

TEST_SUITE_END();
