#include "doctest_compat.hpp"

#include <cmath>

#include "aegan/errors.hpp"
#include "aegan/localization.hpp"
#include "aegan/png_io.hpp"
#include "testutil.hpp"

using namespace aegan;
using testutil::TempDir;

TEST_SUITE_BEGIN("localization");

TEST_CASE("mean_spectrogram: single segment and symmetric pairs") {
  torch::manual_seed(1);
  torch::Tensor s = torch::rand({1, 32, 32}) * 2 - 1;
  CHECK(torch::equal(mean_spectrogram(s).values, s[0]));

  torch::Tensor pair = torch::cat({s, -s}, 0);
  CHECK(mean_spectrogram(pair).values.abs().max().item<double>() < 1e-7);

  CHECK_THROWS_AS(mean_spectrogram(torch::zeros({0, 32, 32})), InvalidInput);
}

TEST_CASE("streaming mean equals the two-pass mean on 1000 segments") {
  torch::manual_seed(2);
  torch::Tensor all = torch::rand({1000, 32, 32}) * 2 - 1;
  MeanAccumulator acc;
  for (int64_t i = 0; i < 1000; i += 128)
    acc.add(all.index({torch::indexing::Slice(i, std::min<int64_t>(i + 128, 1000))}));
  MeanSpectrogram streaming = acc.finish();
  MeanSpectrogram two_pass = mean_spectrogram(all);
  CHECK((streaming.values - two_pass.values).abs().max().item<double>() < 1e-9);
  CHECK(streaming.sample_count == 1000);
}

TEST_CASE("heatmap: zero difference, symmetry, nonnegativity") {
  torch::manual_seed(3);
  torch::Tensor a = torch::rand({16, 16}) * 2 - 1;
  torch::Tensor b = torch::rand({16, 16}) * 2 - 1;

  CHECK(heatmap_from(a, a.clone()).abs().max().item<double>() == 0.0);
  CHECK(torch::equal(heatmap_from(a, b), heatmap_from(b, a)));
  CHECK(heatmap_from(a, b).min().item<double>() >= 0.0);
}

TEST_CASE("heatmap is 1-Lipschitz in the mean") {
  torch::manual_seed(4);
  torch::Tensor recon = torch::rand({16, 16});
  torch::Tensor mean = torch::rand({16, 16});
  const double delta = 0.037;
  torch::Tensor h0 = heatmap_from(recon, mean);
  torch::Tensor h1 = heatmap_from(recon, mean + delta);
  CHECK((h1 - h0).abs().max().item<double>() <= delta + 1e-7);
}

TEST_CASE("planted block dominates the top-1% heatmap pixels") {
  torch::manual_seed(5);
  torch::Tensor normal = torch::rand({128, 128}) * 1.6 - 0.8;
  torch::Tensor query = normal.clone();
  // bright 8x8 block, clamped back into range
  query.index({torch::indexing::Slice(40, 48), torch::indexing::Slice(70, 78)}) += 0.8;
  query = query.clamp(-1, 1);

  // identity-stub generator: the reconstruction IS the query
  torch::Tensor heat = heatmap_from(query, normal);

  const int64_t top_n = static_cast<int64_t>(std::ceil(0.01 * 128 * 128));
  auto [vals, idx] = heat.flatten().topk(top_n);
  int64_t inside = 0;
  for (int64_t i = 0; i < top_n; ++i) {
    const int64_t flat = idx[i].item<int64_t>();
    const int64_t row = flat / 128, col = flat % 128;
    if (row >= 40 && row < 48 && col >= 70 && col < 78) ++inside;
  }
  // coverage of the planted block by the top-1% set
  CHECK(static_cast<double>(inside) / 64.0 >= 0.5);

  SUBCASE("mean-vs-mean heatmap is identically zero") {
    CHECK(heatmap_from(normal, normal.clone()).max().item<double>() == 0.0);
  }
}

TEST_CASE("localize through a real generator stays nonnegative and bounded") {
  auto [gen, critic] = init_models(testutil::tiny_model(), 6);
  torch::manual_seed(7);
  MeanSpectrogram mean = mean_spectrogram(torch::rand({4, 128, 128}) * 2 - 1);
  torch::Tensor heat = localize(gen, mean, torch::rand({128, 128}) * 2 - 1);
  CHECK(heat.sizes() == torch::IntArrayRef({128, 128}));
  CHECK(heat.min().item<double>() >= 0.0);
  CHECK(heat.max().item<double>() <= 2.0);  // both operands live in [-1,1]
}

TEST_CASE("normalize_unit_max") {
  torch::Tensor h = torch::tensor({{0.0, 2.0}, {1.0, 0.5}});
  torch::Tensor n = normalize_unit_max(h);
  CHECK(n.max().item<double>() == 1.0);
  CHECK(n[0][1].item<double>() == 1.0);
  torch::Tensor z = torch::zeros({4, 4});
  CHECK(normalize_unit_max(z).abs().max().item<double>() == 0.0);
}

TEST_CASE("stitching covers every frame and averages overlaps") {
  std::vector<torch::Tensor> maps = {torch::full({4, 8}, 1.0f),
                                     torch::full({4, 8}, 3.0f)};
  torch::Tensor clip = stitch_clip_heatmap(maps, {0, 4}, 12);
  CHECK(clip.sizes() == torch::IntArrayRef({4, 12}));
  CHECK(clip[0][0].item<double>() == 1.0);
  CHECK(clip[0][5].item<double>() == doctest::Approx(2.0));  // overlap average
  CHECK(clip[0][11].item<double>() == 3.0);

  CHECK_THROWS_AS(stitch_clip_heatmap(maps, {0, 5}, 20), InvalidInput);
}

TEST_CASE("render: CSV round trip, panel layout, determinism") {
  TempDir dir("render");
  torch::manual_seed(8);
  torch::Tensor recon = torch::rand({128, 128}) * 2 - 1;
  torch::Tensor mean = torch::rand({128, 128}) * 2 - 1;
  torch::Tensor heat = heatmap_from(recon, mean);

  render(heat, recon, mean, dir.str("a.png"), dir.str("a.csv"));
  render(heat, recon, mean, dir.str("b.png"), dir.str("b.csv"));

  torch::Tensor parsed = read_heatmap_csv(dir.str("a.csv"));
  CHECK((parsed - heat).abs().max().item<double>() < 1e-6);

  const auto [w, h] = read_png_size(dir.str("a.png"));
  CHECK(w == 128);
  CHECK(h == 3 * 128);

  CHECK(testutil::same_file_bytes(dir.str("a.png"), dir.str("b.png")));
  CHECK(testutil::same_file_bytes(dir.str("a.csv"), dir.str("b.csv")));
}

TEST_SUITE_END();
