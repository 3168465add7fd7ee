#include "doctest_compat.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "aegan/errors.hpp"
#include "aegan/frontend.hpp"
#include "aegan/wav.hpp"
#include "testutil.hpp"

using namespace aegan;
using testutil::TempDir;

namespace {

// Independent Slaney mel-scale oracle: band centers straight from the
// formula, no shared code with the filterbank construction.
std::vector<double> oracle_mel_centers(int sr, int n_mels) {
  auto to_mel = [](double hz) {
    return hz < 1000.0 ? hz / (200.0 / 3.0)
                       : 15.0 + std::log(hz / 1000.0) / (std::log(6.4) / 27.0);
  };
  auto to_hz = [](double mel) {
    return mel < 15.0 ? mel * (200.0 / 3.0)
                      : 1000.0 * std::exp((std::log(6.4) / 27.0) * (mel - 15.0));
  };
  const double mel_max = to_mel(sr / 2.0);
  std::vector<double> centers(n_mels);
  for (int m = 0; m < n_mels; ++m)
    centers[m] = to_hz(mel_max * (m + 1) / (n_mels + 1));
  return centers;
}

// Brute-force frame counter: slide a window over the reflect-padded signal.
int64_t oracle_frame_count(int64_t n_samples, int n_fft, int hop) {
  const int64_t padded = n_samples + 2 * (n_fft / 2);
  int64_t count = 0;
  for (int64_t start = 0; start + n_fft <= padded; start += hop) ++count;
  return count;
}

// Brute-force window-offset enumeration for slice_windows.
std::vector<int64_t> oracle_offsets(int64_t n_frames, int frames, int hop) {
  std::vector<int64_t> offsets;
  for (int64_t o = 0; o + frames <= n_frames; o += hop) offsets.push_back(o);
  if (offsets.empty() || offsets.back() != n_frames - frames)
    offsets.push_back(n_frames - frames);
  return offsets;
}

}  // namespace

TEST_SUITE_BEGIN("frontend");

TEST_CASE("load_audio: 1 s 440 Hz unit sine at 16 kHz") {
  TempDir dir("sine");
  FrontendConfig cfg;
  write_wav16(dir.str("sine.wav"), testutil::sine_wave(440.0, 1.0, 16000), 16000);
  Waveform w = load_audio(dir.str("sine.wav"), cfg);
  CHECK(w.samples.size() == 16000);
  CHECK(w.sample_rate_hz == 16000);
  float peak = 0;
  for (float v : w.samples) peak = std::max(peak, std::abs(v));
  CHECK(peak == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("load_audio: all-zero file loads without error") {
  TempDir dir("zeros");
  FrontendConfig cfg;
  write_wav16(dir.str("z.wav"), std::vector<float>(8000, 0.0f), 16000);
  Waveform w = load_audio(dir.str("z.wav"), cfg);
  for (float v : w.samples) CHECK(v == 0.0f);
}

TEST_CASE("load_audio: 10 s clip sample count vs independent header read") {
  TempDir dir("tens");
  FrontendConfig cfg;
  std::vector<float> ten_sec(160000, 0.1f);
  const std::string path = dir.str("clip.wav");
  write_wav16(path, ten_sec, 16000);

  // independent reader: walk RIFF chunks and take data length / 2
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  size_t pos = 12;
  int64_t data_samples = -1;
  while (pos + 8 <= bytes.size()) {
    const std::string id = bytes.substr(pos, 4);
    uint32_t len = 0;
    for (int i = 0; i < 4; ++i)
      len |= uint32_t(uint8_t(bytes[pos + 4 + i])) << (8 * i);
    if (id == "data") data_samples = len / 2;
    pos += 8 + len + (len & 1);
  }
  CHECK(data_samples == 160000);
  CHECK(load_audio(path, cfg).samples.size() == 160000);
}

TEST_CASE("load_audio: resamples when rates differ") {
  TempDir dir("rs");
  FrontendConfig cfg;
  write_wav16(dir.str("low.wav"), testutil::sine_wave(200.0, 1.0, 8000), 8000);
  Waveform w = load_audio(dir.str("low.wav"), cfg);
  CHECK(w.sample_rate_hz == 16000);
  CHECK(w.samples.size() == 16000);
}

TEST_CASE("log_mel: silence clamps every entry to log(log_floor)") {
  FrontendConfig cfg;
  Waveform w{std::vector<float>(16000 * 3, 0.0f), 16000};
  LogMel m = log_mel(w, cfg);
  CHECK(m.state == ScaleState::kRawLog);
  const float expected = std::log(static_cast<float>(cfg.log_floor));
  CHECK(m.values.min().item<float>() == doctest::Approx(expected).epsilon(1e-6));
  CHECK(m.values.max().item<float>() == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("log_mel: 1 kHz tone peaks in the mel band nearest 1 kHz") {
  FrontendConfig cfg;
  Waveform w{testutil::sine_wave(1000.0, 2.0, 16000, 0.8), 16000};
  LogMel m = log_mel(w, cfg);
  const auto row_energy = m.values.mean(1);
  const int64_t argmax = row_energy.argmax().item<int64_t>();

  const auto centers = oracle_mel_centers(cfg.sample_rate_hz, cfg.n_mels);
  int64_t nearest = 0;
  for (size_t i = 1; i < centers.size(); ++i)
    if (std::abs(centers[i] - 1000.0) < std::abs(centers[nearest] - 1000.0))
      nearest = static_cast<int64_t>(i);
  CHECK(argmax == nearest);
}

TEST_CASE("log_mel: white noise 10 s @ 16 kHz, hop 512 -> (128, 313)") {
  FrontendConfig cfg;
  std::mt19937 rng(7);
  std::uniform_real_distribution<float> u(-0.5f, 0.5f);
  std::vector<float> noise(160000);
  for (auto& v : noise) v = u(rng);
  LogMel m = log_mel(Waveform{noise, 16000}, cfg);
  CHECK(m.values.size(0) == 128);
  CHECK(m.values.size(1) == 313);
  CHECK(m.values.size(1) == oracle_frame_count(160000, cfg.n_fft, cfg.hop_length));
}

TEST_CASE("log_mel: frame counts match the brute-force framer on random lengths") {
  FrontendConfig cfg;
  std::mt19937 rng(11);
  std::uniform_int_distribution<int64_t> len(cfg.n_fft, 80000);
  for (int trial = 0; trial < 50; ++trial) {
    const int64_t n = len(rng);
    CHECK(expected_frames(n, cfg) == oracle_frame_count(n, cfg.n_fft, cfg.hop_length));
    if (trial % 10 == 0) {
      Waveform w{std::vector<float>(n, 0.01f), 16000};
      CHECK(log_mel(w, cfg).values.size(1) == expected_frames(n, cfg));
    }
  }
}

TEST_CASE("log_mel: waveform shorter than one window is rejected") {
  FrontendConfig cfg;
  Waveform w{std::vector<float>(cfg.n_fft - 1, 0.1f), 16000};
  CHECK_THROWS_AS(log_mel(w, cfg), InvalidInput);
}

TEST_CASE("mel filterbank rows are nonnegative with at least one nonzero") {
  FrontendConfig cfg;
  torch::Tensor fb = mel_filterbank(cfg.sample_rate_hz, cfg.n_fft, cfg.n_mels);
  CHECK(fb.min().item<float>() >= 0.0f);
  auto row_max = std::get<0>(fb.max(1));
  CHECK(row_max.min().item<float>() > 0.0f);
}

TEST_CASE("fit_scaler: two-point affine solve") {
  LogMel m;
  m.values = torch::tensor({{-10.0f, 2.0f}});
  Scaler s = fit_scaler({m});
  CHECK(s.a == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
  CHECK(s.b == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

  LogMel id;
  id.values = torch::tensor({{-1.0f, 1.0f}});
  Scaler si = fit_scaler({id});
  CHECK(si.a == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(si.b == doctest::Approx(0.0));
}

TEST_CASE("fit_scaler: random corpus maps extrema to exactly [-1, 1]") {
  torch::manual_seed(3);
  std::vector<LogMel> corpus;
  for (int i = 0; i < 5; ++i)
    corpus.push_back({torch::randn({16, 40}) * 4 - 2, ScaleState::kRawLog});
  Scaler s = fit_scaler(corpus);
  double lo = 1e300, hi = -1e300;
  for (const auto& m : corpus) {
    LogMel scaled = scale_affine(m, s);
    lo = std::min(lo, scaled.values.min().item<double>());
    hi = std::max(hi, scaled.values.max().item<double>());
  }
  CHECK(lo == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(hi == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("fit_scaler: constant corpus is a degenerate-scale error") {
  LogMel m;
  m.values = torch::full({4, 4}, 3.0f);
  CHECK_THROWS_AS(fit_scaler({m}), NumericError);
}

TEST_CASE("scale_affine: clamps out-of-range test values and checks state") {
  LogMel train;
  train.values = torch::tensor({{0.0f, 10.0f}});
  Scaler s = fit_scaler({train});

  LogMel test;
  test.values = torch::tensor({{20.0f, -5.0f}});  // 2x the max, below the min
  LogMel scaled = scale_affine(test, s);
  CHECK(scaled.values[0][0].item<float>() == 1.0f);
  CHECK(scaled.values[0][1].item<float>() == -1.0f);
  CHECK(scaled.state == ScaleState::kScaled);

  CHECK_THROWS_AS(scale_affine(scaled, s), StateError);
}

TEST_CASE("scale_affine: identity scaler on in-range values changes nothing") {
  torch::manual_seed(4);
  LogMel m{torch::rand({8, 20}) * 2 - 1, ScaleState::kRawLog};
  LogMel out = scale_affine(m, Scaler{1.0, 0.0});
  CHECK(torch::equal(out.values, m.values));
}

TEST_CASE("slice_windows: single window when n_frames equals segment_frames") {
  FrontendConfig cfg;
  LogMel m{torch::zeros({128, 128}), ScaleState::kScaled};
  SegmentBatch b = slice_windows(m, cfg, "clip");
  CHECK(b.values.size(0) == 1);
  CHECK(b.frame_offsets == std::vector<int64_t>{0});
}

TEST_CASE("slice_windows: offsets match the enumeration oracle") {
  FrontendConfig cfg;
  SUBCASE("313 frames, hop 64") {
    LogMel m{torch::zeros({128, 313}), ScaleState::kScaled};
    SegmentBatch b = slice_windows(m, cfg, "clip");
    CHECK(b.frame_offsets == oracle_offsets(313, 128, 64));
    CHECK((b.frame_offsets == std::vector<int64_t>{0, 64, 128, 185}));
  }
  SUBCASE("random frame counts") {
    std::mt19937 rng(5);
    std::uniform_int_distribution<int64_t> frames(128, 700);
    for (int trial = 0; trial < 50; ++trial) {
      const int64_t n = frames(rng);
      LogMel m{torch::zeros({128, n}), ScaleState::kScaled};
      CHECK(slice_windows(m, cfg, "c").frame_offsets ==
            oracle_offsets(n, cfg.segment_frames, cfg.segment_hop_frames));
    }
  }
}

TEST_CASE("slice_windows: short clips reflect-pad to one segment") {
  FrontendConfig cfg;
  LogMel m{torch::rand({128, 127}) * 2 - 1, ScaleState::kScaled};
  SegmentBatch b = slice_windows(m, cfg, "short");
  CHECK(b.values.size(0) == 1);
  CHECK(b.values.size(2) == 128);

  FrontendConfig strict = cfg;
  strict.short_clip_policy = PadPolicy::kError;
  CHECK_THROWS_AS(slice_windows(m, strict, "short"), InvalidInput);
}

TEST_CASE("slice_windows: rejects unscaled input") {
  FrontendConfig cfg;
  LogMel m{torch::zeros({128, 200}), ScaleState::kRawLog};
  CHECK_THROWS_AS(slice_windows(m, cfg, "raw"), StateError);
}

TEST_CASE("segment layout reconstructs slice_windows output exactly") {
  FrontendConfig cfg;
  torch::manual_seed(6);
  LogMel m{(torch::rand({128, 313}) * 2 - 1).to(torch::kFloat32),
           ScaleState::kScaled};
  SegmentBatch b = slice_windows(m, cfg, "clip");
  for (size_t i = 0; i < b.frame_offsets.size(); ++i) {
    const int64_t o = b.frame_offsets[i];
    torch::Tensor manual = m.values.index(
        {torch::indexing::Slice(), torch::indexing::Slice(o, o + 128)});
    CHECK(torch::equal(b.values[static_cast<int64_t>(i)], manual));
  }
}

TEST_CASE("every emitted segment is 128x128 inside [-1,1]") {
  FrontendConfig cfg;
  std::mt19937 rng(9);
  std::uniform_int_distribution<int64_t> len(40000, 200000);
  std::uniform_real_distribution<float> amp(0.05f, 0.9f);
  for (int trial = 0; trial < 4; ++trial) {
    std::vector<float> wave(len(rng));
    for (auto& v : wave) v = amp(rng) * std::sin(0.01f * static_cast<float>(&v - wave.data()));
    LogMel raw = log_mel(Waveform{wave, 16000}, cfg);
    LogMel scaled = scale_affine(raw, fit_scaler({raw}));
    SegmentBatch b = slice_windows(scaled, cfg, "t");
    CHECK(b.values.size(1) == 128);
    CHECK(b.values.size(2) == 128);
    CHECK(b.values.min().item<float>() >= -1.0f);
    CHECK(b.values.max().item<float>() <= 1.0f);
  }
}

TEST_CASE("reflect_index bounces at both ends") {
  CHECK(reflect_index(0, 5) == 0);
  CHECK(reflect_index(-1, 5) == 1);
  CHECK(reflect_index(-4, 5) == 4);
  CHECK(reflect_index(5, 5) == 3);
  CHECK(reflect_index(8, 5) == 0);
  CHECK(reflect_index(3, 1) == 0);
}

TEST_SUITE_END();
