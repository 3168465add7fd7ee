#include "aegan/frontend.hpp"

#include <algorithm>
#include <cmath>

#include "aegan/errors.hpp"

namespace aegan {

namespace {

// Slaney mel scale: linear below 1 kHz, logarithmic above.
double hz_to_mel(double hz) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  constexpr double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  if (hz < min_log_hz) return hz / f_sp;
  return min_log_mel + std::log(hz / min_log_hz) / logstep;
}

double mel_to_hz(double mel) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  constexpr double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  if (mel < min_log_mel) return mel * f_sp;
  return min_log_hz * std::exp(logstep * (mel - min_log_mel));
}

std::vector<double> mel_band_edges(int sample_rate_hz, int n_mels) {
  const double mel_max = hz_to_mel(sample_rate_hz / 2.0);
  std::vector<double> hz(n_mels + 2);
  for (int i = 0; i < n_mels + 2; ++i)
    hz[i] = mel_to_hz(mel_max * i / (n_mels + 1));
  return hz;
}

torch::Tensor hann_window_periodic(int n_fft) {
  torch::Tensor w = torch::empty({n_fft}, torch::kFloat32);
  auto acc = w.accessor<float, 1>();
  for (int i = 0; i < n_fft; ++i)
    acc[i] = static_cast<float>(0.5 - 0.5 * std::cos(2.0 * M_PI * i / n_fft));
  return w;
}

}  // namespace

int64_t reflect_index(int64_t i, int64_t n) {
  if (n == 1) return 0;
  const int64_t period = 2 * (n - 1);
  int64_t m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - m;
}

std::vector<double> mel_center_frequencies(int sample_rate_hz, int n_fft,
                                           int n_mels) {
  (void)n_fft;
  const auto hz = mel_band_edges(sample_rate_hz, n_mels);
  return {hz.begin() + 1, hz.end() - 1};
}

torch::Tensor mel_filterbank(int sample_rate_hz, int n_fft, int n_mels) {
  const int n_bins = n_fft / 2 + 1;
  const auto hz = mel_band_edges(sample_rate_hz, n_mels);

  torch::Tensor fb = torch::zeros({n_mels, n_bins}, torch::kFloat64);
  auto acc = fb.accessor<double, 2>();
  for (int m = 0; m < n_mels; ++m) {
    const double lo = hz[m], center = hz[m + 1], hi = hz[m + 2];
    const double enorm = 2.0 / (hi - lo);  // area normalization
    for (int k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(sample_rate_hz) * k / n_fft;
      const double up = (f - lo) / (center - lo);
      const double down = (hi - f) / (hi - center);
      const double w = std::max(0.0, std::min(up, down));
      acc[m][k] = w * enorm;
    }
  }
  return fb.to(torch::kFloat32);
}

Waveform load_audio(const std::string& path, const FrontendConfig& cfg) {
  Waveform w = read_wav(path);
  if (w.sample_rate_hz == cfg.sample_rate_hz) return w;

  const double ratio =
      static_cast<double>(cfg.sample_rate_hz) / w.sample_rate_hz;
  const int64_t out_len =
      std::max<int64_t>(1, static_cast<int64_t>(std::llround(w.samples.size() * ratio)));
  std::vector<float> out(out_len);
  for (int64_t i = 0; i < out_len; ++i) {
    const double t = i / ratio;
    const auto i0 = static_cast<int64_t>(t);
    const auto i1 = std::min<int64_t>(i0 + 1, static_cast<int64_t>(w.samples.size()) - 1);
    const double frac = t - static_cast<double>(i0);
    out[i] = static_cast<float>((1.0 - frac) * w.samples[i0] + frac * w.samples[i1]);
  }
  return Waveform{std::move(out), cfg.sample_rate_hz};
}

int64_t expected_frames(int64_t n_samples, const FrontendConfig& cfg) {
  return 1 + n_samples / cfg.hop_length;
}

LogMel log_mel(const Waveform& w, const FrontendConfig& cfg) {
  const auto n = static_cast<int64_t>(w.samples.size());
  if (n < cfg.n_fft)
    throw InvalidInput("waveform shorter than one FFT window (" +
                       std::to_string(n) + " < " + std::to_string(cfg.n_fft) + ")");

  const int64_t pad = cfg.n_fft / 2;
  torch::Tensor padded = torch::empty({n + 2 * pad}, torch::kFloat32);
  {
    auto acc = padded.accessor<float, 1>();
    for (int64_t i = 0; i < n + 2 * pad; ++i)
      acc[i] = w.samples[reflect_index(i - pad, n)];
  }

  torch::Tensor frames = padded.unfold(0, cfg.n_fft, cfg.hop_length);
  frames = frames * hann_window_periodic(cfg.n_fft).unsqueeze(0);
  torch::Tensor spec = torch::fft::rfft(frames, cfg.n_fft, /*dim=*/1);
  torch::Tensor power = spec.abs().pow(2);  // (n_frames, n_bins)

  torch::Tensor fb = mel_filterbank(cfg.sample_rate_hz, cfg.n_fft, cfg.n_mels);
  torch::Tensor mel = torch::matmul(fb, power.t());  // (n_mels, n_frames)
  torch::Tensor out =
      mel.clamp_min(static_cast<float>(cfg.log_floor)).log().contiguous();

  return LogMel{out, ScaleState::kRawLog};
}

void scaler_accumulate(const LogMel& m, double& min_v, double& max_v) {
  if (m.state != ScaleState::kRawLog)
    throw StateError("scaler must be fitted on raw log-mel matrices");
  min_v = std::min(min_v, m.values.min().item<double>());
  max_v = std::max(max_v, m.values.max().item<double>());
}

Scaler scaler_from_extrema(double min_v, double max_v) {
  if (!(min_v < max_v))
    throw NumericError("degenerate scale: corpus min equals corpus max");
  Scaler s;
  s.a = 2.0 / (max_v - min_v);
  s.b = -1.0 - s.a * min_v;
  return s;
}

Scaler fit_scaler(const std::vector<LogMel>& training) {
  if (training.empty()) throw InvalidInput("fit_scaler: empty corpus");
  double min_v = std::numeric_limits<double>::infinity();
  double max_v = -std::numeric_limits<double>::infinity();
  for (const auto& m : training) scaler_accumulate(m, min_v, max_v);
  return scaler_from_extrema(min_v, max_v);
}

LogMel scale_affine(const LogMel& m, const Scaler& s) {
  if (m.state == ScaleState::kScaled)
    throw StateError("matrix is already scaled");
  torch::Tensor v = (m.values * s.a + s.b).clamp(-1.0, 1.0).to(torch::kFloat32);
  return LogMel{v.contiguous(), ScaleState::kScaled};
}

std::vector<int64_t> segment_offsets(int64_t n_frames, const FrontendConfig& cfg) {
  const int64_t F = cfg.segment_frames;
  const int64_t hop = cfg.segment_hop_frames;
  std::vector<int64_t> offsets;
  for (int64_t o = 0; o + F <= n_frames; o += hop) offsets.push_back(o);
  const int64_t tail = n_frames - F;
  if (offsets.empty() || offsets.back() != tail) offsets.push_back(tail);
  return offsets;
}

SegmentBatch slice_windows(const LogMel& m, const FrontendConfig& cfg,
                           const std::string& clip_id) {
  if (m.state != ScaleState::kScaled)
    throw StateError("slice_windows expects a scaled matrix");

  torch::Tensor values = m.values;
  int64_t n_frames = values.size(1);
  const int64_t F = cfg.segment_frames;
  if (values.size(0) != cfg.n_mels)
    throw InvalidInput("matrix has wrong mel-band count");

  if (n_frames < F) {
    if (cfg.short_clip_policy == PadPolicy::kError)
      throw InvalidInput("clip has fewer than segment_frames frames");
    torch::Tensor padded = torch::empty({values.size(0), F}, torch::kFloat32);
    for (int64_t j = 0; j < F; ++j)
      padded.index_put_({torch::indexing::Slice(), j},
                        values.index({torch::indexing::Slice(),
                                      reflect_index(j, n_frames)}));
    values = padded;
    n_frames = F;
  }

  const auto offsets = segment_offsets(n_frames, cfg);
  torch::Tensor segs = torch::empty(
      {static_cast<int64_t>(offsets.size()), cfg.n_mels, F}, torch::kFloat32);
  for (size_t i = 0; i < offsets.size(); ++i)
    segs[static_cast<int64_t>(i)] = values.index(
        {torch::indexing::Slice(),
         torch::indexing::Slice(offsets[i], offsets[i] + F)});

  return SegmentBatch{clip_id, segs.contiguous(), offsets};
}

}  // namespace aegan
