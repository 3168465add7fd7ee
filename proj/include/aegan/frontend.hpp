#pragma once

// Audio -> scaled log-mel segments.
//
// The chain is: mono waveform -> centered STFT (reflect padding, periodic
// Hann) -> power spectrum -> mel filterbank (Slaney scale, area-normalized)
// -> log with floor clamp -> corpus-wide affine scaling into [-1,1]
// -> overlapping 128x128 segments.

#include <string>
#include <vector>

#include <torch/torch.h>

#include "aegan/config.hpp"
#include "aegan/wav.hpp"

namespace aegan {

enum class ScaleState { kRawLog, kScaled };

struct LogMel {
  torch::Tensor values;  // (n_mels, n_frames), float32
  ScaleState state = ScaleState::kRawLog;
};

// Affine scaling a*x + b fitted so the training corpus spans [-1, 1].
struct Scaler {
  double a = 1.0;
  double b = 0.0;
};

// One clip's segments: values (n_segments, F, F) plus the frame offset of
// each segment inside the clip.
struct SegmentBatch {
  std::string clip_id;
  torch::Tensor values;  // (n_segments, segment_frames, segment_frames), float32
  std::vector<int64_t> frame_offsets;
};

// Mirror index with boundary bounce; defined for any n >= 1.
int64_t reflect_index(int64_t i, int64_t n);

// (n_mels, n_fft/2 + 1) filterbank, rows nonnegative, each row nonzero.
torch::Tensor mel_filterbank(int sample_rate_hz, int n_fft, int n_mels);

// Triangle center frequency of each mel band, Hz. Exposed for diagnostics.
std::vector<double> mel_center_frequencies(int sample_rate_hz, int n_fft, int n_mels);

// Reads and, when the file rate differs from cfg.sample_rate_hz, linearly
// resamples. Zero-length or multi-channel audio is rejected by the reader.
Waveform load_audio(const std::string& path, const FrontendConfig& cfg);

// Centered framing: n_frames = 1 + floor(n_samples / hop_length).
int64_t expected_frames(int64_t n_samples, const FrontendConfig& cfg);

LogMel log_mel(const Waveform& w, const FrontendConfig& cfg);

Scaler fit_scaler(const std::vector<LogMel>& training);
// Streaming variant: fold one matrix into a running (min, max) pair.
void scaler_accumulate(const LogMel& m, double& min_v, double& max_v);
Scaler scaler_from_extrema(double min_v, double max_v);

LogMel scale_affine(const LogMel& m, const Scaler& s);

// Window starts: multiples of segment_hop_frames, plus a tail window aligned
// to the final frame when the hop does not land there exactly.
std::vector<int64_t> segment_offsets(int64_t n_frames, const FrontendConfig& cfg);

SegmentBatch slice_windows(const LogMel& m, const FrontendConfig& cfg,
                           const std::string& clip_id);

}  // namespace aegan
