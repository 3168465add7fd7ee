#pragma once

// Pixel-level anomaly localization: the reconstructed (denoised) query
// segment is compared against the training-set mean spectrogram; bright
// heatmap pixels mark where the query deviates from normal.

#include <string>
#include <vector>

#include <torch/torch.h>

#include "aegan/config.hpp"
#include "aegan/frontend.hpp"
#include "aegan/model.hpp"

namespace aegan {

struct MeanSpectrogram {
  torch::Tensor values;  // (F, F) float32, entries in [-1,1]
  std::string machine_type;
  uint64_t config_hash = 0;
  int64_t sample_count = 0;
};

MeanSpectrogram mean_spectrogram(const torch::Tensor& training_segments);

// Streaming accumulation for corpora that arrive in batches.
struct MeanAccumulator {
  torch::Tensor sum;
  int64_t count = 0;
  void add(const torch::Tensor& segments);
  MeanSpectrogram finish() const;
};

// |recon - mean| elementwise; nonnegative by construction.
torch::Tensor heatmap_from(const torch::Tensor& recon, const torch::Tensor& mean);

torch::Tensor localize(Generator& gen, const MeanSpectrogram& mean,
                       const torch::Tensor& query_segment);

// Diagnostic alternative: |query - reconstruct(query)|.
torch::Tensor reconstruction_residual(Generator& gen, const torch::Tensor& query_segment);

// Scales so the max entry is 1; all-zero stays all-zero.
torch::Tensor normalize_unit_max(const torch::Tensor& heatmap);

// Tiles per-segment heatmaps back onto clip frames (averaging overlaps).
// Returns (F, n_frames).
torch::Tensor stitch_clip_heatmap(const std::vector<torch::Tensor>& heatmaps,
                                  const std::vector<int64_t>& frame_offsets,
                                  int64_t n_frames);

// Three stacked panels (reconstruction, mean, unit-max heatmap) as one
// grayscale PNG, plus the raw heatmap as CSV.
void render(const torch::Tensor& heatmap, const torch::Tensor& recon,
            const torch::Tensor& mean, const std::string& png_path,
            const std::string& csv_path);

torch::Tensor read_heatmap_csv(const std::string& path);

}  // namespace aegan
