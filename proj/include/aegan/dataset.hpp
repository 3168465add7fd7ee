#pragma once

// DCASE-layout corpus ingestion and the extracted-segment cache.
//
// Expected tree: <root>/<machine>/<train|test>/section_NN_<source|target>_
// <train|test>_<normal|anomaly>_<id>[_<attributes>].wav

#include <string>
#include <vector>

#include <torch/torch.h>

#include "aegan/config.hpp"
#include "aegan/frontend.hpp"

namespace aegan {

struct ClipRecord {
  std::string path;
  std::string clip_id;  // filename stem
  std::string machine_type;
  int section = 0;
  std::string domain;  // source | target
  std::string split;   // train | test
  std::string label;   // normal | anomaly | unknown
};

struct ScanReport {
  std::vector<ClipRecord> records;  // ordered by path
  std::vector<std::pair<std::string, std::string>> skipped;  // (path, reason)
};

// Walks the tree; unparseable names land in `skipped` instead of vanishing.
// An anomaly-labeled file under train/ is a validation error.
ScanReport scan_dataset(const std::string& root);

// --- extracted-segment cache, one (machine, split) per file pair ---

struct CacheClip {
  std::string clip_id;
  std::string path;
  int section = 0;
  std::string domain;
  std::string label;
  int64_t seg_begin = 0;  // [seg_begin, seg_end) rows in the segment tensor
  int64_t seg_end = 0;
  int64_t n_frames = 0;
};

struct SegmentCache {
  std::string machine_type;
  std::string split;
  uint64_t frontend_config_hash = 0;
  Scaler scaler;
  torch::Tensor segments;       // (M, F, F) float32
  torch::Tensor frame_offsets;  // (M) int64
  std::vector<CacheClip> clips;
};

// Writes <stem>.bin (tensors) and <stem>.json (metadata).
void save_cache(const SegmentCache& cache, const std::string& stem);
SegmentCache load_cache(const std::string& stem);

}  // namespace aegan
