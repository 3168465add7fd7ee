#pragma once

// Desk-scale synthetic corpus in the DCASE directory layout. Normal clips
// are a harmonic machine hum with a narrowband resonance and filtered noise;
// anomalous clips plant one labeled defect (impulse train, shifted tone, or
// resonance dropout) with its time-frequency extent written to a manifest.
// Target-domain clips get a spectral tilt. Fully reproducible from the seed.

#include <string>
#include <vector>

#include "aegan/config.hpp"

namespace aegan {

struct ManifestRow {
  std::string clip_id;
  std::string label;         // normal | anomaly
  std::string anomaly_type;  // empty for normal clips
  double t_start = 0, t_end = 0;  // seconds
  double f_low = 0, f_high = 0;   // Hz
};

struct SynthResult {
  int n_train = 0;
  int n_test_normal = 0;
  int n_test_anomaly = 0;
  std::string manifest_path;
};

SynthResult synth_corpus(const SynthConfig& cfg, int sample_rate_hz,
                         const std::string& out_root);

std::vector<ManifestRow> read_manifest(const std::string& path);

}  // namespace aegan
