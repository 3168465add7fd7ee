#pragma once

// Minimal RIFF/WAVE reader/writer for mono PCM clips.

#include <cstdint>
#include <string>
#include <vector>

namespace aegan {

struct Waveform {
  std::vector<float> samples;  // [-1,1] nominal full scale
  int sample_rate_hz = 0;
};

// Accepts mono PCM16/24/32 and IEEE float32. Multi-channel or zero-length
// audio is rejected.
Waveform read_wav(const std::string& path);

void write_wav16(const std::string& path, const std::vector<float>& samples,
                 int sample_rate_hz);

}  // namespace aegan
