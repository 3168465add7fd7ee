#pragma once

// Deterministic binary container for named tensors (float32 / int64,
// little-endian, entries sorted by name). Used by the dataset cache and
// model checkpoints; metadata travels in a JSON sidecar next to the file.

#include <map>
#include <string>

#include <torch/torch.h>

namespace aegan {

void save_tensors(const std::string& path,
                  const std::map<std::string, torch::Tensor>& tensors);

std::map<std::string, torch::Tensor> load_tensors(const std::string& path);

}  // namespace aegan
