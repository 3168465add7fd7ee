#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace aegan {

// 8-bit grayscale PNG, rows top to bottom, `width*height` bytes.
void write_png_gray(const std::string& path, int width, int height,
                    const std::vector<uint8_t>& pixels);

// Returns (width, height); used by tests to check panel layout.
std::pair<int, int> read_png_size(const std::string& path);

}  // namespace aegan
