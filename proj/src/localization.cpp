#include "aegan/localization.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "aegan/errors.hpp"
#include "aegan/png_io.hpp"

namespace aegan {

namespace {

torch::Tensor as_square(const torch::Tensor& t) {
  torch::Tensor x = t;
  if (x.dim() == 3 && x.size(0) == 1) x = x.squeeze(0);
  if (x.dim() != 2) throw InvalidInput("expected a single (F,F) segment");
  return x.to(torch::kFloat32);
}

}  // namespace

MeanSpectrogram mean_spectrogram(const torch::Tensor& training_segments) {
  if (training_segments.dim() != 3 || training_segments.size(0) == 0)
    throw InvalidInput("mean_spectrogram expects a nonempty (M,F,F) tensor");
  MeanSpectrogram m;
  m.values = training_segments.to(torch::kFloat32).mean(0);
  m.sample_count = training_segments.size(0);
  return m;
}

void MeanAccumulator::add(const torch::Tensor& segments) {
  if (segments.dim() != 3) throw InvalidInput("expected (M,F,F) segments");
  torch::Tensor batch_sum = segments.to(torch::kFloat64).sum(0);
  sum = count == 0 ? batch_sum : sum + batch_sum;
  count += segments.size(0);
}

MeanSpectrogram MeanAccumulator::finish() const {
  if (count == 0) throw InvalidInput("mean of an empty corpus");
  MeanSpectrogram m;
  m.values = (sum / static_cast<double>(count)).to(torch::kFloat32);
  m.sample_count = count;
  return m;
}

torch::Tensor heatmap_from(const torch::Tensor& recon, const torch::Tensor& mean) {
  torch::Tensor r = as_square(recon), m = as_square(mean);
  if (!r.sizes().equals(m.sizes()))
    throw InvalidInput("heatmap: reconstruction and mean shapes differ");
  return (r - m).abs();
}

torch::Tensor localize(Generator& gen, const MeanSpectrogram& mean,
                       const torch::Tensor& query_segment) {
  torch::Tensor recon = reconstruct(gen, as_square(query_segment)).squeeze(0);
  return heatmap_from(recon, mean.values);
}

torch::Tensor reconstruction_residual(Generator& gen,
                                      const torch::Tensor& query_segment) {
  torch::Tensor q = as_square(query_segment);
  torch::Tensor recon = reconstruct(gen, q).squeeze(0);
  return (q - recon).abs();
}

torch::Tensor normalize_unit_max(const torch::Tensor& heatmap) {
  const double peak = heatmap.max().item<double>();
  if (peak <= 0) return heatmap.clone();
  return heatmap / peak;
}

torch::Tensor stitch_clip_heatmap(const std::vector<torch::Tensor>& heatmaps,
                                  const std::vector<int64_t>& frame_offsets,
                                  int64_t n_frames) {
  if (heatmaps.empty() || heatmaps.size() != frame_offsets.size())
    throw InvalidInput("stitch: heatmaps and offsets disagree");
  const int64_t bands = heatmaps[0].size(0);
  const int64_t width = heatmaps[0].size(1);
  torch::Tensor acc = torch::zeros({bands, n_frames}, torch::kFloat64);
  torch::Tensor hits = torch::zeros({n_frames}, torch::kFloat64);
  for (size_t i = 0; i < heatmaps.size(); ++i) {
    const int64_t o = frame_offsets[i];
    if (o < 0 || o + width > n_frames)
      throw InvalidInput("stitch: segment extends past the clip");
    acc.index({torch::indexing::Slice(), torch::indexing::Slice(o, o + width)}) +=
        heatmaps[i].to(torch::kFloat64);
    hits.index({torch::indexing::Slice(o, o + width)}) += 1.0;
  }
  if ((hits == 0).any().item<bool>())
    throw InvalidInput("stitch: segments do not cover every frame");
  return (acc / hits.unsqueeze(0)).to(torch::kFloat32);
}

namespace {

void paint_panel(std::vector<uint8_t>& pixels, int width, int row0,
                 const torch::Tensor& panel, double lo, double hi) {
  auto acc = panel.to(torch::kFloat64).contiguous();
  const auto* data = acc.const_data_ptr<double>();
  const auto h = panel.size(0), w = panel.size(1);
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x) {
      const double v = (data[y * w + x] - lo) / (hi - lo);
      const int g = static_cast<int>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
      // flip vertically so low mel bands sit at the bottom of each panel
      pixels[size_t(row0 + (h - 1 - y)) * width + x] = static_cast<uint8_t>(g);
    }
}

}  // namespace

void render(const torch::Tensor& heatmap, const torch::Tensor& recon,
            const torch::Tensor& mean, const std::string& png_path,
            const std::string& csv_path) {
  torch::Tensor h = heatmap.to(torch::kFloat32);
  torch::Tensor r = recon.to(torch::kFloat32), m = mean.to(torch::kFloat32);
  if (h.dim() != 2 || r.dim() != 2 || m.dim() != 2 || h.size(1) != r.size(1) ||
      r.size(1) != m.size(1))
    throw InvalidInput("render: panel widths differ");

  const int width = static_cast<int>(h.size(1));
  const int height = static_cast<int>(r.size(0) + m.size(0) + h.size(0));
  std::vector<uint8_t> pixels(static_cast<size_t>(width) * height, 0);
  paint_panel(pixels, width, 0, r, -1.0, 1.0);
  paint_panel(pixels, width, static_cast<int>(r.size(0)), m, -1.0, 1.0);
  paint_panel(pixels, width, static_cast<int>(r.size(0) + m.size(0)),
              normalize_unit_max(h), 0.0, 1.0);
  write_png_gray(png_path, width, height, pixels);

  std::ofstream out(csv_path);
  if (!out) throw IoError("cannot write heatmap csv: " + csv_path);
  auto acc = h.to(torch::kFloat64).contiguous();
  const auto* data = acc.const_data_ptr<double>();
  char buf[64];
  for (int64_t y = 0; y < h.size(0); ++y) {
    for (int64_t x = 0; x < h.size(1); ++x) {
      std::snprintf(buf, sizeof(buf), "%.9g", data[y * h.size(1) + x]);
      out << buf << (x + 1 == h.size(1) ? "\n" : ",");
    }
  }
}

torch::Tensor read_heatmap_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open heatmap csv: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) row.push_back(std::stod(field));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError("empty heatmap csv: " + path);
  torch::Tensor t = torch::empty({static_cast<int64_t>(rows.size()),
                                  static_cast<int64_t>(rows[0].size())},
                                 torch::kFloat64);
  for (size_t y = 0; y < rows.size(); ++y)
    for (size_t x = 0; x < rows[y].size(); ++x)
      t[static_cast<int64_t>(y)][static_cast<int64_t>(x)] = rows[y][x];
  return t.to(torch::kFloat32);
}

}  // namespace aegan
