#include "aegan/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "aegan/errors.hpp"
#include "aegan/wav.hpp"

namespace fs = std::filesystem;

namespace aegan {

namespace {

// Explicit sampling on top of mt19937_64 keeps generated corpora
// reproducible across standard libraries.
struct Rng {
  std::mt19937_64 engine;
  explicit Rng(uint64_t seed) : engine(seed) {}

  double uniform() {
    return static_cast<double>(engine() >> 11) * (1.0 / 9007199254740992.0);
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() {
    double u1 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }
};

uint64_t clip_seed(int64_t corpus_seed, int kind, int index) {
  uint64_t h = static_cast<uint64_t>(corpus_seed) * 0x9E3779B97F4A7C15ull;
  h ^= static_cast<uint64_t>(kind) * 0xBF58476D1CE4E5B9ull;
  h ^= static_cast<uint64_t>(index) * 0x94D049BB133111EBull;
  h ^= h >> 31;
  return h * 0xD6E8FEB86659FD93ull + 1;
}

struct ClipSpec {
  bool target = false;
  std::string anomaly_type;  // empty = normal
  double anomaly_gain = 0;
  // filled during synthesis for the manifest
  double t_start = 0, t_end = 0, f_low = 0, f_high = 0;
};

// dB-per-octave tilt relative to 500 Hz, used for the target domain.
double tilt_gain(double freq, double tilt_db) {
  if (freq <= 0) return 1.0;
  return std::pow(10.0, tilt_db * std::log2(freq / 500.0) / 20.0);
}

std::vector<float> synth_clip(Rng& rng, const SynthConfig& cfg, int fs,
                              ClipSpec& spec) {
  const auto n = static_cast<int64_t>(std::llround(cfg.clip_seconds * fs));
  std::vector<double> x(n, 0.0);
  const double tilt = spec.target ? cfg.domain_shift : 0.0;

  // Harmonic hum.
  const double f0 = 100.0 * rng.uniform(0.95, 1.05);
  const double am_rate = rng.uniform(2.0, 8.0);
  const double am_phase = rng.uniform(0.0, 2.0 * M_PI);
  std::vector<double> hum(n, 0.0);
  for (int k = 1; k * f0 <= 4000.0; ++k) {
    const double fk = k * f0;
    const double amp = 0.22 / std::pow(k, 0.8) * rng.uniform(0.8, 1.2) *
                       tilt_gain(fk, tilt);
    const double phase = rng.uniform(0.0, 2.0 * M_PI);
    for (int64_t i = 0; i < n; ++i)
      hum[i] += amp * std::sin(2.0 * M_PI * fk * i / fs + phase);
  }
  for (int64_t i = 0; i < n; ++i) {
    const double am = 1.0 + 0.1 * std::sin(2.0 * M_PI * am_rate * i / fs + am_phase);
    x[i] += am * hum[i];
  }

  // Narrowband resonance around 2 kHz; band_dropout silences it in a window.
  const double f_res = rng.uniform(1950.0, 2050.0);
  const double a_res = 0.12 * rng.uniform(0.8, 1.2) * tilt_gain(f_res, tilt);
  const double res_phase = rng.uniform(0.0, 2.0 * M_PI);
  std::vector<double> res_env(n, 1.0);
  if (spec.anomaly_type == "band_dropout") {
    const double win = rng.uniform(3.0, 6.0);
    const double t0 = rng.uniform(0.5, cfg.clip_seconds - win - 0.5);
    const double ramp = 0.05;
    for (int64_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / fs;
      double e = 1.0;
      if (t >= t0 && t <= t0 + win) {
        e = 0.0;
        if (t < t0 + ramp) e = 0.5 + 0.5 * std::cos(M_PI * (t - t0) / ramp);
        if (t > t0 + win - ramp)
          e = 0.5 + 0.5 * std::cos(M_PI * (t0 + win - t) / ramp);
      }
      res_env[i] = e;
    }
    spec.t_start = t0;
    spec.t_end = t0 + win;
    spec.f_low = f_res - 100.0;
    spec.f_high = f_res + 100.0;
  }
  for (int64_t i = 0; i < n; ++i)
    x[i] += res_env[i] * a_res * std::sin(2.0 * M_PI * f_res * i / fs + res_phase);

  // Low-passed noise floor plus a faint broadband hiss.
  const double sigma = 0.02 * rng.uniform(0.8, 1.2);
  const double hiss_gain = 1.0 + (tilt_gain(2000.0, tilt) - 1.0) * 0.5;
  double lp = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double w = rng.normal();
    lp = 0.9 * lp + 0.1 * w;
    x[i] += sigma * (6.0 * lp + 0.5 * w * hiss_gain);
  }

  if (spec.anomaly_type == "impulse_train") {
    const double win = rng.uniform(3.0, 6.0);
    const double t0 = rng.uniform(0.5, cfg.clip_seconds - win - 0.5);
    const double period = rng.uniform(0.25, 0.6);
    const double burst_len = 0.003;
    for (double t = t0; t + burst_len < t0 + win; t += period) {
      const auto start = static_cast<int64_t>(t * fs);
      const auto len = static_cast<int64_t>(burst_len * fs);
      for (int64_t i = 0; i < len && start + i < n; ++i) {
        const double env = std::exp(-3.0 * i / static_cast<double>(len));
        x[start + i] += spec.anomaly_gain * env * rng.normal();
      }
    }
    spec.t_start = t0;
    spec.t_end = t0 + win;
    spec.f_low = 0.0;
    spec.f_high = fs / 2.0;
  } else if (spec.anomaly_type == "tone_shift") {
    const double win = rng.uniform(3.0, 6.0);
    const double t0 = rng.uniform(0.5, cfg.clip_seconds - win - 0.5);
    const double fa = rng.uniform(2800.0, 5500.0);
    const double phase = rng.uniform(0.0, 2.0 * M_PI);
    const double amp = spec.anomaly_gain * 0.35;
    const auto i0 = static_cast<int64_t>(t0 * fs);
    const auto i1 = static_cast<int64_t>((t0 + win) * fs);
    for (int64_t i = i0; i < std::min(i1, n); ++i)
      x[i] += amp * std::sin(2.0 * M_PI * fa * i / fs + phase);
    spec.t_start = t0;
    spec.t_end = t0 + win;
    spec.f_low = fa - 50.0;
    spec.f_high = fa + 50.0;
  }

  // Keep peaks inside full scale without touching typical levels.
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  const double gain = peak > 0.95 ? 0.95 / peak : 1.0;

  std::vector<float> out(n);
  for (int64_t i = 0; i < n; ++i) out[i] = static_cast<float>(x[i] * gain);
  return out;
}

std::string make_name(int section, const std::string& domain,
                      const std::string& split, const std::string& label,
                      int index) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "section_%02d_%s_%s_%s_%04d_synth", section,
                domain.c_str(), split.c_str(), label.c_str(), index);
  return buf;
}

}  // namespace

SynthResult synth_corpus(const SynthConfig& cfg, int sample_rate_hz,
                         const std::string& out_root) {
  cfg.validate();
  const fs::path machine_dir = fs::path(out_root) / cfg.machine_type;
  fs::create_directories(machine_dir / "train");
  fs::create_directories(machine_dir / "test");

  const int n_train =
      std::max(1, static_cast<int>(std::lround(cfg.n_normal * cfg.train_fraction)));
  const int n_test_normal = cfg.n_normal - n_train;

  std::vector<ManifestRow> manifest;

  auto emit = [&](int kind, int index, const std::string& split,
                  const std::string& label, const std::string& anomaly_type) {
    Rng rng(clip_seed(cfg.seed, kind, index));
    ClipSpec spec;
    spec.target = rng.uniform() < cfg.target_fraction;
    spec.anomaly_type = anomaly_type;
    spec.anomaly_gain = cfg.anomaly_gain;

    const std::string domain = spec.target ? "target" : "source";
    const std::string name = make_name(0, domain, split, label, index);
    const auto samples = synth_clip(rng, cfg, sample_rate_hz, spec);
    write_wav16((machine_dir / split / (name + ".wav")).string(), samples,
                sample_rate_hz);

    ManifestRow row;
    row.clip_id = name;
    row.label = label;
    row.anomaly_type = anomaly_type;
    row.t_start = spec.t_start;
    row.t_end = spec.t_end;
    row.f_low = spec.f_low;
    row.f_high = spec.f_high;
    manifest.push_back(row);
  };

  for (int i = 0; i < n_train; ++i) emit(0, i, "train", "normal", "");
  for (int i = 0; i < n_test_normal; ++i) emit(1, i, "test", "normal", "");
  for (int i = 0; i < cfg.n_anomaly; ++i) {
    const auto& type = cfg.anomaly_types[i % cfg.anomaly_types.size()];
    emit(2, i, "test", "anomaly", type);
  }

  const std::string manifest_path = (machine_dir / "manifest.csv").string();
  std::ofstream out(manifest_path);
  if (!out) throw IoError("cannot write manifest: " + manifest_path);
  out << "clip_id,label,anomaly_type,t_start,t_end,f_low,f_high\n";
  char buf[512];
  for (const auto& r : manifest) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%s,%.9g,%.9g,%.9g,%.9g\n",
                  r.clip_id.c_str(), r.label.c_str(), r.anomaly_type.c_str(),
                  r.t_start, r.t_end, r.f_low, r.f_high);
    out << buf;
  }

  return {n_train, n_test_normal, cfg.n_anomaly, manifest_path};
}

std::vector<ManifestRow> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path);
  std::string line;
  std::getline(in, line);  // header
  std::vector<ManifestRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::vector<std::string> f;
    std::string field;
    while (std::getline(ss, field, ',')) f.push_back(field);
    while (f.size() < 7) f.emplace_back();
    rows.push_back({f[0], f[1], f[2], f[3].empty() ? 0 : std::stod(f[3]),
                    f[4].empty() ? 0 : std::stod(f[4]),
                    f[5].empty() ? 0 : std::stod(f[5]),
                    f[6].empty() ? 0 : std::stod(f[6])});
  }
  return rows;
}

}  // namespace aegan
