#pragma once

// Configuration for every stage of the pipeline. Each section serializes to
// JSON (persisted next to the artifacts it produced) and hashes to a 64-bit
// fingerprint; loaders compare fingerprints and refuse mismatched artifacts.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "aegan/errors.hpp"

namespace aegan {

enum class PadPolicy { kReflect, kError };
enum class NormScheme { kLayerNormBoth, kBatchNormGeneratorLayerNormCritic };
enum class AggregateMode { kMean, kMax };

std::string to_string(NormScheme s);
std::string to_string(AggregateMode m);
NormScheme norm_scheme_from_string(const std::string& s);
AggregateMode aggregate_mode_from_string(const std::string& s);

struct FrontendConfig {
  int sample_rate_hz = 16000;
  int n_fft = 2048;
  int hop_length = 512;
  int n_mels = 128;
  std::string window = "hann";
  double log_floor = 1e-10;
  int segment_frames = 128;
  int segment_hop_frames = 64;
  PadPolicy short_clip_policy = PadPolicy::kReflect;

  void validate() const;
};

struct ModelConfig {
  int latent_dim = 256;
  int base_channels = 64;
  static constexpr int input_size = 128;  // fixed, 128x128 segments
  NormScheme norm_scheme = NormScheme::kLayerNormBoth;
  double leaky_slope = 0.2;
  int embedding_dim = 1024;

  // Channel widths of the five strided stages.
  std::array<int, 5> stage_channels() const {
    return {base_channels, base_channels * 2, base_channels * 4,
            base_channels * 8, base_channels * 16};
  }

  void validate() const;
};

struct TrainConfig {
  double learning_rate = 2e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.9;
  double lambda_gp = 10.0;
  int n_critic = 1;
  int epochs = 60;
  int batch_size = 512;
  double alpha_fm = 1.0;
  double beta_mse = 1.0;
  int64_t seed = 0;

  void validate() const;
};

struct DetectionConfig {
  int knn_k = 2;
  int lof_k = 20;
  AggregateMode aggregate = AggregateMode::kMean;
  double shrinkage = 1e-3;            // covariance regularizer, relative to tr(S)/d
  double threshold_percentile = 0.9;  // gamma-fit decision threshold

  void validate() const;
};

struct EvalConfig {
  double pauc_p = 0.1;

  void validate() const;
};

struct SynthConfig {
  int n_normal = 200;
  int n_anomaly = 50;
  int64_t seed = 123;
  std::vector<std::string> anomaly_types = {"impulse_train", "tone_shift",
                                            "band_dropout"};
  double domain_shift = 6.0;  // dB of spectral tilt on target-domain clips
  std::string machine_type = "fan";
  double clip_seconds = 10.0;
  double train_fraction = 0.8;    // share of n_normal that goes to train/
  double target_fraction = 0.12;  // share of clips in the target domain
  double anomaly_gain = 0.5;      // planted-anomaly amplitude, frozen after calibration

  void validate() const;
};

struct RunConfig {
  FrontendConfig frontend;
  ModelConfig model;
  TrainConfig train;
  DetectionConfig detection;
  EvalConfig evaluation;
  SynthConfig synth;

  void validate() const;
};

// --- JSON (canonical: nlohmann keeps keys sorted, so dumps are stable) ---
nlohmann::json to_json(const FrontendConfig& c);
nlohmann::json to_json(const ModelConfig& c);
nlohmann::json to_json(const TrainConfig& c);
nlohmann::json to_json(const DetectionConfig& c);
nlohmann::json to_json(const EvalConfig& c);
nlohmann::json to_json(const SynthConfig& c);
nlohmann::json to_json(const RunConfig& c);

FrontendConfig frontend_config_from_json(const nlohmann::json& j);
ModelConfig model_config_from_json(const nlohmann::json& j);
TrainConfig train_config_from_json(const nlohmann::json& j);
DetectionConfig detection_config_from_json(const nlohmann::json& j);
EvalConfig eval_config_from_json(const nlohmann::json& j);
SynthConfig synth_config_from_json(const nlohmann::json& j);
RunConfig run_config_from_json(const nlohmann::json& j);

// FNV-1a over the canonical JSON dump.
uint64_t config_hash(const nlohmann::json& j);
uint64_t frontend_hash(const FrontendConfig& c);
uint64_t model_hash(const ModelConfig& c);

// Key=value config file with dotted keys ("frontend.n_fft=2048", '#' comments).
// Unknown keys are hard errors. Later: CLI flags override file values.
void apply_config_file(RunConfig& cfg, const std::string& path);
void apply_config_line(RunConfig& cfg, const std::string& key, const std::string& value);

}  // namespace aegan
