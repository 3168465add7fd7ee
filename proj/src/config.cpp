#include "aegan/config.hpp"

#include <fstream>
#include <sstream>

namespace aegan {

std::string to_string(NormScheme s) {
  switch (s) {
    case NormScheme::kLayerNormBoth:
      return "ln_both";
    case NormScheme::kBatchNormGeneratorLayerNormCritic:
      return "bn_generator_ln_critic";
  }
  throw ConfigError("unknown norm scheme");
}

std::string to_string(AggregateMode m) {
  return m == AggregateMode::kMean ? "mean" : "max";
}

NormScheme norm_scheme_from_string(const std::string& s) {
  if (s == "ln_both") return NormScheme::kLayerNormBoth;
  if (s == "bn_generator_ln_critic")
    return NormScheme::kBatchNormGeneratorLayerNormCritic;
  throw ConfigError("unknown norm scheme: " + s);
}

AggregateMode aggregate_mode_from_string(const std::string& s) {
  if (s == "mean") return AggregateMode::kMean;
  if (s == "max") return AggregateMode::kMax;
  throw ConfigError("unknown aggregate mode: " + s);
}

void FrontendConfig::validate() const {
  if (sample_rate_hz <= 0) throw ConfigError("sample_rate_hz must be positive");
  if (n_fft <= 0) throw ConfigError("n_fft must be positive");
  if (hop_length <= 0) throw ConfigError("hop_length must be positive");
  if (n_mels <= 0) throw ConfigError("n_mels must be positive");
  if (log_floor <= 0) throw ConfigError("log_floor must be positive");
  if (segment_frames <= 0) throw ConfigError("segment_frames must be positive");
  if (segment_hop_frames <= 0 || segment_hop_frames > segment_frames)
    throw ConfigError("segment_hop_frames must be in [1, segment_frames]");
  if (window != "hann") throw ConfigError("unsupported window: " + window);
}

void ModelConfig::validate() const {
  if (latent_dim <= 0) throw ConfigError("latent_dim must be positive");
  if (base_channels <= 0) throw ConfigError("base_channels must be positive");
  if (leaky_slope <= 0 || leaky_slope >= 1)
    throw ConfigError("leaky_slope must lie in (0,1)");
  if (embedding_dim != base_channels * 16)
    throw ConfigError(
        "embedding_dim must equal the final stage width (base_channels*16)");
}

void TrainConfig::validate() const {
  if (learning_rate <= 0) throw ConfigError("learning_rate must be positive");
  if (lambda_gp < 0) throw ConfigError("lambda_gp must be nonnegative");
  if (n_critic <= 0) throw ConfigError("n_critic must be positive");
  if (epochs <= 0) throw ConfigError("epochs must be positive");
  if (batch_size < 2)
    throw ConfigError(
        "batch_size must be >= 2 (embedding std is undefined for one sample)");
  if (alpha_fm < 0 || beta_mse < 0)
    throw ConfigError("loss weights must be nonnegative");
}

void DetectionConfig::validate() const {
  if (knn_k <= 0) throw ConfigError("knn_k must be positive");
  if (lof_k <= 0) throw ConfigError("lof_k must be positive");
  if (shrinkage <= 0) throw ConfigError("shrinkage must be positive");
  if (threshold_percentile <= 0 || threshold_percentile >= 1)
    throw ConfigError("threshold_percentile must lie in (0,1)");
}

void EvalConfig::validate() const {
  if (pauc_p <= 0 || pauc_p > 1) throw ConfigError("pauc_p must lie in (0,1]");
}

void SynthConfig::validate() const {
  if (n_normal < 2) throw ConfigError("n_normal must be >= 2");
  if (n_anomaly < 0) throw ConfigError("n_anomaly must be nonnegative");
  if (clip_seconds <= 0) throw ConfigError("clip_seconds must be positive");
  if (train_fraction <= 0 || train_fraction >= 1)
    throw ConfigError("train_fraction must lie in (0,1)");
  if (target_fraction < 0 || target_fraction >= 1)
    throw ConfigError("target_fraction must lie in [0,1)");
  for (const auto& t : anomaly_types)
    if (t != "impulse_train" && t != "tone_shift" && t != "band_dropout")
      throw ConfigError("unknown anomaly type: " + t);
}

void RunConfig::validate() const {
  frontend.validate();
  model.validate();
  train.validate();
  detection.validate();
  evaluation.validate();
  synth.validate();
}

nlohmann::json to_json(const FrontendConfig& c) {
  return {{"sample_rate_hz", c.sample_rate_hz},
          {"n_fft", c.n_fft},
          {"hop_length", c.hop_length},
          {"n_mels", c.n_mels},
          {"window", c.window},
          {"log_floor", c.log_floor},
          {"segment_frames", c.segment_frames},
          {"segment_hop_frames", c.segment_hop_frames},
          {"short_clip_policy",
           c.short_clip_policy == PadPolicy::kReflect ? "reflect" : "error"}};
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"latent_dim", c.latent_dim},
          {"base_channels", c.base_channels},
          {"norm_scheme", to_string(c.norm_scheme)},
          {"leaky_slope", c.leaky_slope},
          {"embedding_dim", c.embedding_dim}};
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"lambda_gp", c.lambda_gp},
          {"n_critic", c.n_critic},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"alpha_fm", c.alpha_fm},
          {"beta_mse", c.beta_mse},
          {"seed", c.seed}};
}

nlohmann::json to_json(const DetectionConfig& c) {
  return {{"knn_k", c.knn_k},
          {"lof_k", c.lof_k},
          {"aggregate", to_string(c.aggregate)},
          {"shrinkage", c.shrinkage},
          {"threshold_percentile", c.threshold_percentile}};
}

nlohmann::json to_json(const EvalConfig& c) { return {{"pauc_p", c.pauc_p}}; }

nlohmann::json to_json(const SynthConfig& c) {
  return {{"n_normal", c.n_normal},
          {"n_anomaly", c.n_anomaly},
          {"seed", c.seed},
          {"anomaly_types", c.anomaly_types},
          {"domain_shift", c.domain_shift},
          {"machine_type", c.machine_type},
          {"clip_seconds", c.clip_seconds},
          {"train_fraction", c.train_fraction},
          {"target_fraction", c.target_fraction},
          {"anomaly_gain", c.anomaly_gain}};
}

nlohmann::json to_json(const RunConfig& c) {
  return {{"frontend", to_json(c.frontend)},   {"model", to_json(c.model)},
          {"train", to_json(c.train)},         {"detection", to_json(c.detection)},
          {"evaluation", to_json(c.evaluation)}, {"synth", to_json(c.synth)}};
}

FrontendConfig frontend_config_from_json(const nlohmann::json& j) {
  FrontendConfig c;
  c.sample_rate_hz = j.at("sample_rate_hz");
  c.n_fft = j.at("n_fft");
  c.hop_length = j.at("hop_length");
  c.n_mels = j.at("n_mels");
  c.window = j.at("window");
  c.log_floor = j.at("log_floor");
  c.segment_frames = j.at("segment_frames");
  c.segment_hop_frames = j.at("segment_hop_frames");
  c.short_clip_policy = j.at("short_clip_policy") == "reflect"
                            ? PadPolicy::kReflect
                            : PadPolicy::kError;
  return c;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.latent_dim = j.at("latent_dim");
  c.base_channels = j.at("base_channels");
  c.norm_scheme = norm_scheme_from_string(j.at("norm_scheme"));
  c.leaky_slope = j.at("leaky_slope");
  c.embedding_dim = j.at("embedding_dim");
  return c;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.learning_rate = j.at("learning_rate");
  c.adam_beta1 = j.at("adam_beta1");
  c.adam_beta2 = j.at("adam_beta2");
  c.lambda_gp = j.at("lambda_gp");
  c.n_critic = j.at("n_critic");
  c.epochs = j.at("epochs");
  c.batch_size = j.at("batch_size");
  c.alpha_fm = j.at("alpha_fm");
  c.beta_mse = j.at("beta_mse");
  c.seed = j.at("seed");
  return c;
}

DetectionConfig detection_config_from_json(const nlohmann::json& j) {
  DetectionConfig c;
  c.knn_k = j.at("knn_k");
  c.lof_k = j.at("lof_k");
  c.aggregate = aggregate_mode_from_string(j.at("aggregate"));
  c.shrinkage = j.at("shrinkage");
  c.threshold_percentile = j.at("threshold_percentile");
  return c;
}

EvalConfig eval_config_from_json(const nlohmann::json& j) {
  EvalConfig c;
  c.pauc_p = j.at("pauc_p");
  return c;
}

SynthConfig synth_config_from_json(const nlohmann::json& j) {
  SynthConfig c;
  c.n_normal = j.at("n_normal");
  c.n_anomaly = j.at("n_anomaly");
  c.seed = j.at("seed");
  c.anomaly_types = j.at("anomaly_types").get<std::vector<std::string>>();
  c.domain_shift = j.at("domain_shift");
  c.machine_type = j.at("machine_type");
  c.clip_seconds = j.at("clip_seconds");
  c.train_fraction = j.at("train_fraction");
  c.target_fraction = j.at("target_fraction");
  c.anomaly_gain = j.at("anomaly_gain");
  return c;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  c.frontend = frontend_config_from_json(j.at("frontend"));
  c.model = model_config_from_json(j.at("model"));
  c.train = train_config_from_json(j.at("train"));
  c.detection = detection_config_from_json(j.at("detection"));
  c.evaluation = eval_config_from_json(j.at("evaluation"));
  c.synth = synth_config_from_json(j.at("synth"));
  return c;
}

uint64_t config_hash(const nlohmann::json& j) {
  const std::string s = j.dump();
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

uint64_t frontend_hash(const FrontendConfig& c) { return config_hash(to_json(c)); }
uint64_t model_hash(const ModelConfig& c) { return config_hash(to_json(c)); }

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

void apply_config_line(RunConfig& cfg, const std::string& key,
                       const std::string& value) {
  auto as_int = [&] { return std::stoi(value); };
  auto as_i64 = [&] { return static_cast<int64_t>(std::stoll(value)); };
  auto as_real = [&] { return std::stod(value); };

  if (key == "frontend.sample_rate_hz") cfg.frontend.sample_rate_hz = as_int();
  else if (key == "frontend.n_fft") cfg.frontend.n_fft = as_int();
  else if (key == "frontend.hop_length") cfg.frontend.hop_length = as_int();
  else if (key == "frontend.n_mels") cfg.frontend.n_mels = as_int();
  else if (key == "frontend.window") cfg.frontend.window = value;
  else if (key == "frontend.log_floor") cfg.frontend.log_floor = as_real();
  else if (key == "frontend.segment_frames") cfg.frontend.segment_frames = as_int();
  else if (key == "frontend.segment_hop_frames") cfg.frontend.segment_hop_frames = as_int();
  else if (key == "frontend.short_clip_policy")
    cfg.frontend.short_clip_policy =
        value == "reflect" ? PadPolicy::kReflect : PadPolicy::kError;
  else if (key == "model.latent_dim") cfg.model.latent_dim = as_int();
  else if (key == "model.base_channels") cfg.model.base_channels = as_int();
  else if (key == "model.norm_scheme") cfg.model.norm_scheme = norm_scheme_from_string(value);
  else if (key == "model.leaky_slope") cfg.model.leaky_slope = as_real();
  else if (key == "model.embedding_dim") cfg.model.embedding_dim = as_int();
  else if (key == "train.learning_rate") cfg.train.learning_rate = as_real();
  else if (key == "train.adam_beta1") cfg.train.adam_beta1 = as_real();
  else if (key == "train.adam_beta2") cfg.train.adam_beta2 = as_real();
  else if (key == "train.lambda_gp") cfg.train.lambda_gp = as_real();
  else if (key == "train.n_critic") cfg.train.n_critic = as_int();
  else if (key == "train.epochs") cfg.train.epochs = as_int();
  else if (key == "train.batch_size") cfg.train.batch_size = as_int();
  else if (key == "train.alpha_fm") cfg.train.alpha_fm = as_real();
  else if (key == "train.beta_mse") cfg.train.beta_mse = as_real();
  else if (key == "train.seed") cfg.train.seed = as_i64();
  else if (key == "detection.knn_k") cfg.detection.knn_k = as_int();
  else if (key == "detection.lof_k") cfg.detection.lof_k = as_int();
  else if (key == "detection.aggregate") cfg.detection.aggregate = aggregate_mode_from_string(value);
  else if (key == "detection.shrinkage") cfg.detection.shrinkage = as_real();
  else if (key == "detection.threshold_percentile") cfg.detection.threshold_percentile = as_real();
  else if (key == "evaluation.pauc_p") cfg.evaluation.pauc_p = as_real();
  else if (key == "synth.n_normal") cfg.synth.n_normal = as_int();
  else if (key == "synth.n_anomaly") cfg.synth.n_anomaly = as_int();
  else if (key == "synth.seed") cfg.synth.seed = as_i64();
  else if (key == "synth.anomaly_types") cfg.synth.anomaly_types = split_list(value);
  else if (key == "synth.domain_shift") cfg.synth.domain_shift = as_real();
  else if (key == "synth.machine_type") cfg.synth.machine_type = value;
  else if (key == "synth.clip_seconds") cfg.synth.clip_seconds = as_real();
  else if (key == "synth.train_fraction") cfg.synth.train_fraction = as_real();
  else if (key == "synth.target_fraction") cfg.synth.target_fraction = as_real();
  else if (key == "synth.anomaly_gain") cfg.synth.anomaly_gain = as_real();
  else throw ConfigError("unknown config key: " + key);
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) +
                        ": expected key=value");
    apply_config_line(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

}  // namespace aegan
