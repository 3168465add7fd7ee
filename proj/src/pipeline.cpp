#include "aegan/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "aegan/dataset.hpp"
#include "aegan/errors.hpp"
#include "aegan/localization.hpp"
#include "aegan/model.hpp"

namespace fs = std::filesystem;

namespace aegan {

namespace {

template <typename Fn>
torch::Tensor map_batched(const torch::Tensor& segments, int64_t batch, Fn&& fn) {
  std::vector<torch::Tensor> outs;
  for (int64_t i = 0; i < segments.size(0); i += batch) {
    const int64_t end = std::min(i + batch, segments.size(0));
    outs.push_back(fn(segments.index({torch::indexing::Slice(i, end)})));
  }
  return torch::cat(outs, 0);
}

SegmentCache build_split_cache(const RunConfig& cfg,
                               const std::vector<ClipRecord>& clips,
                               const std::vector<LogMel>& raw, const Scaler& scaler,
                               const std::string& machine, const std::string& split) {
  SegmentCache cache;
  cache.machine_type = machine;
  cache.split = split;
  cache.frontend_config_hash = frontend_hash(cfg.frontend);
  cache.scaler = scaler;

  std::vector<torch::Tensor> seg_tensors;
  std::vector<int64_t> offsets;
  int64_t cursor = 0;
  for (size_t i = 0; i < clips.size(); ++i) {
    LogMel scaled = scale_affine(raw[i], scaler);
    SegmentBatch batch = slice_windows(scaled, cfg.frontend, clips[i].clip_id);
    seg_tensors.push_back(batch.values);
    offsets.insert(offsets.end(), batch.frame_offsets.begin(),
                   batch.frame_offsets.end());
    CacheClip cc;
    cc.clip_id = clips[i].clip_id;
    cc.path = clips[i].path;
    cc.section = clips[i].section;
    cc.domain = clips[i].domain;
    cc.label = clips[i].label;
    cc.seg_begin = cursor;
    cursor += batch.values.size(0);
    cc.seg_end = cursor;
    cc.n_frames = raw[i].values.size(1);
    cache.clips.push_back(cc);
  }
  cache.segments = torch::cat(seg_tensors, 0);
  cache.frame_offsets =
      torch::from_blob(offsets.data(), {static_cast<int64_t>(offsets.size())},
                       torch::kInt64)
          .clone();
  return cache;
}

}  // namespace

SynthResult run_synth(const RunConfig& cfg, const std::string& out_root) {
  cfg.synth.validate();
  SynthResult res = synth_corpus(cfg.synth, cfg.frontend.sample_rate_hz, out_root);
  nlohmann::json meta = {{"synth", to_json(cfg.synth)},
                         {"sample_rate_hz", cfg.frontend.sample_rate_hz},
                         {"synth_hash", config_hash(to_json(cfg.synth))}};
  std::ofstream out(fs::path(out_root) / "synth_config.json");
  out << meta.dump(2) << "\n";
  return res;
}

ExtractResult run_extract(const RunConfig& cfg, const std::string& data_root,
                          const std::string& machine, const std::string& cache_root) {
  cfg.frontend.validate();
  ScanReport scan = scan_dataset(data_root);

  std::vector<ClipRecord> train_clips, test_clips;
  for (const auto& r : scan.records) {
    if (r.machine_type != machine) continue;
    (r.split == "train" ? train_clips : test_clips).push_back(r);
  }
  if (train_clips.empty())
    throw InvalidInput("no training clips for machine '" + machine + "'");

  auto extract_raw = [&](const std::vector<ClipRecord>& clips) {
    std::vector<LogMel> out;
    out.reserve(clips.size());
    for (const auto& c : clips)
      out.push_back(log_mel(load_audio(c.path, cfg.frontend), cfg.frontend));
    return out;
  };
  std::vector<LogMel> train_raw = extract_raw(train_clips);
  std::vector<LogMel> test_raw = extract_raw(test_clips);

  const Scaler scaler = fit_scaler(train_raw);

  const fs::path dir = fs::path(cache_root) / machine;
  fs::create_directories(dir);
  ExtractResult res;
  res.scaler = scaler;
  res.n_train_clips = static_cast<int>(train_clips.size());
  res.n_test_clips = static_cast<int>(test_clips.size());
  res.train_stem = (dir / "train").string();
  save_cache(build_split_cache(cfg, train_clips, train_raw, scaler, machine, "train"),
             res.train_stem);
  if (!test_clips.empty()) {
    res.test_stem = (dir / "test").string();
    save_cache(build_split_cache(cfg, test_clips, test_raw, scaler, machine, "test"),
               res.test_stem);
  }
  return res;
}

TrainRunResult run_train(const RunConfig& cfg, const std::string& cache_root,
                         const std::string& machine, const std::string& out_ckpt,
                         const StepObserver& observer) {
  cfg.validate();
  SegmentCache cache = load_cache((fs::path(cache_root) / machine / "train").string());
  if (cache.frontend_config_hash != frontend_hash(cfg.frontend))
    throw ConfigError("cache was extracted under a different frontend config");
  for (const auto& c : cache.clips)
    if (c.label != "normal")
      throw InvalidInput("training cache contains a non-normal clip: " + c.clip_id);

  auto [gen, critic] = init_models(cfg.model, cfg.train.seed);

  Checkpoint ckpt;
  ckpt.model = cfg.model;
  ckpt.frontend = cfg.frontend;
  ckpt.train = cfg.train;
  ckpt.scaler = cache.scaler;
  ckpt.machine_type = machine;
  ckpt.gen = gen;
  ckpt.critic = critic;

  TrainResult result;
  try {
    result = train_loop(gen, critic, cache.segments, cfg.train, observer);
  } catch (const NumericError&) {
    // keep the blown-up state inspectable, then surface the failure
    ckpt.step = -1;
    save_checkpoint(ckpt, out_ckpt + ".aborted");
    throw;
  }
  ckpt.step = result.total_steps;
  save_checkpoint(ckpt, out_ckpt);

  TrainRunResult run;
  run.checkpoint_path = out_ckpt;
  run.loss_csv_path = out_ckpt + ".loss.csv";
  run.epochs = result.epochs;
  write_loss_csv(run.loss_csv_path, result.epochs);
  return run;
}

torch::Tensor batched_embeddings(Critic& critic, const torch::Tensor& segments,
                                 int64_t batch) {
  return map_batched(segments, batch, [&](const torch::Tensor& s) {
    return discriminate(critic, s).second;
  });
}

std::vector<ScoreRow> run_score(const RunConfig& cfg, const std::string& ckpt_path,
                                const std::string& cache_root,
                                const std::string& split,
                                const std::string& out_csv) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  const std::string machine = ckpt.machine_type;

  SegmentCache train_cache =
      load_cache((fs::path(cache_root) / machine / "train").string());
  SegmentCache query_cache =
      split == "train"
          ? train_cache
          : load_cache((fs::path(cache_root) / machine / split).string());

  const uint64_t fe_hash = frontend_hash(ckpt.frontend);
  if (train_cache.frontend_config_hash != fe_hash ||
      query_cache.frontend_config_hash != fe_hash)
    throw ConfigError("checkpoint and cache frontend configs disagree");
  if (train_cache.scaler.a != ckpt.scaler.a || train_cache.scaler.b != ckpt.scaler.b)
    throw ConfigError("checkpoint and cache scalers disagree");

  // Reference embeddings come from the training split of the same machine.
  torch::Tensor ref_emb = batched_embeddings(ckpt.critic, train_cache.segments);
  ReferenceSet ref = build_reference(ref_emb, cfg.detection);

  torch::Tensor queries = query_cache.segments;
  torch::Tensor recon = map_batched(
      queries, 128, [&](const torch::Tensor& s) { return reconstruct(ckpt.gen, s); });
  torch::Tensor z = map_batched(
      queries, 128, [&](const torch::Tensor& s) { return encode(ckpt.gen, s); });
  torch::Tensor z_recon = map_batched(
      recon, 128, [&](const torch::Tensor& s) { return encode(ckpt.gen, s); });
  auto gen_scores = generator_scores_from(queries, recon, z, z_recon);

  torch::Tensor query_emb =
      split == "train" ? ref_emb : batched_embeddings(ckpt.critic, queries);
  auto emb_scores = embedding_scores(ref, query_emb, /*exclude_self=*/split == "train");

  std::map<std::string, torch::Tensor> all_scores = gen_scores;
  all_scores.insert(emb_scores.begin(), emb_scores.end());

  std::vector<ScoreRow> rows;
  for (const auto& clip : query_cache.clips) {
    for (const auto& name : all_score_names()) {
      const torch::Tensor seg_scores = all_scores.at(name);
      std::vector<double> values;
      for (int64_t i = clip.seg_begin; i < clip.seg_end; ++i)
        values.push_back(seg_scores[i].item<double>());
      ScoreRow row;
      row.clip_id = clip.clip_id;
      row.machine = machine;
      row.section = clip.section;
      row.domain = clip.domain;
      row.label = clip.label;
      row.score_name = name;
      row.score = aggregate(values, cfg.detection.aggregate);
      rows.push_back(std::move(row));
    }
  }
  write_scores_csv(out_csv, rows);

  nlohmann::json meta = {{"machine", machine},
                         {"split", split},
                         {"frontend_hash", fe_hash},
                         {"model_hash", model_hash(ckpt.model)},
                         {"detection", to_json(cfg.detection)}};
  std::ofstream side(out_csv + ".json");
  side << meta.dump(2) << "\n";
  return rows;
}

Selection run_select(const RunConfig& cfg, const std::string& dev_scores_csv,
                     const std::string& train_scores_csv,
                     const std::string& out_json) {
  const auto dev_rows = read_scores_csv(dev_scores_csv);
  const auto train_rows = read_scores_csv(train_scores_csv);

  Selection sel;
  sel.best_score = select_best_score(dev_rows, cfg.evaluation.pauc_p);
  for (const auto& [machine, name] : sel.best_score) {
    std::vector<double> scores;
    for (const auto& r : train_rows)
      if (r.machine == machine && r.score_name == name) scores.push_back(r.score);
    sel.threshold[machine] = fit_threshold(scores, cfg.detection.threshold_percentile);
  }

  nlohmann::json j;
  for (const auto& [machine, name] : sel.best_score) {
    const auto& fit = sel.threshold.at(machine);
    j[machine] = {{"score_name", name},
                  {"threshold", fit.threshold},
                  {"degenerate", fit.degenerate},
                  {"shape", fit.shape},
                  {"scale", fit.scale},
                  {"shift", fit.shift}};
  }
  std::ofstream out(out_json);
  if (!out) throw IoError("cannot write selection: " + out_json);
  out << j.dump(2) << "\n";
  return sel;
}

Selection load_selection(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open selection: " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  Selection sel;
  for (const auto& [machine, entry] : j.items()) {
    sel.best_score[machine] = entry.at("score_name");
    ThresholdFit fit;
    fit.threshold = entry.at("threshold");
    fit.degenerate = entry.at("degenerate");
    fit.shape = entry.at("shape");
    fit.scale = entry.at("scale");
    fit.shift = entry.at("shift");
    sel.threshold[machine] = fit;
  }
  return sel;
}

EvalReport run_evaluate(const RunConfig& cfg, const std::string& scores_csv,
                        const std::optional<std::string>& selection_json,
                        const std::string& out_csv) {
  const auto rows = read_scores_csv(scores_csv);

  std::map<std::string, std::string> chosen;
  if (selection_json) {
    chosen = load_selection(*selection_json).best_score;
  } else {
    chosen = select_best_score(rows, cfg.evaluation.pauc_p);
  }

  std::vector<MachineReport> reports;
  for (const auto& [machine, name] : chosen) {
    std::vector<ClipScore> clip_rows;
    std::vector<double> all_scores;
    std::vector<int> all_labels;
    for (const auto& r : rows) {
      if (r.machine != machine || r.score_name != name) continue;
      clip_rows.push_back({r.clip_id, r.machine, r.section, r.domain, r.label,
                           r.score});
      if (r.label == "normal" || r.label == "anomaly") {
        all_scores.push_back(r.score);
        all_labels.push_back(r.label == "anomaly" ? 1 : 0);
      }
    }
    MachineReport rep = machine_report(clip_rows, machine, name, cfg.evaluation.pauc_p);
    rep.metrics["auc_all"] = auc(all_scores, all_labels);
    reports.push_back(std::move(rep));
  }

  EvalReport report = overall_report(reports);
  write_report_csv(out_csv, report);
  std::ofstream side(out_csv + ".json");
  side << report_to_json(report).dump(2) << "\n";
  return report;
}

LocalizeResult run_localize(const RunConfig& cfg, const std::string& ckpt_path,
                            const std::string& cache_root,
                            const std::string& clip_wav, const std::string& out_dir,
                            bool use_residual) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  SegmentCache train_cache =
      load_cache((fs::path(cache_root) / ckpt.machine_type / "train").string());
  if (train_cache.frontend_config_hash != frontend_hash(ckpt.frontend))
    throw ConfigError("checkpoint and cache frontend configs disagree");

  MeanSpectrogram mean = mean_spectrogram(train_cache.segments);
  mean.machine_type = ckpt.machine_type;
  mean.config_hash = train_cache.frontend_config_hash;

  const Waveform w = load_audio(clip_wav, ckpt.frontend);
  LogMel scaled = scale_affine(log_mel(w, ckpt.frontend), ckpt.scaler);
  SegmentBatch segs =
      slice_windows(scaled, ckpt.frontend, fs::path(clip_wav).stem().string());

  fs::create_directories(out_dir);
  LocalizeResult res;
  std::vector<torch::Tensor> heatmaps, recons, mean_tiles;
  for (int64_t i = 0; i < segs.values.size(0); ++i) {
    torch::Tensor query = segs.values[i];
    torch::Tensor recon = reconstruct(ckpt.gen, query).squeeze(0);
    torch::Tensor heat = use_residual ? (query - recon).abs()
                                      : heatmap_from(recon, mean.values);
    const std::string stem =
        (fs::path(out_dir) / (segs.clip_id + "_seg" + std::to_string(i))).string();
    render(heat, recon, mean.values, stem + ".png", stem + ".csv");
    res.segment_pngs.push_back(stem + ".png");
    heatmaps.push_back(heat);
    recons.push_back(recon);
    mean_tiles.push_back(mean.values);
  }

  const int64_t n_frames = std::max<int64_t>(scaled.values.size(1),
                                             cfg.frontend.segment_frames);
  torch::Tensor clip_heat =
      stitch_clip_heatmap(heatmaps, segs.frame_offsets, n_frames);
  torch::Tensor clip_recon =
      stitch_clip_heatmap(recons, segs.frame_offsets, n_frames);
  torch::Tensor clip_mean =
      stitch_clip_heatmap(mean_tiles, segs.frame_offsets, n_frames);
  const std::string clip_stem =
      (fs::path(out_dir) / (segs.clip_id + "_clip")).string();
  render(clip_heat, clip_recon, clip_mean, clip_stem + ".png", clip_stem + ".csv");
  res.clip_png = clip_stem + ".png";
  res.clip_csv = clip_stem + ".csv";
  return res;
}

std::string run_stats(const RunConfig& cfg, const std::string& ckpt_path,
                      const std::string& cache_root, const std::string& split,
                      const std::string& network, const std::string& out_csv) {
  (void)cfg;
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  SegmentCache cache =
      load_cache((fs::path(cache_root) / ckpt.machine_type / split).string());
  if (cache.frontend_config_hash != frontend_hash(ckpt.frontend))
    throw ConfigError("checkpoint and cache frontend configs disagree");

  // Fails fast before any heavy work when the generator runs batch norm.
  if (network == "generator" && !ckpt.gen->uses_layer_norm())
    throw ConfigError("generator uses batch norm; choose --net critic instead");

  torch::Tensor stats = map_batched(cache.segments, 128, [&](const torch::Tensor& s) {
    return network == "generator" ? export_ln_stats(ckpt.gen, s)
                                  : export_ln_stats(ckpt.critic, s);
  });

  std::ofstream out(out_csv);
  if (!out) throw IoError("cannot write stats: " + out_csv);
  out << "clip_id,segment";
  for (int64_t j = 0; j < stats.size(1); ++j) out << ",stat_" << j;
  out << "\n";
  auto acc = stats.to(torch::kFloat64).contiguous();
  const double* data = acc.const_data_ptr<double>();
  char buf[64];
  for (const auto& clip : cache.clips) {
    for (int64_t i = clip.seg_begin; i < clip.seg_end; ++i) {
      out << clip.clip_id << "," << (i - clip.seg_begin);
      for (int64_t j = 0; j < stats.size(1); ++j) {
        std::snprintf(buf, sizeof(buf), ",%.9g", data[i * stats.size(1) + j]);
        out << buf;
      }
      out << "\n";
    }
  }
  return out_csv;
}

}  // namespace aegan
