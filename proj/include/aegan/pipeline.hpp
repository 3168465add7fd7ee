#pragma once

// End-to-end stage runners behind the CLI subcommands. Each runner reads and
// writes the on-disk artifacts (wav tree, segment caches, checkpoints, score
// tables, reports) and enforces config-hash consistency between them.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aegan/config.hpp"
#include "aegan/detection.hpp"
#include "aegan/evaluation.hpp"
#include "aegan/synth.hpp"
#include "aegan/training.hpp"

namespace aegan {

SynthResult run_synth(const RunConfig& cfg, const std::string& out_root);

struct ExtractResult {
  std::string train_stem;  // cache file stems (without .bin/.json)
  std::string test_stem;
  int n_train_clips = 0;
  int n_test_clips = 0;
  Scaler scaler;
};

// Scans <data_root>, extracts one machine, fits the scaler on the training
// split only, and writes per-split segment caches under <cache_root>/<machine>/.
ExtractResult run_extract(const RunConfig& cfg, const std::string& data_root,
                          const std::string& machine, const std::string& cache_root);

struct TrainRunResult {
  std::string checkpoint_path;
  std::string loss_csv_path;
  std::vector<EpochRecord> epochs;
};

TrainRunResult run_train(const RunConfig& cfg, const std::string& cache_root,
                         const std::string& machine, const std::string& out_ckpt,
                         const StepObserver& observer = {});

// Scores every clip of one cached split under all 12 variants.
std::vector<ScoreRow> run_score(const RunConfig& cfg, const std::string& ckpt_path,
                                const std::string& cache_root,
                                const std::string& split,
                                const std::string& out_csv);

struct Selection {
  std::map<std::string, std::string> best_score;      // machine -> score name
  std::map<std::string, ThresholdFit> threshold;      // machine -> fit
};

Selection run_select(const RunConfig& cfg, const std::string& dev_scores_csv,
                     const std::string& train_scores_csv,
                     const std::string& out_json);
Selection load_selection(const std::string& path);

// Evaluates the selected (or best, when no selection is given) score per
// machine; writes report CSV + JSON and returns the report.
EvalReport run_evaluate(const RunConfig& cfg, const std::string& scores_csv,
                        const std::optional<std::string>& selection_json,
                        const std::string& out_csv);

struct LocalizeResult {
  std::vector<std::string> segment_pngs;
  std::string clip_png;
  std::string clip_csv;
};

LocalizeResult run_localize(const RunConfig& cfg, const std::string& ckpt_path,
                            const std::string& cache_root,
                            const std::string& clip_wav, const std::string& out_dir,
                            bool use_residual = false);

// LN statistics export for downstream visualization; one row per segment.
std::string run_stats(const RunConfig& cfg, const std::string& ckpt_path,
                      const std::string& cache_root, const std::string& split,
                      const std::string& network, const std::string& out_csv);

// Shared helper: batched inference over (M,128,128) segments.
torch::Tensor batched_embeddings(Critic& critic, const torch::Tensor& segments,
                                 int64_t batch = 128);

}  // namespace aegan
