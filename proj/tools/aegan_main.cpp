// Command-line front door: synth, extract, train, score, select, evaluate,
// localize, stats. Configuration precedence: flags > config file > defaults.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <torch/torch.h>

#include "aegan/config.hpp"
#include "aegan/errors.hpp"
#include "aegan/pipeline.hpp"

namespace {

struct CommonOpts {
  std::string config_file;
  std::vector<std::string> overrides;  // key=value pairs
  std::optional<int64_t> seed;
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_file, "key=value config file");
  cmd->add_option("--set", opts.overrides,
                  "config override (key=value), highest precedence");
  cmd->add_option("--seed", opts.seed, "seed for everything seeded");
  cmd->add_option("--threads", opts.threads, "torch intra-op threads");
}

aegan::RunConfig resolve_config(const CommonOpts& opts) {
  aegan::RunConfig cfg;
  if (!opts.config_file.empty()) aegan::apply_config_file(cfg, opts.config_file);
  for (const auto& kv : opts.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw aegan::ConfigError("--set expects key=value, got: " + kv);
    aegan::apply_config_line(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (opts.seed) {
    cfg.train.seed = *opts.seed;
    cfg.synth.seed = *opts.seed;
  }
  if (opts.threads) torch::set_num_threads(*opts.threads);
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial-autoencoder anomaly detection for machine audio"};
  app.require_subcommand(1);

  CommonOpts opts;

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  std::string synth_out;
  synth->add_option("--out", synth_out, "output dataset root")->required();
  add_common(synth, opts);

  auto* extract = app.add_subcommand("extract", "audio -> segment cache");
  std::string ex_data, ex_machine, ex_cache;
  extract->add_option("--data", ex_data, "dataset root")->required();
  extract->add_option("--machine", ex_machine, "machine type")->required();
  extract->add_option("--cache", ex_cache, "cache root")->required();
  add_common(extract, opts);

  auto* train = app.add_subcommand("train", "train one machine's model");
  std::string tr_machine, tr_data, tr_out;
  train->add_option("--machine", tr_machine, "machine type")->required();
  train->add_option("--data", tr_data, "cache root")->required();
  train->add_option("--out", tr_out, "checkpoint output path")->required();
  add_common(train, opts);

  auto* score = app.add_subcommand("score", "compute all 12 anomaly scores");
  std::string sc_ckpt, sc_data, sc_split, sc_out;
  score->add_option("--ckpt", sc_ckpt, "checkpoint path")->required();
  score->add_option("--data", sc_data, "cache root")->required();
  score->add_option("--split", sc_split, "train|test")->required();
  score->add_option("--out", sc_out, "scores CSV path")->required();
  add_common(score, opts);

  auto* select = app.add_subcommand("select", "pick best score and threshold");
  std::string se_dev, se_train, se_out;
  select->add_option("--scores", se_dev, "labeled dev/test scores CSV")->required();
  select->add_option("--train-scores", se_train, "training-split scores CSV")
      ->required();
  select->add_option("--out", se_out, "selection JSON path")->required();
  add_common(select, opts);

  auto* evaluate = app.add_subcommand("evaluate", "AUC/pAUC/hmean report");
  std::string ev_scores, ev_out, ev_selection;
  evaluate->add_option("--scores", ev_scores, "scores CSV")->required();
  evaluate->add_option("--out", ev_out, "report CSV path")->required();
  evaluate->add_option("--selection", ev_selection, "selection JSON (optional)");
  add_common(evaluate, opts);

  auto* localize = app.add_subcommand("localize", "heatmaps for one clip");
  std::string lo_ckpt, lo_cache, lo_clip, lo_out;
  bool lo_residual = false;
  localize->add_option("--ckpt", lo_ckpt, "checkpoint path")->required();
  localize->add_option("--cache", lo_cache, "cache root (for the training mean)")
      ->required();
  localize->add_option("--clip", lo_clip, "query wav path")->required();
  localize->add_option("--out", lo_out, "output directory")->required();
  localize->add_flag("--residual", lo_residual,
                     "diagnostic |query - reconstruction| map instead");
  add_common(localize, opts);

  auto* stats = app.add_subcommand("stats", "export LN statistics per segment");
  std::string st_ckpt, st_cache, st_split = "train", st_net = "critic", st_out;
  stats->add_option("--ckpt", st_ckpt, "checkpoint path")->required();
  stats->add_option("--cache", st_cache, "cache root")->required();
  stats->add_option("--split", st_split, "train|test");
  stats->add_option("--net", st_net, "generator|critic");
  stats->add_option("--out", st_out, "stats CSV path")->required();
  add_common(stats, opts);

  CLI11_PARSE(app, argc, argv);

  try {
    const aegan::RunConfig cfg = resolve_config(opts);

    if (synth->parsed()) {
      const auto res = aegan::run_synth(cfg, synth_out);
      std::printf("synth: %d train / %d test-normal / %d test-anomaly clips\n",
                  res.n_train, res.n_test_normal, res.n_test_anomaly);
      std::printf("manifest: %s\n", res.manifest_path.c_str());
    } else if (extract->parsed()) {
      const auto res = aegan::run_extract(cfg, ex_data, ex_machine, ex_cache);
      std::printf("extract: %d train clips, %d test clips, scaler a=%.6g b=%.6g\n",
                  res.n_train_clips, res.n_test_clips, res.scaler.a, res.scaler.b);
    } else if (train->parsed()) {
      const auto res = aegan::run_train(cfg, tr_data, tr_machine, tr_out);
      if (!res.epochs.empty()) {
        const auto& last = res.epochs.back();
        std::printf("train: %zu epochs, final critic=%.4g gp=%.4g fm=%.4g mse=%.4g\n",
                    res.epochs.size(), last.critic_loss, last.gp, last.fm, last.mse);
      }
      std::printf("checkpoint: %s\nloss log: %s\n", res.checkpoint_path.c_str(),
                  res.loss_csv_path.c_str());
    } else if (score->parsed()) {
      const auto rows = aegan::run_score(cfg, sc_ckpt, sc_data, sc_split, sc_out);
      std::printf("score: %zu rows -> %s\n", rows.size(), sc_out.c_str());
    } else if (select->parsed()) {
      const auto sel = aegan::run_select(cfg, se_dev, se_train, se_out);
      for (const auto& [machine, name] : sel.best_score)
        std::printf("select: %s -> %s (threshold %.6g%s)\n", machine.c_str(),
                    name.c_str(), sel.threshold.at(machine).threshold,
                    sel.threshold.at(machine).degenerate ? ", degenerate" : "");
    } else if (evaluate->parsed()) {
      std::optional<std::string> sel;
      if (!ev_selection.empty()) sel = ev_selection;
      const auto report = aegan::run_evaluate(cfg, ev_scores, sel, ev_out);
      std::fputs(aegan::format_report_table(report).c_str(), stdout);
    } else if (localize->parsed()) {
      const auto res =
          aegan::run_localize(cfg, lo_ckpt, lo_cache, lo_clip, lo_out, lo_residual);
      std::printf("localize: %zu segment heatmaps, clip heatmap %s\n",
                  res.segment_pngs.size(), res.clip_png.c_str());
    } else if (stats->parsed()) {
      const auto path = aegan::run_stats(cfg, st_ckpt, st_cache, st_split, st_net,
                                         st_out);
      std::printf("stats: %s\n", path.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
