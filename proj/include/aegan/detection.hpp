#pragma once

// Anomaly scoring. Twelve score variants per clip:
//   generator side: sample-space and latent-space residuals, each under
//     L2, L1 and cosine distance (6);
//   embedding side: KNN / LOF / distance-to-mean over critic embeddings,
//     each under cosine and Mahalanobis distance (6).
// Higher always means more anomalous. Distance computations run in double.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "aegan/config.hpp"
#include "aegan/evaluation.hpp"
#include "aegan/model.hpp"

namespace aegan {

// Canonical score names, fixed order (also the tie-break order).
const std::vector<std::string>& all_score_names();
bool is_generator_score(const std::string& name);

// --- metric primitives (double) ---

// 1 - cosine similarity, in [0,2]. Zero vectors: d(0,0)=0, d(0,x)=1.
double cosine_distance(const torch::Tensor& a, const torch::Tensor& b);

// sqrt((a-b)^T cov_inv (a-b)).
double mahalanobis_distance(const torch::Tensor& a, const torch::Tensor& b,
                            const torch::Tensor& cov_inv);

// --- generator-side scores ---

// Pure form: caller supplies the reconstruction and both latents.
// Each tensor is (N, ...); returns name -> (N) double score vector.
std::map<std::string, torch::Tensor> generator_scores_from(
    const torch::Tensor& segments, const torch::Tensor& recon,
    const torch::Tensor& latent, const torch::Tensor& latent_recon);

std::map<std::string, torch::Tensor> generator_scores(Generator& gen,
                                                      const torch::Tensor& segments);

// --- embedding-side scores ---

struct ReferenceSet {
  torch::Tensor embeddings;  // (n, d) double
  torch::Tensor mean;        // (d)
  torch::Tensor cov;         // shrinkage-regularized covariance
  torch::Tensor cov_inv;
  torch::Tensor whitened;  // (n, d): L^-1 (e - mean), so Mahalanobis = Euclidean
  torch::Tensor unit;      // (n, d): row-normalized embeddings for cosine
  int knn_k = 2;
  int lof_k = 20;

  // LOF precomputation per metric: k-distance and local reachability
  // density of every reference point (self always excluded).
  struct LofModel {
    torch::Tensor kdist;  // (n)
    torch::Tensor lrd;    // (n)
  };
  LofModel lof_cos, lof_maha;
};

// Builds the reference from training embeddings (n >= 2). Covariance is the
// sample covariance plus shrinkage*tr(S)/d on the diagonal. The test hook
// `cov_override` substitutes the final (already regularized) covariance.
ReferenceSet build_reference(const torch::Tensor& embeddings,
                             const DetectionConfig& cfg,
                             std::optional<torch::Tensor> cov_override = std::nullopt);

// Scores queries (m, d). exclude_self: query i is reference row i (training
// split); neighbor searches skip that row.
std::map<std::string, torch::Tensor> embedding_scores(const ReferenceSet& ref,
                                                      const torch::Tensor& queries,
                                                      bool exclude_self = false);

// --- clip aggregation & selection ---

double aggregate(const std::vector<double>& segment_scores, AggregateMode mode);

struct ScoreRow {
  std::string clip_id;
  std::string machine;
  int section = 0;
  std::string domain;
  std::string label;  // normal | anomaly | unknown
  std::string score_name;
  double score = 0;
};

void write_scores_csv(const std::string& path, const std::vector<ScoreRow>& rows);
std::vector<ScoreRow> read_scores_csv(const std::string& path);

// Best score per machine by the machine harmonic-mean metric on labeled dev
// rows; ties break lexicographically on score name.
std::map<std::string, std::string> select_best_score(
    const std::vector<ScoreRow>& dev_rows, double pauc_p);

// --- decision threshold ---

struct ThresholdFit {
  double threshold = 0;
  bool degenerate = false;  // constant scores -> fallback value + epsilon
  double shape = 0, scale = 0, shift = 0;
};

// Gamma maximum-likelihood fit over >= 10 training-clip scores; threshold is
// the fitted distribution's `percentile` quantile. Constant scores fall back
// to the constant plus a small epsilon, flagged.
ThresholdFit fit_threshold(const std::vector<double>& training_scores,
                           double percentile = 0.9);

inline bool classify(double score, double threshold) { return score > threshold; }

}  // namespace aegan
