#include "aegan/detection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "aegan/errors.hpp"

namespace aegan {

const std::vector<std::string>& all_score_names() {
  static const std::vector<std::string> names = {
      "gen_sample_l2", "gen_sample_l1", "gen_sample_cos",
      "gen_latent_l2", "gen_latent_l1", "gen_latent_cos",
      "emb_knn_cos",   "emb_knn_maha", "emb_lof_cos",
      "emb_lof_maha",  "emb_mean_cos", "emb_mean_maha"};
  return names;
}

bool is_generator_score(const std::string& name) {
  return name.rfind("gen_", 0) == 0;
}

double cosine_distance(const torch::Tensor& a, const torch::Tensor& b) {
  torch::Tensor af = a.flatten().to(torch::kFloat64);
  torch::Tensor bf = b.flatten().to(torch::kFloat64);
  const double na = af.norm().item<double>();
  const double nb = bf.norm().item<double>();
  if (na == 0.0 && nb == 0.0) return 0.0;
  if (na == 0.0 || nb == 0.0) return 1.0;
  const double c = af.dot(bf).item<double>() / (na * nb);
  return std::clamp(1.0 - c, 0.0, 2.0);
}

double mahalanobis_distance(const torch::Tensor& a, const torch::Tensor& b,
                            const torch::Tensor& cov_inv) {
  torch::Tensor d = (a.flatten() - b.flatten()).to(torch::kFloat64);
  torch::Tensor q = d.dot(torch::mv(cov_inv.to(torch::kFloat64), d));
  return std::sqrt(std::max(0.0, q.item<double>()));
}

namespace {

// Row-wise distances between (N, D) tensors, double precision.
torch::Tensor rowwise_l2(const torch::Tensor& a, const torch::Tensor& b) {
  return (a - b).norm(2, 1);
}
torch::Tensor rowwise_l1(const torch::Tensor& a, const torch::Tensor& b) {
  return (a - b).abs().sum(1);
}
torch::Tensor rowwise_cos(const torch::Tensor& a, const torch::Tensor& b) {
  auto na = a.norm(2, 1);
  auto nb = b.norm(2, 1);
  auto dot = (a * b).sum(1);
  auto denom_zero = (na == 0).logical_or(nb == 0);
  auto both_zero = (na == 0).logical_and(nb == 0);
  auto cosine = dot / (na * nb).clamp_min(1e-300);
  auto dist = (1 - cosine).clamp(0.0, 2.0);
  dist = torch::where(denom_zero, torch::ones_like(dist), dist);
  dist = torch::where(both_zero, torch::zeros_like(dist), dist);
  return dist;
}

torch::Tensor flat64(const torch::Tensor& t) {
  return t.reshape({t.size(0), -1}).to(torch::kFloat64);
}

}  // namespace

std::map<std::string, torch::Tensor> generator_scores_from(
    const torch::Tensor& segments, const torch::Tensor& recon,
    const torch::Tensor& latent, const torch::Tensor& latent_recon) {
  if (segments.size(0) != recon.size(0) || latent.size(0) != latent_recon.size(0) ||
      segments.size(0) != latent.size(0))
    throw InvalidInput("generator_scores_from: batch sizes differ");
  auto s = flat64(segments), r = flat64(recon);
  auto z = flat64(latent), zr = flat64(latent_recon);
  if (s.size(1) != r.size(1) || z.size(1) != zr.size(1))
    throw InvalidInput("generator_scores_from: feature sizes differ");
  return {{"gen_sample_l2", rowwise_l2(s, r)},
          {"gen_sample_l1", rowwise_l1(s, r)},
          {"gen_sample_cos", rowwise_cos(s, r)},
          {"gen_latent_l2", rowwise_l2(z, zr)},
          {"gen_latent_l1", rowwise_l1(z, zr)},
          {"gen_latent_cos", rowwise_cos(z, zr)}};
}

std::map<std::string, torch::Tensor> generator_scores(Generator& gen,
                                                      const torch::Tensor& segments) {
  torch::Tensor recon = reconstruct(gen, segments);
  torch::Tensor z = encode(gen, segments);
  torch::Tensor z_recon = encode(gen, recon);
  torch::Tensor s = segments.dim() == 2 ? segments.unsqueeze(0) : segments;
  return generator_scores_from(s, recon, z, z_recon);
}

namespace {

torch::Tensor pairwise_for_metric(const ReferenceSet& ref,
                                  const torch::Tensor& queries, bool cosine) {
  if (cosine) {
    auto qn = queries / queries.norm(2, 1, true).clamp_min(1e-300);
    return (1.0 - torch::mm(qn, ref.unit.t())).clamp(0.0, 2.0);
  }
  // Whitened space: Mahalanobis becomes Euclidean.
  auto diff = queries - ref.mean.unsqueeze(0);
  auto l = torch::linalg_cholesky(ref.cov);
  auto wq = torch::linalg_solve_triangular(l, diff.t(), /*upper=*/false).t();
  return torch::cdist(wq, ref.whitened);
}

struct Neighborhood {
  torch::Tensor dist;  // (m, k)
  torch::Tensor idx;   // (m, k)
};

Neighborhood nearest(const torch::Tensor& d, int k) {
  auto [vals, idx] = torch::topk(d, k, /*dim=*/1, /*largest=*/false);
  return {vals, idx};
}

ReferenceSet::LofModel build_lof(const torch::Tensor& dref, int k) {
  const auto n = dref.size(0);
  auto nb = nearest(dref, k);
  ReferenceSet::LofModel model;
  model.kdist = nb.dist.index({torch::indexing::Slice(), k - 1}).contiguous();
  auto reach = torch::maximum(model.kdist.index({nb.idx}), nb.dist);
  auto reach_sum = reach.sum(1);
  model.lrd = torch::where(
      reach_sum > 0, static_cast<double>(k) / reach_sum,
      torch::full({n}, std::numeric_limits<double>::infinity(), torch::kFloat64));
  return model;
}

torch::Tensor lof_scores(const ReferenceSet::LofModel& model,
                         const torch::Tensor& dq, int k) {
  auto nb = nearest(dq, k);
  auto reach = torch::maximum(model.kdist.index({nb.idx}), nb.dist);
  auto reach_sum = reach.sum(1);
  auto lrd_q = torch::where(
      reach_sum > 0, static_cast<double>(k) / reach_sum,
      torch::full_like(reach_sum, std::numeric_limits<double>::infinity()));
  auto lrd_nb = model.lrd.index({nb.idx}).mean(1);
  auto lof = lrd_nb / lrd_q;
  // inf/inf (query and neighborhood both degenerate) reads as a plain inlier
  lof = torch::where(lof.isnan(), torch::ones_like(lof), lof);
  return lof.clamp_min(0.0);
}

}  // namespace

ReferenceSet build_reference(const torch::Tensor& embeddings,
                             const DetectionConfig& cfg,
                             std::optional<torch::Tensor> cov_override) {
  cfg.validate();
  torch::Tensor e = embeddings.to(torch::kFloat64);
  if (e.dim() != 2 || e.size(0) < 2)
    throw InvalidInput("build_reference needs at least 2 embeddings (n x d)");
  const auto n = e.size(0);
  const auto d = e.size(1);
  if (cfg.knn_k >= n || cfg.lof_k >= n)
    throw ConfigError("knn_k and lof_k must be smaller than the reference size");

  ReferenceSet ref;
  ref.embeddings = e.contiguous();
  ref.knn_k = cfg.knn_k;
  ref.lof_k = cfg.lof_k;
  ref.mean = e.mean(0);

  torch::Tensor centered = e - ref.mean.unsqueeze(0);
  if (cov_override) {
    ref.cov = cov_override->to(torch::kFloat64);
  } else {
    torch::Tensor cov = torch::mm(centered.t(), centered) / double(n - 1);
    const double trace = cov.diagonal().sum().item<double>();
    const double load = cfg.shrinkage * std::max(trace / double(d), 1e-12);
    ref.cov = cov + load * torch::eye(d, torch::kFloat64);
  }
  ref.cov_inv = torch::linalg_inv(ref.cov);

  torch::Tensor l = torch::linalg_cholesky(ref.cov);
  ref.whitened =
      torch::linalg_solve_triangular(l, centered.t(), /*upper=*/false).t().contiguous();
  ref.unit = (e / e.norm(2, 1, true).clamp_min(1e-300)).contiguous();

  auto inf_diag = [](torch::Tensor m) {
    m.fill_diagonal_(std::numeric_limits<double>::infinity());
    return m;
  };
  torch::Tensor dref_cos =
      inf_diag((1.0 - torch::mm(ref.unit, ref.unit.t())).clamp(0.0, 2.0));
  torch::Tensor dref_maha = inf_diag(torch::cdist(ref.whitened, ref.whitened));
  ref.lof_cos = build_lof(dref_cos, cfg.lof_k);
  ref.lof_maha = build_lof(dref_maha, cfg.lof_k);
  return ref;
}

std::map<std::string, torch::Tensor> embedding_scores(const ReferenceSet& ref,
                                                      const torch::Tensor& queries,
                                                      bool exclude_self) {
  torch::Tensor q = queries.to(torch::kFloat64);
  if (q.dim() == 1) q = q.unsqueeze(0);
  if (q.size(1) != ref.embeddings.size(1))
    throw InvalidInput("query embedding dimension mismatch");
  const auto n = ref.embeddings.size(0);
  if (exclude_self && q.size(0) != n)
    throw InvalidInput("exclude_self requires queries aligned with the reference");
  if (exclude_self && (ref.knn_k >= n || ref.lof_k >= n))
    throw ConfigError("self-exclusion leaves fewer than k neighbors");

  std::map<std::string, torch::Tensor> out;
  for (const bool cosine : {true, false}) {
    torch::Tensor d = pairwise_for_metric(ref, q, cosine);
    if (exclude_self) d.fill_diagonal_(std::numeric_limits<double>::infinity());
    const std::string suffix = cosine ? "_cos" : "_maha";

    out["emb_knn" + suffix] = nearest(d, ref.knn_k).dist.mean(1);
    out["emb_lof" + suffix] =
        lof_scores(cosine ? ref.lof_cos : ref.lof_maha, d, ref.lof_k);
  }
  // distance to the mean embedding
  torch::Tensor mean_cos = rowwise_cos(q, ref.mean.unsqueeze(0).expand_as(q));
  torch::Tensor centered = q - ref.mean.unsqueeze(0);
  auto l = torch::linalg_cholesky(ref.cov);
  auto wq = torch::linalg_solve_triangular(l, centered.t(), /*upper=*/false).t();
  out["emb_mean_cos"] = mean_cos;
  out["emb_mean_maha"] = wq.norm(2, 1);
  return out;
}

double aggregate(const std::vector<double>& segment_scores, AggregateMode mode) {
  if (segment_scores.empty()) throw InvalidInput("aggregate: no segment scores");
  if (mode == AggregateMode::kMax)
    return *std::max_element(segment_scores.begin(), segment_scores.end());
  double sum = 0;
  for (double v : segment_scores) sum += v;
  return sum / static_cast<double>(segment_scores.size());
}

void write_scores_csv(const std::string& path, const std::vector<ScoreRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write scores: " + path);
  out << "clip_id,machine,section,domain,label,score_name,score\n";
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%d,%s,%s,%s,%.9g\n", r.clip_id.c_str(),
                  r.machine.c_str(), r.section, r.domain.c_str(), r.label.c_str(),
                  r.score_name.c_str(), r.score);
    out << buf;
  }
}

std::vector<ScoreRow> read_scores_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scores: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty scores file: " + path);

  std::vector<ScoreRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 7) throw IoError("malformed score row: " + line);
    ScoreRow r;
    r.clip_id = fields[0];
    r.machine = fields[1];
    r.section = std::stoi(fields[2]);
    r.domain = fields[3];
    r.label = fields[4];
    r.score_name = fields[5];
    r.score = std::stod(fields[6]);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::map<std::string, std::string> select_best_score(
    const std::vector<ScoreRow>& dev_rows, double pauc_p) {
  std::set<std::string> machines;
  bool any_labeled = false;
  for (const auto& r : dev_rows) {
    machines.insert(r.machine);
    any_labeled = any_labeled || r.label == "normal" || r.label == "anomaly";
  }
  if (!any_labeled) throw InvalidInput("select_best_score: no labeled clips");

  std::vector<std::string> names = all_score_names();
  std::sort(names.begin(), names.end());

  std::map<std::string, std::string> best;
  for (const auto& machine : machines) {
    double best_h = -1;
    std::string best_name;
    for (const auto& name : names) {
      std::vector<ClipScore> rows;
      for (const auto& r : dev_rows)
        if (r.machine == machine && r.score_name == name)
          rows.push_back({r.clip_id, r.machine, r.section, r.domain, r.label,
                          r.score});
      if (rows.empty()) continue;
      const double h = machine_report(rows, machine, name, pauc_p).hmean_value;
      if (h > best_h) {  // strict: first (lexicographic) name wins ties
        best_h = h;
        best_name = name;
      }
    }
    if (best_name.empty())
      throw InvalidInput("select_best_score: no scored rows for " + machine);
    best[machine] = best_name;
  }
  return best;
}

ThresholdFit fit_threshold(const std::vector<double>& training_scores,
                           double percentile) {
  if (training_scores.size() < 10)
    throw InvalidInput("fit_threshold needs at least 10 scores");
  for (double v : training_scores)
    if (!std::isfinite(v)) throw InvalidInput("fit_threshold: non-finite score");
  if (percentile <= 0 || percentile >= 1)
    throw InvalidInput("fit_threshold: percentile must lie in (0,1)");

  const double lo = *std::min_element(training_scores.begin(), training_scores.end());
  const double hi = *std::max_element(training_scores.begin(), training_scores.end());
  const double range = hi - lo;

  ThresholdFit fit;
  if (range <= 1e-12 * std::max(1.0, std::abs(hi))) {
    fit.degenerate = true;
    fit.threshold = hi + std::max(1e-9, std::abs(hi) * 1e-9);
    return fit;
  }

  // Shift so every score is strictly positive before the gamma fit.
  fit.shift = lo <= 0 ? -lo + range * 1e-6 : 0.0;

  double mean = 0, mean_log = 0;
  for (double v : training_scores) {
    const double x = v + fit.shift;
    mean += x;
    mean_log += std::log(x);
  }
  mean /= static_cast<double>(training_scores.size());
  mean_log /= static_cast<double>(training_scores.size());

  const double s = std::log(mean) - mean_log;  // >= 0 by Jensen
  if (s < 1e-12) {
    fit.degenerate = true;
    fit.threshold = hi + std::max(1e-9, std::abs(hi) * 1e-9);
    return fit;
  }

  // Standard closed-form start, then Newton on the profile likelihood.
  double k = (3.0 - s + std::sqrt((s - 3.0) * (s - 3.0) + 24.0 * s)) / (12.0 * s);
  for (int it = 0; it < 100; ++it) {
    const double f = std::log(k) - boost::math::digamma(k) - s;
    const double fp = 1.0 / k - boost::math::trigamma(k);
    const double next = k - f / fp;
    if (!(next > 0) || !std::isfinite(next)) break;
    const double delta = std::abs(next - k);
    k = next;
    if (delta < 1e-13 * k) break;
  }

  fit.shape = k;
  fit.scale = mean / k;
  boost::math::gamma_distribution<double> dist(fit.shape, fit.scale);
  fit.threshold = boost::math::quantile(dist, percentile) - fit.shift;
  return fit;
}

}  // namespace aegan
