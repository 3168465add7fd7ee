#include "doctest_compat.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "aegan/errors.hpp"
#include "aegan/evaluation.hpp"
#include "testutil.hpp"

using namespace aegan;

namespace {

// Brute-force Mann-Whitney AUC: pairwise counting with half credit for ties.
double oracle_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double num = 0;
  int64_t pn = 0;
  for (size_t a = 0; a < scores.size(); ++a) {
    if (!labels[a]) continue;
    for (size_t n = 0; n < scores.size(); ++n) {
      if (labels[n]) continue;
      ++pn;
      if (scores[a] > scores[n]) num += 1.0;
      else if (scores[a] == scores[n]) num += 0.5;
    }
  }
  return num / static_cast<double>(pn);
}

// Dense threshold-sweep pAUC oracle: ROC points at every distinct score,
// piecewise-linear integration clipped at FPR = p.
double oracle_pauc(const std::vector<double>& scores, const std::vector<int>& labels,
                   double p) {
  std::vector<double> uniq = scores;
  std::sort(uniq.begin(), uniq.end(), std::greater<>());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());

  int64_t pos = 0, neg = 0;
  for (int l : labels) (l ? pos : neg)++;

  std::vector<std::pair<double, double>> pts{{0.0, 0.0}};  // (fpr, tpr)
  for (double thr : uniq) {
    int64_t tp = 0, fp = 0;
    for (size_t i = 0; i < scores.size(); ++i)
      if (scores[i] >= thr) (labels[i] ? tp : fp)++;
    pts.push_back({static_cast<double>(fp) / neg, static_cast<double>(tp) / pos});
  }
  double area = 0;
  for (size_t i = 1; i < pts.size(); ++i) {
    auto [f0, t0] = pts[i - 1];
    auto [f1, t1] = pts[i];
    if (f0 >= p) break;
    if (f1 > p) {
      const double t = (p - f0) / (f1 - f0);
      t1 = t0 + t * (t1 - t0);
      f1 = p;
    }
    area += (f1 - f0) * (t1 + t0) / 2.0;
  }
  return area / p;
}

std::pair<std::vector<double>, std::vector<int>> random_instance(std::mt19937& rng) {
  std::uniform_int_distribution<int> count(1, 50);
  std::uniform_int_distribution<int> grid(0, 12);  // small grid forces ties
  const int p = count(rng), n = count(rng);
  std::vector<double> scores;
  std::vector<int> labels;
  for (int i = 0; i < p; ++i) {
    scores.push_back(grid(rng) / 4.0 + 0.5);
    labels.push_back(1);
  }
  for (int i = 0; i < n; ++i) {
    scores.push_back(grid(rng) / 4.0);
    labels.push_back(0);
  }
  return {scores, labels};
}

}  // namespace

TEST_SUITE_BEGIN("evaluation");

TEST_CASE("auc: canonical examples") {
  CHECK(auc({0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0}) == 1.0);
  CHECK(auc({0.9, 0.8, 0.85, 0.7}, {1, 1, 0, 0}) == doctest::Approx(0.75));
  CHECK(auc({0.5, 0.5, 0.5, 0.5}, {1, 1, 0, 0}) == doctest::Approx(0.5));
  CHECK_THROWS_AS(auc({1.0, 2.0}, {1, 1}), MetricError);
}

TEST_CASE("auc equals brute-force pairwise counting on 200 random instances") {
  std::mt19937 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    auto [scores, labels] = random_instance(rng);
    CHECK(std::abs(auc(scores, labels) - oracle_auc(scores, labels)) <= 1e-12);
  }
}

TEST_CASE("auc is invariant under strictly increasing score transforms") {
  std::mt19937 rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    auto [scores, labels] = random_instance(rng);
    const double base = auc(scores, labels);
    std::vector<double> mapped = scores;
    for (auto& s : mapped) s = std::exp(0.7 * s) + 3.0;
    CHECK(auc(mapped, labels) == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("auc(scores) + auc(-scores) = 1 without ties") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> scores;
  std::vector<int> labels;
  for (int i = 0; i < 40; ++i) {
    scores.push_back(u(rng));
    labels.push_back(i % 3 == 0 ? 1 : 0);
  }
  std::vector<double> neg = scores;
  for (auto& s : neg) s = -s;
  CHECK(auc(scores, labels) + auc(neg, labels) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pauc: limits and oracle agreement") {
  SUBCASE("perfect separation gives 1 for any p") {
    for (double p : {0.05, 0.1, 0.5, 1.0})
      CHECK(pauc({0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0}, p) == doctest::Approx(1.0));
  }
  SUBCASE("p = 1 reduces to auc") {
    std::mt19937 rng(4);
    for (int trial = 0; trial < 50; ++trial) {
      auto [scores, labels] = random_instance(rng);
      CHECK(std::abs(pauc(scores, labels, 1.0) - auc(scores, labels)) <= 1e-12);
    }
  }
  SUBCASE("random 20-point instances match the threshold-sweep oracle") {
    std::mt19937 rng(5);
    for (int trial = 0; trial < 100; ++trial) {
      auto [scores, labels] = random_instance(rng);
      for (double p : {0.1, 0.3, 0.7})
        CHECK(std::abs(pauc(scores, labels, p) - oracle_pauc(scores, labels, p)) <=
              1e-9);
    }
  }
  SUBCASE("pauc never exceeds 1") {
    std::mt19937 rng(6);
    for (int trial = 0; trial < 50; ++trial) {
      auto [scores, labels] = random_instance(rng);
      CHECK(pauc(scores, labels, 0.1) <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("domain_auc follows the all-anomalies protocol") {
  // target normals score above every anomaly; source normals score below
  std::vector<ClipScore> rows;
  auto add = [&](const std::string& id, const std::string& domain,
                 const std::string& label, double score) {
    rows.push_back({id, "fan", 0, domain, label, score});
  };
  add("sn0", "source", "normal", 0.10);
  add("sn1", "source", "normal", 0.15);
  add("tn0", "target", "normal", 0.95);
  add("tn1", "target", "normal", 0.90);
  add("sa0", "source", "anomaly", 0.60);
  add("sa1", "source", "anomaly", 0.70);
  add("ta0", "target", "anomaly", 0.65);

  CHECK(domain_auc(rows, "fan", 0, "source") == 1.0);
  CHECK(domain_auc(rows, "fan", 0, "target") < 0.5);
  CHECK_THROWS_AS(domain_auc(rows, "fan", 1, "source"), MetricError);

  SUBCASE("12-clip recount oracle, positives shared across domains") {
    std::vector<ClipScore> toy;
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < 3; ++i)
      toy.push_back({"sn" + std::to_string(i), "fan", 2, "source", "normal", u(rng)});
    for (int i = 0; i < 3; ++i)
      toy.push_back({"tn" + std::to_string(i), "fan", 2, "target", "normal", u(rng)});
    for (int i = 0; i < 4; ++i)
      toy.push_back({"sa" + std::to_string(i), "fan", 2, "source", "anomaly", u(rng)});
    for (int i = 0; i < 2; ++i)
      toy.push_back({"ta" + std::to_string(i), "fan", 2, "target", "anomaly", u(rng)});

    for (const std::string domain : {"source", "target"}) {
      std::vector<double> scores;
      std::vector<int> labels;
      for (const auto& r : toy) {
        if (r.label == "anomaly") {  // every anomaly, both domains
          scores.push_back(r.score);
          labels.push_back(1);
        } else if (r.domain == domain) {
          scores.push_back(r.score);
          labels.push_back(0);
        }
      }
      CHECK(labels.size() == 6 + 3);  // 6 anomalies + 3 domain normals
      CHECK(domain_auc(toy, "fan", 2, domain) ==
            doctest::Approx(oracle_auc(scores, labels)).epsilon(1e-12));
    }
  }
}

TEST_CASE("hmean: closed forms, flags, and the published aggregate") {
  CHECK(hmean({0.7, 0.7, 0.7}) == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(hmean({1.0, 0.5}) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

  bool flagged = false;
  CHECK(hmean({0.5, 0.0, 0.7}, &flagged) == 0.0);
  CHECK(flagged);

  // per-machine column -> overall aggregate, as published
  CHECK(hmean({76.03, 65.83, 75.27, 74.06, 78.46}) ==
        doctest::Approx(73.66).epsilon(0.01 / 73.66));
}

TEST_CASE("machine_report collects section/domain metrics and the hmean") {
  std::vector<ClipScore> rows;
  std::mt19937 rng(8);
  std::normal_distribution<double> nrm(0.2, 0.05), anm(0.8, 0.05);
  for (int section : {0, 1}) {
    for (int i = 0; i < 6; ++i)
      rows.push_back({"n" + std::to_string(section) + std::to_string(i), "fan",
                      section, i % 3 == 0 ? "target" : "source", "normal",
                      nrm(rng)});
    for (int i = 0; i < 4; ++i)
      rows.push_back({"a" + std::to_string(section) + std::to_string(i), "fan",
                      section, i % 2 ? "target" : "source", "anomaly", anm(rng)});
  }
  MachineReport rep = machine_report(rows, "fan", "emb_knn_cos", 0.5);
  CHECK(rep.metrics.count("s0_source") == 1);
  CHECK(rep.metrics.count("s0_target") == 1);
  CHECK(rep.metrics.count("s0_pauc") == 1);
  CHECK(rep.metrics.count("s1_pauc") == 1);
  CHECK(rep.hmean_value > 0.9);  // well-separated by construction

  EvalReport overall = overall_report({rep});
  CHECK(overall.overall_hmean == doctest::Approx(rep.hmean_value));

  SUBCASE("overall hmean never exceeds the best machine hmean") {
    MachineReport other = rep;
    other.machine = "gearbox";
    other.hmean_value = 0.5;
    EvalReport two = overall_report({rep, other});
    CHECK(two.overall_hmean <=
          std::max(rep.hmean_value, other.hmean_value) + 1e-12);
  }
}

TEST_CASE("report serialization round trip and table formatting") {
  testutil::TempDir dir("report");
  MachineReport rep;
  rep.machine = "fan";
  rep.score_name = "emb_knn_cos";
  rep.metrics = {{"s0_source", 0.9}, {"s0_pauc", 0.6}};
  rep.hmean_value = 0.72;
  EvalReport report = overall_report({rep});

  write_report_csv(dir.str("report.csv"), report);
  std::ifstream in(dir.str("report.csv"));
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  CHECK(text.find("fan,emb_knn_cos,s0_source,0.9") != std::string::npos);
  CHECK(text.find("overall_hmean") != std::string::npos);

  const auto j = report_to_json(report);
  CHECK(j.at("machines").size() == 1);
  CHECK(j.at("overall_hmean").get<double>() == doctest::Approx(0.72));

  const std::string table = format_report_table(report);
  CHECK(table.find("fan") != std::string::npos);
  CHECK(table.find("72.00") != std::string::npos);
}

TEST_SUITE_END();
