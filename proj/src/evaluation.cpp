#include "aegan/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>

#include "aegan/errors.hpp"

namespace aegan {

namespace {

struct RocVertex {
  int64_t fp = 0;  // cumulative false positives at this threshold step
  int64_t tp = 0;
};

// Tie-grouped ROC vertices, descending threshold; starts at (0,0).
std::vector<RocVertex> roc_vertices(const std::vector<double>& scores,
                                    const std::vector<int>& labels, int64_t* pos,
                                    int64_t* neg) {
  if (scores.size() != labels.size())
    throw InvalidInput("scores and labels differ in length");
  std::vector<size_t> order(scores.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] > scores[b]; });

  int64_t p = 0, n = 0;
  for (int l : labels) (l ? p : n)++;
  if (p == 0 || n == 0)
    throw MetricError("AUC undefined: needs at least one positive and one negative");
  *pos = p;
  *neg = n;

  std::vector<RocVertex> verts{{0, 0}};
  int64_t tp = 0, fp = 0;
  size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    // all samples sharing a score form one threshold step
    while (i < order.size() && scores[order[i]] == s) {
      (labels[order[i]] ? tp : fp)++;
      ++i;
    }
    verts.push_back({fp, tp});
  }
  return verts;
}

}  // namespace

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  int64_t p = 0, n = 0;
  const auto verts = roc_vertices(scores, labels, &p, &n);
  // 2*area in integer units of (P*N): sum dfp * (tp_prev + tp_cur)
  int64_t area2 = 0;
  for (size_t i = 1; i < verts.size(); ++i)
    area2 += (verts[i].fp - verts[i - 1].fp) * (verts[i].tp + verts[i - 1].tp);
  return static_cast<double>(area2) / (2.0 * static_cast<double>(p) *
                                       static_cast<double>(n));
}

double pauc(const std::vector<double>& scores, const std::vector<int>& labels,
            double p) {
  if (p <= 0 || p > 1) throw InvalidInput("pauc: p must lie in (0,1]");
  int64_t pos = 0, neg = 0;
  const auto verts = roc_vertices(scores, labels, &pos, &neg);

  const double fpr_cap = p;
  double area = 0;
  for (size_t i = 1; i < verts.size(); ++i) {
    double fpr0 = static_cast<double>(verts[i - 1].fp) / static_cast<double>(neg);
    double tpr0 = static_cast<double>(verts[i - 1].tp) / static_cast<double>(pos);
    double fpr1 = static_cast<double>(verts[i].fp) / static_cast<double>(neg);
    double tpr1 = static_cast<double>(verts[i].tp) / static_cast<double>(pos);
    if (fpr0 >= fpr_cap) break;
    if (fpr1 > fpr_cap) {
      // linear interpolation of the ROC segment at the cap
      const double t = (fpr_cap - fpr0) / (fpr1 - fpr0);
      tpr1 = tpr0 + t * (tpr1 - tpr0);
      fpr1 = fpr_cap;
    }
    area += (fpr1 - fpr0) * (tpr1 + tpr0) / 2.0;
  }
  return area / p;
}

double domain_auc(const std::vector<ClipScore>& rows, const std::string& machine,
                  int section, const std::string& domain) {
  std::vector<double> scores;
  std::vector<int> labels;
  bool domain_seen = false;
  for (const auto& r : rows) {
    if (r.machine != machine || r.section != section) continue;
    if (r.label == "anomaly") {  // positives: every anomaly in the section
      scores.push_back(r.score);
      labels.push_back(1);
      if (r.domain == domain) domain_seen = true;
    } else if (r.label == "normal" && r.domain == domain) {
      scores.push_back(r.score);
      labels.push_back(0);
      domain_seen = true;
    }
  }
  if (!domain_seen)
    throw MetricError("no test clips for domain '" + domain + "' in section " +
                      std::to_string(section));
  return auc(scores, labels);
}

double hmean(const std::vector<double>& values, bool* flagged) {
  if (values.empty()) throw MetricError("hmean of an empty set");
  double inv_sum = 0;
  for (double v : values) {
    if (v <= 0) {
      if (flagged) *flagged = true;
      return 0.0;
    }
    inv_sum += 1.0 / v;
  }
  return static_cast<double>(values.size()) / inv_sum;
}

MachineReport machine_report(const std::vector<ClipScore>& rows,
                             const std::string& machine,
                             const std::string& score_name, double pauc_p) {
  std::set<int> sections;
  for (const auto& r : rows)
    if (r.machine == machine) sections.insert(r.section);
  if (sections.empty())
    throw MetricError("no rows for machine '" + machine + "'");

  MachineReport rep;
  rep.machine = machine;
  rep.score_name = score_name;

  std::vector<double> values;
  for (int section : sections) {
    for (const std::string domain : {"source", "target"}) {
      bool has_domain = false;
      for (const auto& r : rows)
        if (r.machine == machine && r.section == section && r.domain == domain &&
            r.label == "normal")
          has_domain = true;
      if (!has_domain) continue;  // single-domain sections evaluate what exists
      const double v = domain_auc(rows, machine, section, domain);
      rep.metrics["s" + std::to_string(section) + "_" + domain] = v;
      values.push_back(v);
    }
    // pAUC over the whole section, both domains
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& r : rows) {
      if (r.machine != machine || r.section != section) continue;
      if (r.label == "anomaly" || r.label == "normal") {
        scores.push_back(r.score);
        labels.push_back(r.label == "anomaly" ? 1 : 0);
      }
    }
    const double pv = pauc(scores, labels, pauc_p);
    rep.metrics["s" + std::to_string(section) + "_pauc"] = pv;
    values.push_back(pv);
  }

  rep.hmean_value = hmean(values, &rep.degenerate);
  return rep;
}

EvalReport overall_report(const std::vector<MachineReport>& machines) {
  if (machines.empty()) throw MetricError("overall report needs machines");
  EvalReport rep;
  rep.machines = machines;
  std::vector<double> hm;
  for (const auto& m : machines) {
    hm.push_back(m.hmean_value);
    rep.degenerate = rep.degenerate || m.degenerate;
  }
  rep.overall_hmean = hmean(hm, &rep.degenerate);
  return rep;
}

void write_report_csv(const std::string& path, const EvalReport& report) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report: " + path);
  out << "machine,score_name,metric,value\n";
  char buf[256];
  for (const auto& m : report.machines) {
    for (const auto& [key, value] : m.metrics) {
      std::snprintf(buf, sizeof(buf), "%s,%s,%s,%.9g\n", m.machine.c_str(),
                    m.score_name.c_str(), key.c_str(), value);
      out << buf;
    }
    std::snprintf(buf, sizeof(buf), "%s,%s,hmean,%.9g\n", m.machine.c_str(),
                  m.score_name.c_str(), m.hmean_value);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "all,,overall_hmean,%.9g\n", report.overall_hmean);
  out << buf;
}

nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json machines = nlohmann::json::array();
  for (const auto& m : report.machines) {
    nlohmann::json metrics;
    for (const auto& [key, value] : m.metrics) metrics[key] = value;
    machines.push_back({{"machine", m.machine},
                        {"score_name", m.score_name},
                        {"metrics", metrics},
                        {"hmean", m.hmean_value},
                        {"degenerate", m.degenerate}});
  }
  return {{"machines", machines},
          {"overall_hmean", report.overall_hmean},
          {"degenerate", report.degenerate}};
}

std::string format_report_table(const EvalReport& report) {
  std::ostringstream os;
  char buf[256];
  os << "machine        score            hmean   details (percent)\n";
  for (const auto& m : report.machines) {
    std::snprintf(buf, sizeof(buf), "%-14s %-16s %6.2f   ", m.machine.c_str(),
                  m.score_name.c_str(), 100.0 * m.hmean_value);
    os << buf;
    bool first = true;
    for (const auto& [key, value] : m.metrics) {
      std::snprintf(buf, sizeof(buf), "%s%s=%.2f", first ? "" : " ", key.c_str(),
                    100.0 * value);
      os << buf;
      first = false;
    }
    os << (m.degenerate ? "  [degenerate]" : "") << "\n";
  }
  std::snprintf(buf, sizeof(buf), "overall hmean: %.2f%s\n",
                100.0 * report.overall_hmean,
                report.degenerate ? "  [degenerate]" : "");
  os << buf;
  return os.str();
}

}  // namespace aegan
