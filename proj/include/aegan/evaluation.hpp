#pragma once

// Detection metrics: AUC per (section, domain), pAUC per section, harmonic
// means per machine and overall.
//
// AUC follows the Mann-Whitney convention (ties get half credit) and is
// computed from tie-grouped ROC vertices with exact integer accumulation.
// The domain-wise AUC takes all anomalous clips of a section as positives
// regardless of domain; only the normals are restricted to the domain.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace aegan {

// labels: 1 = anomaly (positive), 0 = normal.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Area under the ROC restricted to FPR in [0, p], normalized by p.
// Trapezoidal over exact ROC vertices, linear interpolation at FPR = p.
double pauc(const std::vector<double>& scores, const std::vector<int>& labels,
            double p);

struct ClipScore {
  std::string clip_id;
  std::string machine;
  int section = 0;
  std::string domain;  // "source" | "target"
  std::string label;   // "normal" | "anomaly" | "unknown"
  double score = 0;
};

// AUC for one (machine, section, domain) over rows of a single score variant.
double domain_auc(const std::vector<ClipScore>& rows, const std::string& machine,
                  int section, const std::string& domain);

// n / sum(1/x). Any nonpositive input makes the mean 0 and sets *flagged.
double hmean(const std::vector<double>& values, bool* flagged = nullptr);

struct MachineReport {
  std::string machine;
  std::string score_name;
  // key "s<section>_<domain>" -> AUC; "s<section>_pauc" -> pAUC
  std::map<std::string, double> metrics;
  double hmean_value = 0;
  bool degenerate = false;  // some metric was 0 or undefined
};

// Rows must all belong to one machine and one score variant.
MachineReport machine_report(const std::vector<ClipScore>& rows,
                             const std::string& machine,
                             const std::string& score_name, double pauc_p);

struct EvalReport {
  std::vector<MachineReport> machines;  // one per (machine, selected score)
  double overall_hmean = 0;
  bool degenerate = false;
};

EvalReport overall_report(const std::vector<MachineReport>& machines);

void write_report_csv(const std::string& path, const EvalReport& report);
nlohmann::json report_to_json(const EvalReport& report);
// Human-readable fixed-width table (percentages).
std::string format_report_table(const EvalReport& report);

}  // namespace aegan
