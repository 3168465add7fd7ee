#include "aegan/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "aegan/errors.hpp"
#include "aegan/tensor_io.hpp"

namespace fs = std::filesystem;

namespace aegan {

namespace {

std::vector<std::string> split_tokens(const std::string& stem) {
  std::vector<std::string> out;
  std::stringstream ss(stem);
  std::string tok;
  while (std::getline(ss, tok, '_')) out.push_back(tok);
  return out;
}

}  // namespace

ScanReport scan_dataset(const std::string& root) {
  if (!fs::is_directory(root)) throw IoError("dataset root not found: " + root);

  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(root))
    if (entry.is_regular_file() && entry.path().extension() == ".wav")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no wav files under " + root);

  ScanReport report;
  for (const auto& path : files) {
    const auto rel = fs::relative(path, root);
    auto it = rel.begin();
    std::vector<std::string> parts;
    for (; it != rel.end(); ++it) parts.push_back(it->string());
    if (parts.size() < 3) {
      report.skipped.emplace_back(path.string(),
                                  "expected <machine>/<split>/<file>.wav layout");
      continue;
    }
    const std::string machine = parts[parts.size() - 3];
    const std::string dir_split = parts[parts.size() - 2];
    if (dir_split != "train" && dir_split != "test") {
      report.skipped.emplace_back(path.string(), "split directory must be train or test");
      continue;
    }

    const auto tokens = split_tokens(path.stem().string());
    if (tokens.size() < 6 || tokens[0] != "section") {
      report.skipped.emplace_back(path.string(), "filename does not match section schema");
      continue;
    }
    int section = 0;
    try {
      section = std::stoi(tokens[1]);
    } catch (const std::exception&) {
      report.skipped.emplace_back(path.string(), "bad section number");
      continue;
    }
    const std::string& domain = tokens[2];
    const std::string& name_split = tokens[3];
    const std::string& label = tokens[4];
    if (domain != "source" && domain != "target") {
      report.skipped.emplace_back(path.string(), "bad domain token");
      continue;
    }
    if (name_split != dir_split) {
      report.skipped.emplace_back(path.string(), "split token disagrees with directory");
      continue;
    }
    if (label != "normal" && label != "anomaly") {
      report.skipped.emplace_back(path.string(), "bad label token");
      continue;
    }
    if (dir_split == "train" && label == "anomaly")
      throw InvalidInput("anomaly-labeled clip in the training split: " +
                         path.string());

    report.records.push_back({path.string(), path.stem().string(), machine,
                              section, domain, dir_split, label});
  }
  return report;
}

void save_cache(const SegmentCache& cache, const std::string& stem) {
  save_tensors(stem + ".bin", {{"segments", cache.segments},
                               {"frame_offsets", cache.frame_offsets}});
  nlohmann::json clips = nlohmann::json::array();
  for (const auto& c : cache.clips)
    clips.push_back({{"clip_id", c.clip_id},
                     {"path", c.path},
                     {"section", c.section},
                     {"domain", c.domain},
                     {"label", c.label},
                     {"seg_begin", c.seg_begin},
                     {"seg_end", c.seg_end},
                     {"n_frames", c.n_frames}});
  nlohmann::json meta = {{"machine_type", cache.machine_type},
                         {"split", cache.split},
                         {"frontend_config_hash", cache.frontend_config_hash},
                         {"scaler", {{"a", cache.scaler.a}, {"b", cache.scaler.b}}},
                         {"clips", clips}};
  std::ofstream out(stem + ".json");
  if (!out) throw IoError("cannot write cache metadata: " + stem + ".json");
  out << meta.dump(2) << "\n";
}

SegmentCache load_cache(const std::string& stem) {
  std::ifstream in(stem + ".json");
  if (!in) throw IoError("cannot open cache metadata: " + stem + ".json");
  nlohmann::json meta = nlohmann::json::parse(in);

  SegmentCache cache;
  cache.machine_type = meta.at("machine_type");
  cache.split = meta.at("split");
  cache.frontend_config_hash = meta.at("frontend_config_hash");
  cache.scaler.a = meta.at("scaler").at("a");
  cache.scaler.b = meta.at("scaler").at("b");
  for (const auto& c : meta.at("clips"))
    cache.clips.push_back({c.at("clip_id"), c.at("path"), c.at("section"),
                           c.at("domain"), c.at("label"), c.at("seg_begin"),
                           c.at("seg_end"), c.at("n_frames")});

  auto tensors = load_tensors(stem + ".bin");
  cache.segments = tensors.at("segments");
  cache.frame_offsets = tensors.at("frame_offsets");
  if (!cache.clips.empty() &&
      cache.clips.back().seg_end != cache.segments.size(0))
    throw IoError("cache clip index disagrees with segment tensor: " + stem);
  return cache;
}

}  // namespace aegan
