#pragma once

#include <map>
#include <string>
#include <vector>

#include "causalsem/config.hpp"

namespace causalsem {

struct StageInfo {
  std::vector<std::string> paths;
  double seconds = 0.0;
};

struct RunManifest {
  std::string config_hash;
  std::string version;
  std::vector<std::pair<std::string, StageInfo>> stages;
  std::map<std::string, std::string> file_hashes;
  std::vector<std::string> notes;
};

void save_manifest(const RunManifest& manifest, const std::string& path);
RunManifest load_manifest(const std::string& path);

/// Canonical artifact locations under the configured output directory.
struct RunPaths {
  explicit RunPaths(const std::string& out_dir);
  std::string out_dir;
  std::string config_copy;
  std::string truth_graph;
  std::string dataset_csv;
  std::string dataset_json;
  std::string w_hat;
  std::string struct_history;
  std::string shd_json;
  std::string checkpoint;
  std::string train_history;
  std::string manifest;
  std::string report_csv(const EvalPair& pair) const;
  std::string report_json(const EvalPair& pair) const;
};

/// Stage entry points. Each writes its artifacts under config.out_dir and
/// returns what it produced with wall-clock timing.
StageInfo cmd_generate(const ExperimentConfig& config);
StageInfo cmd_learn_structure(const ExperimentConfig& config,
                              const std::string& dataset_csv);
StageInfo cmd_train(const ExperimentConfig& config, const std::string& dataset_csv,
                    const std::string& mask_source);
StageInfo cmd_evaluate(const ExperimentConfig& config, const std::string& checkpoint_path);

/// generate -> learn-structure -> train -> evaluate under one manifest.
/// resume skips stages whose artifacts already exist for this exact config;
/// force allows overwriting artifacts produced by a different config.
RunManifest cmd_pipeline(const ExperimentConfig& config, bool resume = false,
                         bool force = false);

}  // namespace causalsem
