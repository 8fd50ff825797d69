#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "causalsem/causalae.hpp"
#include "causalsem/eval.hpp"
#include "causalsem/graph.hpp"
#include "causalsem/semgen.hpp"
#include "causalsem/structlearn.hpp"

namespace causalsem {

/// Sectioned key-value file ("[section]" headers, "key = value" lines,
/// '#' comments). Order-preserving so serialization is canonical.
struct ConfigFile {
  struct Section {
    std::string name;
    std::vector<std::pair<std::string, std::string>> entries;
  };
  std::vector<Section> sections;

  static ConfigFile parse_text(const std::string& text);
  static ConfigFile load(const std::string& path);
  std::string serialize() const;
  void save(const std::string& path) const;

  const std::string* find(const std::string& section, const std::string& key) const;
  void set(const std::string& section, const std::string& key, const std::string& value);
  /// "section.key=value" override, as accepted on the command line.
  void apply_override(const std::string& dotted);
};

struct EvalPair {
  std::string intervention;
  std::string target;
};

/// Fully resolved experiment description. Stage seeds derive from the master
/// seed keyed by stage name, so any single stage can be reproduced alone.
struct ExperimentConfig {
  std::string out_dir = "runs/out";
  std::uint64_t master_seed = 0;

  GraphFamily family;
  SemKind kind = SemKind::kLinear;
  NoiseSpec noise;
  std::size_t samples = 8000;

  StructConfig structure;
  CaeTrainConfig cae;
  std::string mask_source = "learned";  // learned | truth

  EvalConfig eval;
  std::vector<EvalPair> pairs;

  static ExperimentConfig from_file(const ConfigFile& file);
  ConfigFile to_file() const;
  std::string hash_hex() const;

  std::uint64_t stage_seed(const std::string& stage) const;
  std::vector<std::string> node_names() const { return family.node_names(); }
  int node_index(const std::string& name) const;
  std::string family_label() const;

  void validate() const;
};

}  // namespace causalsem
