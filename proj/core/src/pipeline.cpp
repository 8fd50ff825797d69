#include "causalsem/pipeline.hpp"

#include <chrono>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "causalsem/errors.hpp"
#include "causalsem/io.hpp"
#include "causalsem/version.hpp"

namespace causalsem {

using nlohmann::json;
namespace fs = std::filesystem;

void save_manifest(const RunManifest& manifest, const std::string& path) {
  json j;
  j["version"] = manifest.version;
  j["config_hash"] = manifest.config_hash;
  json stages = json::object();
  json order = json::array();
  for (const auto& [name, info] : manifest.stages) {
    stages[name] = {{"paths", info.paths}, {"seconds", info.seconds}};
    order.push_back(name);
  }
  j["stages"] = std::move(stages);
  j["stage_order"] = std::move(order);
  j["file_hashes"] = manifest.file_hashes;
  j["notes"] = manifest.notes;
  write_text_file(path, j.dump(2) + "\n");
}

RunManifest load_manifest(const std::string& path) {
  json j = json::parse(read_text_file(path), nullptr, false);
  if (j.is_discarded()) throw IoError("manifest: malformed JSON at " + path);
  try {
    RunManifest m;
    m.version = j.at("version").get<std::string>();
    m.config_hash = j.at("config_hash").get<std::string>();
    for (const auto& name : j.at("stage_order")) {
      const std::string n = name.get<std::string>();
      StageInfo info;
      info.paths = j.at("stages").at(n).at("paths").get<std::vector<std::string>>();
      info.seconds = j.at("stages").at(n).at("seconds").get<double>();
      m.stages.emplace_back(n, std::move(info));
    }
    m.file_hashes = j.at("file_hashes").get<std::map<std::string, std::string>>();
    m.notes = j.at("notes").get<std::vector<std::string>>();
    return m;
  } catch (const json::exception& e) {
    throw IoError(std::string("manifest: ") + e.what());
  }
}

RunPaths::RunPaths(const std::string& dir) : out_dir(dir) {
  auto at = [&](const std::string& name) { return (fs::path(dir) / name).string(); };
  config_copy = at("config.ini");
  truth_graph = at("truth_graph.json");
  dataset_csv = at("dataset.csv");
  dataset_json = at("dataset.json");
  w_hat = at("w_hat.json");
  struct_history = at("struct_history.csv");
  shd_json = at("shd.json");
  checkpoint = at("checkpoint.json");
  train_history = at("train_history.csv");
  manifest = at("manifest.json");
}

std::string RunPaths::report_csv(const EvalPair& pair) const {
  return (fs::path(out_dir) / ("report_" + pair.intervention + "_" + pair.target + ".csv"))
      .string();
}

std::string RunPaths::report_json(const EvalPair& pair) const {
  return (fs::path(out_dir) / ("report_" + pair.intervention + "_" + pair.target + ".json"))
      .string();
}

namespace {

class StageTimer {
 public:
  StageTimer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

CausalMask mask_for_training(const ExperimentConfig& config, const RunPaths& paths,
                             std::string* note) {
  if (config.mask_source == "truth") {
    LoadedGraph g = load_graph_json(paths.truth_graph);
    return mask_from_weights(g.W);
  }
  LoadedGraph g = load_graph_json(paths.w_hat);
  ThresholdResult thr = threshold_weights(g.W, config.structure.threshold);
  if (!thr.removed_edges.empty() && note != nullptr) {
    std::ostringstream ss;
    ss << "threshold self-heal removed " << thr.removed_edges.size() << " edge(s):";
    for (const auto& [p, c] : thr.removed_edges) ss << ' ' << p << "->" << c;
    *note = ss.str();
  }
  return thr.mask;
}

}  // namespace

StageInfo cmd_generate(const ExperimentConfig& config) {
  config.validate();
  StageTimer timer;
  RunPaths paths(config.out_dir);

  GraphFamily family = config.family;
  family.seed = config.stage_seed("graph");
  WeightedAdjacency W = gen_graph(family);
  const auto names = family.node_names();
  save_graph_json(W, names, paths.truth_graph);

  Dataset ds = ancestral_sample(W, config.kind, config.noise, config.samples,
                                config.stage_seed("generate"), {}, names);
  ds.prov.family = config.family_label();
  save_dataset_csv(ds, paths.dataset_csv, paths.dataset_json);

  StageInfo info;
  info.paths = {paths.truth_graph, paths.dataset_csv, paths.dataset_json};
  info.seconds = timer.seconds();
  return info;
}

StageInfo cmd_learn_structure(const ExperimentConfig& config,
                              const std::string& dataset_csv) {
  config.validate();
  StageTimer timer;
  RunPaths paths(config.out_dir);

  Dataset ds = load_dataset_csv(dataset_csv, paths.dataset_json);
  StructConfig sc = config.structure;
  sc.seed = config.stage_seed("learn_structure");
  StructResult result = learn_structure(ds, sc);

  save_graph_json(result.W_hat, ds.node_names, paths.w_hat);
  save_struct_history_csv(result.history, paths.struct_history);

  StageInfo info;
  info.paths = {paths.w_hat, paths.struct_history};

  if (fs::exists(paths.truth_graph)) {
    LoadedGraph truth = load_graph_json(paths.truth_graph);
    ThresholdResult thr = threshold_weights(result.W_hat, sc.threshold);
    const CausalMask truth_mask = mask_from_weights(truth.W);
    json j;
    j["version"] = kFormatVersion;
    j["shd"] = shd(thr.mask, truth_mask);
    j["threshold"] = sc.threshold;
    j["converged"] = result.converged;
    j["centered"] = result.centered;
    json removed = json::array();
    for (const auto& [p, c] : thr.removed_edges)
      removed.push_back({{"from", p}, {"to", c}});
    j["self_heal_removed"] = std::move(removed);
    write_text_file(paths.shd_json, j.dump(2) + "\n");
    info.paths.push_back(paths.shd_json);
  }

  info.seconds = timer.seconds();
  return info;
}

StageInfo cmd_train(const ExperimentConfig& config, const std::string& dataset_csv,
                    const std::string& mask_source) {
  config.validate();
  if (mask_source != "learned" && mask_source != "truth")
    throw ConfigError("train: mask source must be 'learned' or 'truth'");
  StageTimer timer;
  RunPaths paths(config.out_dir);

  ExperimentConfig cfg = config;
  cfg.mask_source = mask_source;
  Dataset ds = load_dataset_csv(dataset_csv, paths.dataset_json);

  std::string note;
  CausalMask mask = mask_for_training(cfg, paths, &note);
  CaeTrainConfig tc = cfg.cae;
  tc.seed = config.stage_seed("train");
  CaeTrainResult result = train(ds, mask, tc);

  save_checkpoint(result.model, ds.node_names, paths.checkpoint);
  save_cae_history_csv(result.epoch_history, paths.train_history);

  StageInfo info;
  info.paths = {paths.checkpoint, paths.train_history};
  info.seconds = timer.seconds();
  return info;
}

StageInfo cmd_evaluate(const ExperimentConfig& config, const std::string& checkpoint_path) {
  config.validate();
  StageTimer timer;
  RunPaths paths(config.out_dir);

  LoadedCheckpoint ckpt = load_checkpoint(checkpoint_path);
  LoadedGraph truth_graph = load_graph_json(paths.truth_graph);
  TruthSpec truth{truth_graph.W, config.kind, config.noise};

  StageInfo info;
  const std::uint64_t eval_seed = config.stage_seed("evaluate");
  for (std::size_t p = 0; p < config.pairs.size(); ++p) {
    const EvalPair& pair = config.pairs[p];
    const int j = config.node_index(pair.intervention);
    const int i = config.node_index(pair.target);
    SigmaContourReport report =
        sigma_contours(ckpt.model, truth, j, i, config.eval,
                       Rng(eval_seed).split(p).next_u64(), truth_graph.node_names);
    save_report_csv(report, paths.report_csv(pair));
    save_report_json(report, paths.report_json(pair));
    info.paths.push_back(paths.report_csv(pair));
    info.paths.push_back(paths.report_json(pair));
  }
  info.seconds = timer.seconds();
  return info;
}

RunManifest cmd_pipeline(const ExperimentConfig& config, bool resume, bool force) {
  config.validate();
  RunPaths paths(config.out_dir);
  fs::create_directories(config.out_dir);

  RunManifest manifest;
  manifest.version = kVersion;
  manifest.config_hash = config.hash_hex();

  if (fs::exists(paths.manifest)) {
    RunManifest previous = load_manifest(paths.manifest);
    if (previous.config_hash != manifest.config_hash && !force)
      throw IoError("pipeline: output directory holds artifacts from a different config "
                    "(hash " + previous.config_hash + "); use force to overwrite");
    if (resume && previous.config_hash == manifest.config_hash)
      manifest.notes.push_back("resumed");
  }

  config.to_file().save(paths.config_copy);

  auto stage_done = [&](const std::vector<std::string>& wanted) {
    for (const std::string& p : wanted)
      if (!fs::exists(p)) return false;
    return true;
  };

  auto run_stage = [&](const std::string& name, const std::vector<std::string>& wanted,
                       auto&& fn) {
    if (resume && stage_done(wanted)) {
      StageInfo info;
      info.paths = wanted;
      info.seconds = 0.0;
      manifest.stages.emplace_back(name + " (resumed)", info);
      for (const std::string& p : wanted) manifest.file_hashes[p] = file_hash_hex(p);
      return;
    }
    try {
      StageInfo info = fn();
      for (const std::string& p : info.paths) manifest.file_hashes[p] = file_hash_hex(p);
      manifest.stages.emplace_back(name, std::move(info));
      save_manifest(manifest, paths.manifest);
    } catch (const Error&) {
      manifest.notes.push_back("stage '" + name + "' failed");
      save_manifest(manifest, paths.manifest);
      throw;
    }
  };

  run_stage("generate", {paths.truth_graph, paths.dataset_csv, paths.dataset_json},
            [&] { return cmd_generate(config); });
  run_stage("learn-structure", {paths.w_hat, paths.struct_history, paths.shd_json},
            [&] { return cmd_learn_structure(config, paths.dataset_csv); });
  run_stage("train", {paths.checkpoint, paths.train_history},
            [&] { return cmd_train(config, paths.dataset_csv, config.mask_source); });
  {
    std::vector<std::string> wanted;
    for (const EvalPair& p : config.pairs) {
      wanted.push_back(paths.report_csv(p));
      wanted.push_back(paths.report_json(p));
    }
    run_stage("evaluate", wanted, [&] { return cmd_evaluate(config, paths.checkpoint); });
  }

  manifest.file_hashes[paths.config_copy] = file_hash_hex(paths.config_copy);
  save_manifest(manifest, paths.manifest);
  return manifest;
}

}  // namespace causalsem
