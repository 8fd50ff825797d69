#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "causalsem/errors.hpp"
#include "causalsem/pipeline.hpp"
#include "causalsem/version.hpp"

namespace {

// Exit codes: 0 success, 1 config error, 2 I/O error, 3 numeric failure.
constexpr int kOkExit = 0;
constexpr int kConfigExit = 1;
constexpr int kIoExit = 2;
constexpr int kNumericExit = 3;

causalsem::ExperimentConfig load_config(const std::string& path,
                                        const std::vector<std::string>& overrides) {
  causalsem::ConfigFile file = causalsem::ConfigFile::load(path);
  for (const std::string& o : overrides) file.apply_override(o);
  return causalsem::ExperimentConfig::from_file(file);
}

void print_stage(const std::string& name, const causalsem::StageInfo& info) {
  std::printf("%s finished in %.2fs\n", name.c_str(), info.seconds);
  for (const std::string& p : info.paths) std::printf("  %s\n", p.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SEM data generation, DAG structure learning, causal autoencoder "
               "training and sigma-contour evaluation"};
  app.set_version_flag("--version", causalsem::kVersion);
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("-c,--config", config_path, "experiment config file")->required();
  app.add_option("--set", overrides,
                 "override a scalar config field, e.g. --set train.epochs=50");

  std::string dataset_path;
  std::string checkpoint_path;
  std::string mask_source;
  bool resume = false;
  bool force = false;

  CLI::App* generate = app.add_subcommand("generate", "sample a ground-truth dataset");
  CLI::App* learn = app.add_subcommand("learn-structure", "fit a weighted DAG");
  learn->add_option("--dataset", dataset_path, "dataset CSV (default: out_dir/dataset.csv)");
  CLI::App* train = app.add_subcommand("train", "train the causal autoencoder");
  train->add_option("--dataset", dataset_path, "dataset CSV (default: out_dir/dataset.csv)");
  train->add_option("--mask-source", mask_source, "learned | truth (default: config)");
  CLI::App* evaluate = app.add_subcommand("evaluate", "sigma-contour KL reports");
  evaluate->add_option("--checkpoint", checkpoint_path,
                       "checkpoint (default: out_dir/checkpoint.json)");
  CLI::App* pipeline = app.add_subcommand("pipeline", "run all stages under one manifest");
  pipeline->add_flag("--resume", resume, "skip stages whose artifacts already exist");
  pipeline->add_flag("--force", force, "overwrite artifacts from a different config");

  CLI11_PARSE(app, argc, argv);

  try {
    const causalsem::ExperimentConfig config = load_config(config_path, overrides);
    const causalsem::RunPaths paths(config.out_dir);
    if (dataset_path.empty()) dataset_path = paths.dataset_csv;
    if (checkpoint_path.empty()) checkpoint_path = paths.checkpoint;
    if (mask_source.empty()) mask_source = config.mask_source;

    if (generate->parsed()) {
      print_stage("generate", causalsem::cmd_generate(config));
    } else if (learn->parsed()) {
      print_stage("learn-structure", causalsem::cmd_learn_structure(config, dataset_path));
    } else if (train->parsed()) {
      print_stage("train", causalsem::cmd_train(config, dataset_path, mask_source));
    } else if (evaluate->parsed()) {
      print_stage("evaluate", causalsem::cmd_evaluate(config, checkpoint_path));
    } else if (pipeline->parsed()) {
      causalsem::RunManifest manifest = causalsem::cmd_pipeline(config, resume, force);
      for (const auto& [name, info] : manifest.stages) print_stage(name, info);
      std::printf("manifest: %s (config %s)\n", paths.manifest.c_str(),
                  manifest.config_hash.c_str());
    }
    return kOkExit;
  } catch (const causalsem::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigExit;
  } catch (const causalsem::DimensionError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigExit;
  } catch (const causalsem::IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return kIoExit;
  } catch (const causalsem::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kNumericExit;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kNumericExit;
  }
}
