// stpp: experiment runner for supervised / ST / ST++ training on generated data.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stpp/datagen.hpp"
#include "stpp/error.hpp"
#include "stpp/experiment.hpp"

namespace {

enum ExitCode {
  kOk = 0,
  kUnknown = 1,
  kConfig = 2,
  kMissingFile = 3,
  kNumeric = 4,
  kData = 5,
};

int exit_code_for(stpp::ErrorKind kind) {
  switch (kind) {
    case stpp::ErrorKind::kConfig:
    case stpp::ErrorKind::kRange:
      return kConfig;
    case stpp::ErrorKind::kIo:
      return kMissingFile;
    case stpp::ErrorKind::kNumeric:
      return kNumeric;
    default:
      return kData;
  }
}

stpp::exp::ExperimentConfig load(const std::string& path, const std::string& pipeline, const std::string& ablation) {
  auto cfg = stpp::exp::load_config(path);
  if (!pipeline.empty()) cfg.pipeline_name = pipeline;
  if (!ablation.empty()) cfg.ablation = ablation;
  stpp::exp::validate_experiment(cfg);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-training for semi-supervised segmentation on synthetic data"};
  app.require_subcommand(1);

  std::string config_path, out_dir, data_dir, run_dir, pipeline, ablation;
  std::vector<std::uint64_t> seeds;
  std::uint64_t seed = 0;
  int jobs = 1;

  auto* gen = app.add_subcommand("generate-data", "Write a generated dataset to a directory");
  gen->add_option("--config", config_path, "Experiment config (JSON)")->required();
  gen->add_option("--seed", seed, "Generator seed (default: first config seed)");
  gen->add_option("--out", out_dir, "Dataset directory (default: <output root>/data-seed<seed>)");

  auto* run = app.add_subcommand("run", "Run one pipeline for one seed");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--pipeline", pipeline, "suponly | st | stpp")
      ->check(CLI::IsMember({"suponly", "st", "stpp"}));
  run->add_option("--ablation", ablation, "Ablation mode");
  run->add_option("--seed", seed, "Seed (default: first config seed)");
  run->add_option("--data", data_dir, "Use a dataset written by generate-data");

  auto* bench = app.add_subcommand("benchmark", "SupOnly, ST, ST++ and random two-stage over several seeds");
  bench->add_option("--config", config_path, "Experiment config (JSON)")->required();
  bench->add_option("--seeds", seeds, "Seeds (default: config seeds)");
  bench->add_option("--jobs", jobs, "Seeds run concurrently")->check(CLI::PositiveNumber);

  auto* inspect = app.add_subcommand("inspect-scores", "Score table and bucket summary of an ST++ run");
  inspect->add_option("--run", run_dir, "Run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfig;
  }

  try {
    if (*gen) {
      auto cfg = load(config_path, "", "");
      const std::uint64_t s = gen->count("--seed") ? seed : cfg.seeds.front();
      const auto data = stpp::datagen::generate(stpp::exp::data_for_seed(cfg, s));
      const std::filesystem::path dir =
          out_dir.empty() ? stpp::exp::output_root(cfg) / ("data-seed" + std::to_string(s)) : std::filesystem::path(out_dir);
      stpp::datagen::write_dataset(dir, data);
      std::cout << dir.string() << '\n';
    } else if (*run) {
      auto cfg = load(config_path, pipeline, ablation);
      const std::uint64_t s = run->count("--seed") ? seed : cfg.seeds.front();
      std::optional<stpp::datagen::GeneratedData> data;
      if (!data_dir.empty()) data = stpp::datagen::read_dataset(data_dir);
      const auto out = stpp::exp::run_experiment(cfg, s, cfg.pipeline_name, cfg.ablation,
                                                 stpp::exp::output_root(cfg), data ? &*data : nullptr);
      std::cout << out.dir.string() << '\n';
      for (const auto& st : out.result.report.stages)
        if (st.validation) std::printf("%s val_miou %.4f\n", st.name.c_str(), st.validation->miou);
    } else if (*bench) {
      auto cfg = load(config_path, "", "");
      if (seeds.empty()) seeds = cfg.seeds;
      const auto root = stpp::exp::output_root(cfg);
      const auto entries = stpp::exp::default_benchmark_entries();
      const auto res = stpp::exp::run_benchmark(cfg, seeds, entries, root, jobs);
      for (const auto& e : entries) {
        double mean = 0;
        for (auto s : seeds) mean += res.final_miou(s, e.label());
        std::printf("%-24s mean val_miou %.4f\n", e.label().c_str(), mean / static_cast<double>(seeds.size()));
      }
      std::cout << (root / "aggregate.csv").string() << '\n';
    } else if (*inspect) {
      stpp::exp::inspect_scores(run_dir, std::cout);
    }
  } catch (const stpp::Error& e) {
    std::cerr << "error [" << stpp::to_string(e.kind()) << "]: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error [io]: " << e.what() << '\n';
    return kMissingFile;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUnknown;
  }
  return kOk;
}
