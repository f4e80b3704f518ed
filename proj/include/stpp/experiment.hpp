#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stpp/datagen.hpp"
#include "stpp/pipeline.hpp"

namespace stpp::exp {

struct ExperimentConfig {
  datagen::GenConfig data;
  pipeline::PipelineConfig pipeline;
  std::string pipeline_name = "stpp";
  std::string ablation;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::string output_dir = "runs";
};

/// Parses the JSON experiment config; unknown keys are rejected, absent keys keep defaults.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Fully populated JSON with sorted keys.
std::string dump_config(const ExperimentConfig& cfg);

/// FNV-1a over dump_config() with output_dir excluded.
std::uint64_t config_hash(const ExperimentConfig& cfg);
std::string hash_hex(std::uint64_t hash);

/// Pre-flight validation run before any compute.
void validate_experiment(const ExperimentConfig& cfg);

/// Output root, honouring the STPP_OUTPUT_ROOT environment override.
std::filesystem::path output_root(const ExperimentConfig& cfg);

/// Data and pipeline configs for one seed.
datagen::GenConfig data_for_seed(const ExperimentConfig& cfg, std::uint64_t seed);
pipeline::PipelineConfig pipeline_for_seed(const ExperimentConfig& cfg, std::uint64_t seed);

std::string run_name(const std::string& pipeline, const std::string& ablation, std::uint64_t seed);

struct RunOutcome {
  std::filesystem::path dir;
  pipeline::RunResult result;
};

/// Runs one pipeline for one seed and writes its directory:
///   report.csv, timing.csv, manifest.csv, <stage>/{*.ckpt, pseudo_masks/, *.csv, report_fragment.csv}
/// `data` overrides on-the-fly generation.
RunOutcome run_experiment(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& pipeline,
                          const std::string& ablation, const std::filesystem::path& root,
                          const datagen::GeneratedData* data = nullptr);

struct BenchmarkEntry {
  std::string pipeline;
  std::string ablation;
  std::string label() const { return ablation.empty() ? pipeline : pipeline + ":" + ablation; }
};

std::vector<BenchmarkEntry> default_benchmark_entries();

struct BenchmarkResult {
  std::vector<std::uint64_t> seeds;
  std::vector<BenchmarkEntry> entries;
  std::map<std::uint64_t, std::map<std::string, pipeline::RunReport>> reports;  // seed -> label -> report

  /// Final-stage validation mIoU.
  double final_miou(std::uint64_t seed, const std::string& label) const;
};

/// Every (seed, entry) run plus seed_<s>.csv per seed, aggregate.csv and stage_curves.csv.
/// Runs seeds on up to `jobs` threads; results do not depend on `jobs`.
BenchmarkResult run_benchmark(const ExperimentConfig& cfg, const std::vector<std::uint64_t>& seeds,
                              const std::vector<BenchmarkEntry>& entries, const std::filesystem::path& root,
                              int jobs = 1);

/// Score table plus the per-bucket pseudo-mask summary for a finished ST++ run directory.
void inspect_scores(const std::filesystem::path& run_dir, std::ostream& out);

}  // namespace stpp::exp
