#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "fedgat/adam.hpp"
#include "fedgat/dataset.hpp"
#include "fedgat/federated.hpp"
#include "fedgat/gat.hpp"
#include "fedgat/metrics.hpp"
#include "fedgat/text.hpp"

namespace fedgat {

// Model initialization stream under the run seed (split uses 1, partition 2,
// sampling 11, epoch shuffles 12).
inline constexpr std::uint64_t kInitStream = 10;
// Per-repetition seed stream for sweeps.
inline constexpr std::uint64_t kSweepStream = 13;

inline constexpr int kRunFormatVersion = 1;

// One input corpus. Exactly one of `jsonl` or `tree_dir`+`label_file` is set;
// events from the i-th listed dataset carry source index i.
struct DatasetSpec {
  std::string name;
  std::string jsonl;
  std::string tree_dir;
  std::string label_file;
};

struct FeatureConfig {
  std::size_t vocab_size = 5000;
  FeatureMode mode = FeatureMode::Tfidf;
};

struct ExperimentConfig {
  std::vector<DatasetSpec> datasets;
  std::array<double, 3> split{0.7, 0.1, 0.2};  // train, val, test
  PartitionStrategy partition = PartitionStrategy::Iid;
  FedConfig federated;
  ModelConfig model;  // input_dim is resolved from the vocabulary at run time
  FeatureConfig features;
  AdamConfig optimizer;
  std::uint64_t seed = 0;
  std::string output_dir = "run";
};

// Parses and validates; throws ConfigError listing every violation with its
// field path. A syntactically broken document yields a single error carrying
// the parser's line and column.
ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// Fully resolved document: every field explicit, defaults filled in, plus the
// run format version. parse(experiment_config_json(c)) reproduces c.
std::string experiment_config_json(const ExperimentConfig& cfg);

// FEDGAT_SEED and FEDGAT_OUTPUT_DIR, when set, replace the config values.
void apply_env_overrides(ExperimentConfig& cfg);

struct ExperimentResult {
  std::vector<RoundRecord> history;
  MetricsReport val_metrics;   // empty totals when the split is empty
  MetricsReport test_metrics;
  std::size_t vocabulary_size = 0;
};

// Full pipeline: load, split, featurize, partition, train b rounds, then
// write history.jsonl, loss_curve.csv, metrics.json, metrics.txt,
// checkpoint.bin, and config.resolved.json under cfg.output_dir.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

struct SweepSpec {
  std::string parameter;  // "m&k" or "lambda"
  std::vector<std::pair<std::size_t, std::size_t>> mk_values;
  std::vector<double> lambda_values;
  std::size_t repetitions = 1;
};

SweepSpec parse_sweep_spec(const std::string& text);
SweepSpec load_sweep_spec(const std::filesystem::path& path);

struct SweepCell {
  std::string value_tag;
  std::size_t repetition = 0;
  std::string directory;
  bool ok = false;
  std::string error;
  double final_val_loss = 0.0;
  double final_val_accuracy = 0.0;
};

struct SweepResult {
  std::vector<SweepCell> cells;
  std::size_t failed = 0;
};

// One run_experiment per (value, repetition) in its own sub-directory of
// base.output_dir. Repetition r of every value shares the seed derived for r,
// so values can be compared pairwise. Failures are recorded and the remaining
// cells still run. Writes combined.csv, summary.csv, sweep.json, and for m&k
// sweeps the k-trend table trend.csv.
SweepResult run_sweep(const SweepSpec& spec, const ExperimentConfig& base);

}  // namespace fedgat
