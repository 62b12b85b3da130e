#pragma once

#include <map>
#include <string>
#include <vector>

#include "mcu/config.hpp"
#include "mcu/data.hpp"
#include "mcu/mlp.hpp"
#include "mcu/report.hpp"
#include "mcu/unlearn.hpp"

namespace mcu {

struct PreparedData {
  SplitDataset split;
  MlpArch arch;
};

/// Generates or loads the dataset and draws the forget / retain / test split.
PreparedData prepare_data(const ExperimentConfig& cfg);

/// Trains on the full training split (forget and retain) from a seeded init. Throws
/// TrainingError with the accuracy curve when the final train accuracy is below the floor.
TrainOutcome train_base(const MlpArch& arch, const SplitDataset& ds, const BaseConfig& base);

/// Retrain-on-retain plus its cache key, which covers the data, model and retrain settings.
ParamVector train_retrain(const MlpArch& arch, const SplitDataset& ds, const BaseConfig& retrain);
std::string retrain_cache_key(const ExperimentConfig& cfg);

/// Dumb (random) reference model, a fresh init seeded from the base seed.
ParamVector make_dumb_model(const MlpArch& arch, const ExperimentConfig& cfg);

struct ManifestEntry {
  std::string path;  // relative to the run directory unless absolute
  std::string hash;
};

struct RunManifest {
  std::string config_hash;
  std::string artifact_version;
  /// Logical checkpoint name (base, dumb, retrain, endpoint1, ...) -> file and payload hash.
  std::map<std::string, ManifestEntry> checkpoints;
  std::string base_checkpoint;
  std::vector<std::string> endpoint_checkpoints;
  std::vector<std::string> curve_checkpoints;
  std::vector<std::string> metric_tables;
  std::vector<std::string> barrier_reports;
  std::vector<std::string> plots;
  std::vector<std::string> completed_stages;
  std::vector<std::string> resumed_stages;
  std::string failed_stage;
  std::string error;
  bool complete = false;
  double wall_clock_seconds = 0.0;
};

std::string render_manifest(const RunManifest& m);
RunManifest parse_manifest(const std::string& text);
RunManifest load_manifest(const std::string& run_dir);

/// Reloads every checkpoint named by the manifest and compares payload hashes.
/// Throws HashMismatchError, TruncatedFileError, MagicMismatchError or IoError.
void verify_manifest(const RunManifest& m, const std::string& run_dir);

struct RunOptions {
  std::string out_dir;
  std::string cache_dir;  // empty: <out_dir>/cache
  int workers = 0;        // 0: default_workers()
  bool resume = true;
  bool plots = true;
};

/// Runs one setting end to end. Training stages persist a checkpoint and are skipped on a
/// rerun with the same config hash. On failure a partial manifest naming the failed stage is
/// written and the error is rethrown.
RunManifest run_setting(const ExperimentConfig& cfg, const RunOptions& options,
                        RunResult* result = nullptr);

/// Rebuilds the run's metrics and barrier reports from its config and checkpoints only.
RunResult reevaluate(const std::string& run_dir, int workers = 0);

/// Writes metrics.csv, report.json and, when requested, one SVG per loss metric.
void write_reports(const RunResult& result, const std::string& out_dir, bool plots,
                   RunManifest* manifest = nullptr);

}  // namespace mcu
