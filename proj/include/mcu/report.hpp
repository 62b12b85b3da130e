#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "mcu/config.hpp"
#include "mcu/curves.hpp"
#include "mcu/eval.hpp"

namespace mcu {

inline constexpr const char* kArtifactVersion = "mcu-0.1.0";
inline constexpr const char* kCsvHeader =
    "t,kind,loss_retain,loss_forget,acc_test,acc_forget,acc_retain,zrf,forget_quality";

struct CurveOutcome {
  CurveKind kind = CurveKind::linear;
  std::vector<MetricRecord> records;
  BarrierReport barrier;
  double mc_barrier = 0.0;
  /// Mean sampled objective over the first and last 100 midpoint steps (bezier only).
  double objective_head = 0.0;
  double objective_tail = 0.0;
};

struct EndpointSummary {
  EndpointPlan plan;
  MetricRecord metrics;
  bool diverged = false;
  std::size_t steps = 0;
};

struct ReplicateOutcome {
  int index = 0;
  std::pair<std::uint64_t, std::uint64_t> seeds;
  std::vector<CurveOutcome> curves;
};

/// Everything the report and plots are rendered from.
struct RunResult {
  ExperimentConfig config;
  MetricRecord original;
  MetricRecord retrained;
  std::array<EndpointSummary, 2> endpoints;
  std::vector<CurveOutcome> curves;
  /// Replicates after the first, which is `curves`.
  std::vector<ReplicateOutcome> extra_replicates;
  /// Relative checkpoint path -> payload hash.
  std::map<std::string, std::string> checkpoint_hashes;
};

/// One row per (curve kind, t) under kCsvHeader.
std::string render_csv(const RunResult& result);
/// Barrier reports, config echo, endpoint metrics, replicate aggregates and checkpoint hashes.
std::string render_json(const RunResult& result);
/// Metric against t, one polyline per curve kind, with the endpoint chord dashed and the
/// tolerance band shaded for loss metrics. Throws ConfigError for unknown metrics.
std::string render_svg(const RunResult& result, const std::string& metric);

/// Writes `content` to `path` atomically; errors name the path.
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace mcu
