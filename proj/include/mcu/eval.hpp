#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mcu/curves.hpp"
#include "mcu/data.hpp"
#include "mcu/mlp.hpp"
#include "mcu/tensor.hpp"

namespace mcu {

inline constexpr int kDefaultCurvePoints = 16;
inline constexpr double kForgetQualityThreshold = 0.05;
inline constexpr double kDefaultBarrierTolerance = 0.05;

/// Metrics of one model on the split. Losses are mean cross-entropy in nats.
struct MetricRecord {
  double t = 0.0;
  double loss_retain = 0.0;
  double loss_forget = 0.0;
  double acc_test = 0.0;
  double acc_forget = 0.0;
  double acc_retain = 0.0;
  double zrf = 0.0;
  double forget_quality = 0.0;
};

/// Field names in CSV column order, after `t` and `kind`.
const std::vector<std::string>& metric_names();
/// Throws ConfigError listing the valid names.
double metric_value(const MetricRecord& r, const std::string& name);
bool is_loss_metric(const std::string& name);

enum class ZrfReference { random, original };
enum class ForgetStatistic { xent, true_class_prob };

ZrfReference parse_zrf_reference(const std::string& name);
std::string to_string(ZrfReference r);
ForgetStatistic parse_forget_statistic(const std::string& name);
std::string to_string(ForgetStatistic s);

/// Jensen-Shannon divergence with base-2 logs, in [0, 1].
double js_divergence_bits(std::span<const double> p, std::span<const double> q);

/// 1 - mean row-wise JS divergence between the two softmax distributions.
double zrf_score(const Tensor& model_logits, const Tensor& reference_logits);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Asymptotic Kolmogorov tail Q(lambda) = 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 lambda^2).
double kolmogorov_q(double lambda);

/// Two-sample KS test. D is the largest ECDF gap; the p-value is
/// Q((sqrt(ne) + 0.12 + 0.11 / sqrt(ne)) * D) with ne = nm / (n + m), clamped to [0, 1].
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

/// Per-sample statistic on D_f used for forget quality.
std::vector<double> forget_statistic(const MlpArch& arch, const ParamVector& params,
                                     const SplitDataset& ds, ForgetStatistic stat);

/// KS p-value between the D_f statistics of the unlearned and the retrained model.
double forget_quality(const ParamVector& unlearned, const ParamVector& retrained,
                      const MlpArch& arch, const SplitDataset& ds,
                      ForgetStatistic stat = ForgetStatistic::xent);

/// Frozen inputs shared by every point evaluated along a curve.
struct EvalContext {
  MlpArch arch;
  const SplitDataset* ds = nullptr;
  Tensor reference_forget_logits;  // ZRF reference model on D_f
  std::vector<double> retrained_forget_stat;
  ForgetStatistic statistic = ForgetStatistic::xent;

  /// Throws ConfigError when any split is empty.
  static EvalContext make(const MlpArch& arch, const SplitDataset& ds,
                          const ParamVector& reference, const ParamVector& retrained,
                          ForgetStatistic stat = ForgetStatistic::xent);
};

MetricRecord evaluate_point(const EvalContext& ctx, const ParamVector& params, double t = 0.0);
MetricRecord evaluate_point(const MlpArch& arch, const ParamVector& params,
                            const SplitDataset& ds, const ParamVector& dumb,
                            const ParamVector& retrained);

/// Worker count from MCU_NUM_WORKERS, else the available parallelism.
int default_workers();

/// Evaluates the curve on an n_points grid, one grid point per worker.
std::vector<MetricRecord> evaluate_curve(const EvalContext& ctx, const CurveSpec& spec,
                                         int n_points, int workers = 0);
std::vector<MetricRecord> evaluate_curve_serial(const EvalContext& ctx, const CurveSpec& spec,
                                                int n_points);

struct BarrierReport {
  double retain_barrier_height = 0.0;
  double retain_argmax_t = 0.0;
  double forget_cliff_depth = 0.0;
  double forget_argmax_t = 0.0;
  double tau = kDefaultBarrierTolerance;
  bool mcu_holds = true;
};

/// Largest excess of `values` over the chord from (0, v0) to (1, v1), with the chord
/// weighted (1 - t) on v0. Returns (height, t of the first maximizer).
std::pair<double, double> chord_excess(std::span<const double> ts, std::span<const double> values,
                                       double v0, double v1);

/// Retain barrier and forget cliff of a curve profile against its endpoint records.
/// Records must be strictly increasing in t within [0, 1].
BarrierReport barrier_profile(std::span<const MetricRecord> records,
                              const std::pair<MetricRecord, MetricRecord>& endpoints, double tau);

/// Single-dataset barrier on the retain loss.
double mc_barrier_standard(std::span<const MetricRecord> records,
                           const std::pair<MetricRecord, MetricRecord>& endpoints, double tau);

}  // namespace mcu
