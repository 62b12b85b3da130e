#include "mcu/eval.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <thread>

#include "mcu/error.hpp"
#include "mcu/losses.hpp"
#include "mcu/unlearn.hpp"

namespace mcu {

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {"loss_retain", "loss_forget", "acc_test",
                                                 "acc_forget",  "acc_retain",  "zrf",
                                                 "forget_quality"};
  return names;
}

double metric_value(const MetricRecord& r, const std::string& name) {
  if (name == "loss_retain") return r.loss_retain;
  if (name == "loss_forget") return r.loss_forget;
  if (name == "acc_test") return r.acc_test;
  if (name == "acc_forget") return r.acc_forget;
  if (name == "acc_retain") return r.acc_retain;
  if (name == "zrf") return r.zrf;
  if (name == "forget_quality") return r.forget_quality;
  std::string valid;
  for (const auto& n : metric_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw ConfigError("unknown metric '" + name + "' (valid: " + valid + ")");
}

bool is_loss_metric(const std::string& name) {
  return name == "loss_retain" || name == "loss_forget";
}

ZrfReference parse_zrf_reference(const std::string& name) {
  if (name == "random") return ZrfReference::random;
  if (name == "original") return ZrfReference::original;
  throw ConfigError("unknown zrf reference '" + name + "' (expected random or original)");
}

std::string to_string(ZrfReference r) { return r == ZrfReference::random ? "random" : "original"; }

ForgetStatistic parse_forget_statistic(const std::string& name) {
  if (name == "xent") return ForgetStatistic::xent;
  if (name == "true_class_prob") return ForgetStatistic::true_class_prob;
  throw ConfigError("unknown forget statistic '" + name + "' (expected xent or true_class_prob)");
}

std::string to_string(ForgetStatistic s) {
  return s == ForgetStatistic::xent ? "xent" : "true_class_prob";
}

double js_divergence_bits(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw DimensionError("js divergence of distributions with " + std::to_string(p.size()) +
                         " and " + std::to_string(q.size()) + " outcomes");
  }
  double js = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) js += 0.5 * p[i] * std::log2(p[i] / m);
    if (q[i] > 0.0) js += 0.5 * q[i] * std::log2(q[i] / m);
  }
  return std::clamp(js, 0.0, 1.0);
}

namespace {

std::vector<double> softmax_row(std::span<const float> logits) {
  auto ls = log_softmax_row(logits);
  for (auto& v : ls) v = std::exp(v);
  return ls;
}

}  // namespace

double zrf_score(const Tensor& model_logits, const Tensor& reference_logits) {
  require_same_shape(model_logits.shape, reference_logits.shape, "zrf_score");
  if (model_logits.rank() != 2 || model_logits.shape[0] == 0) {
    throw DimensionError("zrf_score expects non-empty [rows, classes] logits, got " +
                         shape_string(model_logits.shape));
  }
  const std::size_t rows = model_logits.shape[0], c = model_logits.shape[1];
  double total = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    auto p = softmax_row({model_logits.data.data() + i * c, c});
    auto q = softmax_row({reference_logits.data.data() + i * c, c});
    total += js_divergence_bits(p, q);
  }
  return std::clamp(1.0 - total / static_cast<double>(rows), 0.0, 1.0);
}

double kolmogorov_q(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  constexpr double pi = 3.14159265358979323846;
  double q;
  if (lambda < 1.18) {
    // Jacobi theta form converges fast for small lambda.
    const double x = -pi * pi / (8.0 * lambda * lambda);
    double s = 0.0;
    for (int k = 1; k <= 100; ++k) {
      const double odd = 2.0 * k - 1.0;
      const double term = std::exp(odd * odd * x);
      s += term;
      if (term < 1e-18) break;
    }
    q = 1.0 - std::sqrt(2.0 * pi) / lambda * s;
  } else {
    double s = 0.0;
    for (int k = 1; k <= 100; ++k) {
      const double term = std::exp(-2.0 * k * k * lambda * lambda);
      s += (k % 2 == 1) ? term : -term;
      if (term < 1e-18) break;
    }
    q = 2.0 * s;
  }
  return std::clamp(q, 0.0, 1.0);
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ConfigError("ks_two_sample needs two non-empty samples");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  for (double v : x) if (std::isnan(v)) throw NumericError("ks_two_sample: NaN in first sample");
  for (double v : y) if (std::isnan(v)) throw NumericError("ks_two_sample: NaN in second sample");
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const std::size_t n = x.size(), m = y.size();
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < n && j < m) {
    const double v = std::min(x[i], y[j]);
    while (i < n && x[i] == v) ++i;
    while (j < m && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  const double ne = static_cast<double>(n) * m / static_cast<double>(n + m);
  const double root = std::sqrt(ne);
  return {d, kolmogorov_q((root + 0.12 + 0.11 / root) * d)};
}

std::vector<double> forget_statistic(const MlpArch& arch, const ParamVector& params,
                                     const SplitDataset& ds, ForgetStatistic stat) {
  if (ds.forget_idx.empty()) throw ConfigError("forget set is empty");
  const Tensor logits = forward_logits(arch, params, ds.gather_features(ds.forget_idx));
  const auto labels = ds.gather_labels(ds.forget_idx);
  return stat == ForgetStatistic::xent ? per_sample_xent(logits, labels)
                                       : true_class_prob(logits, labels);
}

double forget_quality(const ParamVector& unlearned, const ParamVector& retrained,
                      const MlpArch& arch, const SplitDataset& ds, ForgetStatistic stat) {
  return ks_two_sample(forget_statistic(arch, unlearned, ds, stat),
                       forget_statistic(arch, retrained, ds, stat))
      .p_value;
}

EvalContext EvalContext::make(const MlpArch& arch, const SplitDataset& ds,
                              const ParamVector& reference, const ParamVector& retrained,
                              ForgetStatistic stat) {
  if (ds.forget_idx.empty() || ds.retain_idx.empty() || ds.test_idx.empty()) {
    throw ConfigError("evaluation needs non-empty forget, retain and test splits");
  }
  EvalContext ctx;
  ctx.arch = arch;
  ctx.ds = &ds;
  ctx.reference_forget_logits = forward_logits(arch, reference, ds.gather_features(ds.forget_idx));
  ctx.retrained_forget_stat = forget_statistic(arch, retrained, ds, stat);
  ctx.statistic = stat;
  return ctx;
}

MetricRecord evaluate_point(const EvalContext& ctx, const ParamVector& params, double t) {
  const SplitDataset& ds = *ctx.ds;
  MetricRecord r;
  r.t = t;
  r.loss_retain = subset_loss(ctx.arch, params, ds, ds.retain_idx);
  r.loss_forget = subset_loss(ctx.arch, params, ds, ds.forget_idx);
  r.acc_test = subset_accuracy(ctx.arch, params, ds, ds.test_idx);
  r.acc_forget = subset_accuracy(ctx.arch, params, ds, ds.forget_idx);
  r.acc_retain = subset_accuracy(ctx.arch, params, ds, ds.retain_idx);
  const Tensor forget_logits = forward_logits(ctx.arch, params, ds.gather_features(ds.forget_idx));
  r.zrf = zrf_score(forget_logits, ctx.reference_forget_logits);
  r.forget_quality =
      ks_two_sample(forget_statistic(ctx.arch, params, ds, ctx.statistic), ctx.retrained_forget_stat)
          .p_value;
  return r;
}

MetricRecord evaluate_point(const MlpArch& arch, const ParamVector& params,
                            const SplitDataset& ds, const ParamVector& dumb,
                            const ParamVector& retrained) {
  return evaluate_point(EvalContext::make(arch, ds, dumb, retrained), params, 0.0);
}

int default_workers() {
  if (const char* env = std::getenv("MCU_NUM_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) {
      throw ConfigError(std::string("MCU_NUM_WORKERS must be a positive integer, got '") + env +
                        "'");
    }
    return static_cast<int>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<MetricRecord> evaluate_curve(const EvalContext& ctx, const CurveSpec& spec,
                                         int n_points, int workers) {
  const auto grid = curve_grid(n_points);
  spec.validate();
  if (workers <= 0) workers = default_workers();
  std::vector<MetricRecord> out(grid.size());
  std::vector<std::string> errors(grid.size());
  const auto n = static_cast<std::ptrdiff_t>(grid.size());
#pragma omp parallel for num_threads(workers) schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[i] = evaluate_point(ctx, curve_point(spec, grid[i]), grid[i]);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty()) throw NumericError("curve evaluation at t = " +
                                               std::to_string(grid[i]) + ": " + errors[i]);
  }
  return out;
}

std::vector<MetricRecord> evaluate_curve_serial(const EvalContext& ctx, const CurveSpec& spec,
                                                int n_points) {
  std::vector<MetricRecord> out;
  for (double t : curve_grid(n_points)) out.push_back(evaluate_point(ctx, curve_point(spec, t), t));
  return out;
}

std::pair<double, double> chord_excess(std::span<const double> ts, std::span<const double> values,
                                       double v0, double v1) {
  if (ts.size() != values.size()) throw DimensionError("chord_excess: length mismatch");
  if (ts.empty()) throw ContractViolation("barrier profile needs at least one record");
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (!(ts[i] >= 0.0 && ts[i] <= 1.0)) {
      throw ContractViolation("record t = " + std::to_string(ts[i]) + " outside [0, 1]");
    }
    if (i > 0 && !(ts[i] > ts[i - 1])) {
      throw ContractViolation("records must be strictly increasing in t (index " +
                              std::to_string(i) + ")");
    }
  }
  double best = -std::numeric_limits<double>::infinity();
  double arg = ts.front();
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double chord = (1.0 - ts[i]) * v0 + ts[i] * v1;
    const double excess = values[i] - chord;
    if (excess > best) {
      best = excess;
      arg = ts[i];
    }
  }
  return {best, arg};
}

namespace {

std::vector<double> field(std::span<const MetricRecord> records, double MetricRecord::*member) {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.*member);
  return out;
}

}  // namespace

BarrierReport barrier_profile(std::span<const MetricRecord> records,
                              const std::pair<MetricRecord, MetricRecord>& endpoints, double tau) {
  if (!(tau >= 0.0)) throw ConfigError("barrier tolerance must be >= 0");
  const auto ts = field(records, &MetricRecord::t);
  BarrierReport rep;
  rep.tau = tau;
  auto [h, ht] = chord_excess(ts, field(records, &MetricRecord::loss_retain),
                              endpoints.first.loss_retain, endpoints.second.loss_retain);
  rep.retain_barrier_height = h;
  rep.retain_argmax_t = ht;
  auto neg = field(records, &MetricRecord::loss_forget);
  for (auto& v : neg) v = -v;
  auto [c, ct] = chord_excess(ts, neg, -endpoints.first.loss_forget, -endpoints.second.loss_forget);
  rep.forget_cliff_depth = c;
  rep.forget_argmax_t = ct;
  rep.mcu_holds = rep.retain_barrier_height <= tau && rep.forget_cliff_depth <= tau;
  return rep;
}

double mc_barrier_standard(std::span<const MetricRecord> records,
                           const std::pair<MetricRecord, MetricRecord>& endpoints, double tau) {
  return barrier_profile(records, endpoints, tau).retain_barrier_height;
}

}  // namespace mcu
