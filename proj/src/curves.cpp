#include "mcu/curves.hpp"

#include <cmath>
#include <sstream>

#include "mcu/rng.hpp"

namespace mcu {

CurveKind parse_curve_kind(const std::string& name) {
  if (name == "linear") return CurveKind::linear;
  if (name == "bezier") return CurveKind::bezier;
  throw ConfigError("unknown curve kind '" + name + "' (expected linear or bezier)");
}

std::string to_string(CurveKind k) { return k == CurveKind::linear ? "linear" : "bezier"; }

void CurveSpec::validate() const {
  require_same_length(theta1, theta2, "curve endpoints");
  if (kind == CurveKind::linear && theta12) {
    throw ConfigError("a linear curve has no midpoint");
  }
  if (kind == CurveKind::bezier) {
    if (!theta12) throw ConfigError("a bezier curve needs a midpoint");
    require_same_length(theta1, *theta12, "curve midpoint");
  }
}

CurveSpec make_linear(ParamVector theta1, ParamVector theta2) {
  CurveSpec spec{CurveKind::linear, std::move(theta1), std::move(theta2), std::nullopt, false};
  spec.validate();
  return spec;
}

CurveSpec make_bezier(ParamVector theta1, ParamVector theta2) {
  ParamVector mid = init_midpoint(theta1, theta2);
  CurveSpec spec{CurveKind::bezier, std::move(theta1), std::move(theta2), std::move(mid), false};
  spec.validate();
  return spec;
}

ParamVector init_midpoint(const ParamVector& theta1, const ParamVector& theta2) {
  require_same_length(theta1, theta2, "init_midpoint");
  ParamVector mid = theta1;
  for (std::size_t i = 0; i < mid.size(); ++i) {
    mid.values[i] = static_cast<float>(
        (static_cast<double>(theta1.values[i]) + static_cast<double>(theta2.values[i])) * 0.5);
  }
  return mid;
}

namespace {

struct Weights {
  double u;  // 1 - t
  double s;  // 1 - u, so that u + s == 1 exactly
};

Weights split(double t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    std::ostringstream os;
    os << "curve parameter t = " << t << " outside [0, 1]";
    throw DomainError(os.str());
  }
  const double u = 1.0 - t;
  return {u, 1.0 - u};
}

}  // namespace

double midpoint_factor(double t) {
  const auto w = split(t);
  return 2.0 * (w.s * w.u);
}

ParamVector curve_point(const CurveSpec& spec, double t) {
  spec.validate();
  const auto w = split(t);
  ParamVector out = spec.theta1;
  const auto& x1 = spec.theta1.values;
  const auto& x2 = spec.theta2.values;
  if (spec.kind == CurveKind::linear) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      out.values[i] = static_cast<float>(w.u * x1[i] + w.s * x2[i]);
    }
    return out;
  }
  const auto& x12 = spec.theta12->values;
  const double a = w.u * w.u;
  const double b = 2.0 * (w.s * w.u);
  const double c = w.s * w.s;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.values[i] = static_cast<float>((a * x1[i] + c * x2[i]) + b * x12[i]);
  }
  return out;
}

double curve_speed(const CurveSpec& spec, double t) {
  spec.validate();
  const auto w = split(t);
  double sq = 0.0;
  for (std::size_t i = 0; i < spec.theta1.size(); ++i) {
    const double x1 = spec.theta1.values[i], x2 = spec.theta2.values[i];
    double d = x2 - x1;
    if (spec.kind == CurveKind::bezier) {
      const double x12 = spec.theta12->values[i];
      d = 2.0 * w.u * (x12 - x1) + 2.0 * w.s * (x2 - x12);
    }
    sq += d * d;
  }
  return std::sqrt(sq);
}

std::vector<double> curve_grid(int n_points) {
  if (n_points < 2) {
    throw ConfigError("n_points must be >= 2 (got " + std::to_string(n_points) + ")");
  }
  std::vector<double> ts(static_cast<std::size_t>(n_points));
  for (int i = 0; i < n_points; ++i) ts[i] = static_cast<double>(i) / (n_points - 1);
  return ts;
}

std::vector<std::pair<double, ParamVector>> sample_curve(const CurveSpec& spec, int n_points) {
  std::vector<std::pair<double, ParamVector>> out;
  for (double t : curve_grid(n_points)) out.emplace_back(t, curve_point(spec, t));
  return out;
}

CurveTrainResult train_midpoint(const CurveSpec& spec, const UnlearnObjective& objective,
                                const CurveTrainOptions& options) {
  if (spec.kind != CurveKind::bezier) throw ConfigError("only a bezier midpoint can be trained");
  if (options.steps < 0) throw ConfigError("curve training steps must be >= 0");
  spec.validate();

  CurveTrainResult result{spec, {}, {}};
  ParamVector& mid = *result.spec.theta12;
  OptimizerState opt(options.optimizer, mid);
  Rng t_rng(derive_seed(options.seed, 11));
  BatchStream stream(objective, derive_seed(options.seed, 12));
  const auto grid = curve_grid(std::max(2, options.arclength_grid));

  for (int step = 0; step < options.steps; ++step) {
    const double t = t_rng.uniform();
    const StepBatch& batch = stream.next();
    const Objective fn = objective.bind(batch);
    const ParamVector point = curve_point(result.spec, t);

    double weight = midpoint_factor(t);
    if (options.arclength_weighting) {
      double mean_speed = 0.0;
      for (double g : grid) mean_speed += curve_speed(result.spec, g);
      mean_speed /= static_cast<double>(grid.size());
      if (mean_speed > 0.0) weight *= curve_speed(result.spec, t) / mean_speed;
    }

    std::optional<ParamVector> curvature;
    if (wants_curvature(opt)) {
      curvature = estimate_hessian_diag(fn, point, options.optimizer.hessian_probes,
                                        derive_seed(options.seed, 2000 + step));
      for (auto& h : curvature->values) h = static_cast<float>(h * weight * weight);
    }

    ValueAndGrad vg = value_and_grad(fn, point);
    bool finite = std::isfinite(vg.value);
    for (float g : vg.grad.values) finite = finite && std::isfinite(g);
    if (!finite) {
      std::ostringstream os;
      os << "non-finite curve objective at t = " << t << " (step " << step << ")";
      throw CurveTrainingError(os.str(), t);
    }
    result.objective_history.push_back(vg.value);
    result.t_history.push_back(t);
    if (weight == 0.0) continue;

    ParamVector grad = std::move(vg.grad);
    grad.layout = mid.layout;
    for (auto& g : grad.values) g = static_cast<float>(g * weight);
    optimizer_step(opt, mid, grad, curvature ? &*curvature : nullptr, objective.mask());
  }
  result.spec.trained = true;
  return result;
}

}  // namespace mcu
