#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mcu/error.hpp"
#include "mcu/optim.hpp"
#include "mcu/param_vector.hpp"
#include "mcu/unlearn.hpp"

namespace mcu {

enum class CurveKind { linear, bezier };

CurveKind parse_curve_kind(const std::string& name);
std::string to_string(CurveKind k);

/// A path phi(t) with phi(0) = theta1 and phi(1) = theta2.
struct CurveSpec {
  CurveKind kind = CurveKind::linear;
  ParamVector theta1;
  ParamVector theta2;
  std::optional<ParamVector> theta12;
  bool trained = false;

  /// Throws DimensionError on length mismatch and ConfigError on a missing or stray midpoint.
  void validate() const;
};

CurveSpec make_linear(ParamVector theta1, ParamVector theta2);
/// Bezier curve with the midpoint initialized to the endpoint average.
CurveSpec make_bezier(ParamVector theta1, ParamVector theta2);

/// Linear: u*theta1 + s*theta2. Bezier: (u^2*theta1 + s^2*theta2) + 2us*theta12.
/// Here u = 1 - t and s = 1 - u, so u + s == 1 exactly; evaluated in double per coordinate.
ParamVector curve_point(const CurveSpec& spec, double t);

/// (theta1 + theta2) / 2.
ParamVector init_midpoint(const ParamVector& theta1, const ParamVector& theta2);

/// d phi / d theta12 = 2 t (1 - t), with the same u, s split as curve_point.
double midpoint_factor(double t);

/// |phi'(t)|_2 for the given curve.
double curve_speed(const CurveSpec& spec, double t);

/// t_i = i / (n_points - 1) for i = 0 .. n_points - 1.
std::vector<double> curve_grid(int n_points);
std::vector<std::pair<double, ParamVector>> sample_curve(const CurveSpec& spec, int n_points);

struct CurveTrainOptions {
  int steps = 500;
  OptimizerConfig optimizer;
  std::uint64_t seed = 0;
  /// Reweights each sampled t by |phi'(t)| relative to its grid mean.
  bool arclength_weighting = false;
  int arclength_grid = 16;
};

struct CurveTrainResult {
  CurveSpec spec;
  std::vector<double> objective_history;  // sampled J per step
  std::vector<double> t_history;
};

/// Raised when the curve objective turns non-finite; carries the sampled t.
class CurveTrainingError : public NumericError {
 public:
  CurveTrainingError(const std::string& what, double t) : NumericError(what), t_(t) {}
  double t() const { return t_; }

 private:
  double t_;
};

/// Stochastic minimization of E_t[J(phi(t))] over theta12 only, with J the unlearning
/// objective and the objective's batch schedule. The objective's parameter mask, if any,
/// also restricts the midpoint update.
CurveTrainResult train_midpoint(const CurveSpec& spec, const UnlearnObjective& objective,
                                const CurveTrainOptions& options);

}  // namespace mcu
