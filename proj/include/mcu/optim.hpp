#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mcu/losses.hpp"
#include "mcu/param_vector.hpp"

namespace mcu {

enum class OptimizerKind { sgd, adam, so_diag };

OptimizerKind parse_optimizer_kind(const std::string& name);
std::string to_string(OptimizerKind k);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::sgd;
  double lr = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Clipped diagonal-Newton settings.
  double curvature_ema = 0.99;
  double gamma = 0.01;
  double damping = 1e-12;
  int curvature_interval = 10;
  int hessian_probes = 1;

  void validate() const;
};

/// Per-coordinate update mask (1 = update, 0 = frozen), used by saliency unlearning.
using ParamMask = std::vector<std::uint8_t>;

/// Moment buffers are aligned with the parameter layout, one entry per coordinate.
struct OptimizerState {
  OptimizerConfig config;
  std::int64_t step_count = 0;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::vector<double> curvature;
  std::int64_t curvature_updates = 0;
  std::shared_ptr<const ParamLayout> layout;

  OptimizerState(OptimizerConfig cfg, const ParamVector& params);
};

/// params <- params - lr * grads.
void sgd_step(ParamVector& params, const ParamVector& grads, double lr,
              const ParamMask* mask = nullptr);

/// Bias-corrected Adam.
void adam_step(OptimizerState& state, ParamVector& params, const ParamVector& grads,
               const ParamMask* mask = nullptr);

/// params <- params - lr * clip(m_hat / max(gamma * h_hat, damping), -1, 1), where m_hat is the
/// bias-corrected gradient EMA and h_hat the bias-corrected EMA of the non-negative curvature
/// estimates supplied so far. Passing `hessian_diag` folds a new estimate into the EMA.
void so_diag_step(OptimizerState& state, ParamVector& params, const ParamVector& grads,
                  const ParamVector* hessian_diag, const ParamMask* mask = nullptr);

/// Dispatches on state.config.kind. `hessian_diag` is ignored for first-order kinds.
void optimizer_step(OptimizerState& state, ParamVector& params, const ParamVector& grads,
                    const ParamVector* hessian_diag = nullptr, const ParamMask* mask = nullptr);

/// True when the second-order optimizer wants a fresh curvature estimate at this step.
bool wants_curvature(const OptimizerState& state);

/// Hutchinson diagonal: mean over probes of z ⊙ (H z) with Rademacher z, where H z is the
/// gradient of <grad, z>. Clamped to >= 0.
ParamVector estimate_hessian_diag(const Objective& objective, const ParamVector& at, int probes,
                                  std::uint64_t seed);

enum class CurriculumDirection { ascending, descending };

CurriculumDirection parse_curriculum(const std::string& name);
std::string to_string(CurriculumDirection d);

/// Stable ordering of sample positions by loss; ties keep the original order.
std::vector<std::size_t> curriculum_order(std::span<const double> per_sample_losses,
                                          CurriculumDirection direction);

}  // namespace mcu
