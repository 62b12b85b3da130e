#include "mcu/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mcu/error.hpp"
#include "mcu/rng.hpp"

namespace mcu {

OptimizerKind parse_optimizer_kind(const std::string& name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  if (name == "so_diag" || name == "so") return OptimizerKind::so_diag;
  throw ConfigError("unknown optimizer '" + name + "' (expected sgd, adam or so_diag)");
}

std::string to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::adam: return "adam";
    case OptimizerKind::so_diag: return "so_diag";
  }
  return "?";
}

void OptimizerConfig::validate() const {
  if (!(lr >= 0.0)) throw ConfigError("learning rate must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("optimizer betas must lie in [0, 1)");
  }
  if (kind == OptimizerKind::so_diag) {
    if (!(damping > 0.0)) throw ConfigError("so_diag damping epsilon must be > 0");
    if (!(gamma > 0.0)) throw ConfigError("so_diag gamma must be > 0");
    if (!(curvature_ema >= 0.0 && curvature_ema < 1.0)) {
      throw ConfigError("so_diag curvature EMA must lie in [0, 1)");
    }
    if (curvature_interval < 1 || hessian_probes < 1) {
      throw ConfigError("so_diag curvature interval and probes must be >= 1");
    }
  }
}

OptimizerState::OptimizerState(OptimizerConfig cfg, const ParamVector& params)
    : config(cfg), layout(params.layout) {
  config.validate();
  if (config.kind != OptimizerKind::sgd) {
    first_moment.assign(params.size(), 0.0);
    second_moment.assign(config.kind == OptimizerKind::adam ? params.size() : 0, 0.0);
    curvature.assign(config.kind == OptimizerKind::so_diag ? params.size() : 0, 0.0);
  }
}

namespace {

void check_grads(const ParamVector& params, const ParamVector& grads) {
  require_same_length(params, grads, "optimizer step");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads.values[i])) {
      const std::string name = params.layout ? params.layout->slot_name(i) : "theta";
      throw NumericError("non-finite gradient in parameter '" + name + "' (coordinate " +
                         std::to_string(i) + "); step aborted");
    }
  }
}

void check_mask(const ParamVector& params, const ParamMask* mask) {
  if (mask && mask->size() != params.size()) {
    throw DimensionError("update mask length " + std::to_string(mask->size()) +
                         " does not match " + std::to_string(params.size()) + " parameters");
  }
}

inline void apply(ParamVector& params, std::size_t i, double displacement, const ParamMask* mask) {
  if (mask && !(*mask)[i]) return;
  params.values[i] = static_cast<float>(static_cast<double>(params.values[i]) - displacement);
}

}  // namespace

void sgd_step(ParamVector& params, const ParamVector& grads, double lr, const ParamMask* mask) {
  check_grads(params, grads);
  check_mask(params, mask);
  for (std::size_t i = 0; i < params.size(); ++i) {
    apply(params, i, lr * static_cast<double>(grads.values[i]), mask);
  }
}

void adam_step(OptimizerState& state, ParamVector& params, const ParamVector& grads,
               const ParamMask* mask) {
  if (state.config.kind != OptimizerKind::adam) throw ConfigError("adam_step on a non-adam state");
  check_grads(params, grads);
  check_mask(params, mask);
  const auto& c = state.config;
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads.values[i];
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g * g;
    const double mhat = m / bc1;
    const double vhat = v / bc2;
    apply(params, i, c.lr * mhat / (std::sqrt(vhat) + c.eps), mask);
  }
}

void so_diag_step(OptimizerState& state, ParamVector& params, const ParamVector& grads,
                  const ParamVector* hessian_diag, const ParamMask* mask) {
  if (state.config.kind != OptimizerKind::so_diag) {
    throw ConfigError("so_diag_step on a non-second-order state");
  }
  const auto& c = state.config;
  if (!(c.damping > 0.0)) throw ConfigError("so_diag damping epsilon must be > 0");
  check_grads(params, grads);
  check_mask(params, mask);
  if (hessian_diag) {
    require_same_length(params, *hessian_diag, "so_diag curvature");
    ++state.curvature_updates;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double h = std::max(0.0, static_cast<double>(hessian_diag->values[i]));
      state.curvature[i] = c.curvature_ema * state.curvature[i] + (1.0 - c.curvature_ema) * h;
    }
  }
  ++state.step_count;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step_count));
  const double bch = state.curvature_updates > 0
                         ? 1.0 - std::pow(c.curvature_ema, static_cast<double>(state.curvature_updates))
                         : 1.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.first_moment[i];
    m = c.beta1 * m + (1.0 - c.beta1) * static_cast<double>(grads.values[i]);
    const double mhat = m / bc1;
    const double hhat = state.curvature[i] / bch;
    const double ratio = mhat / std::max(c.gamma * hhat, c.damping);
    apply(params, i, c.lr * std::clamp(ratio, -1.0, 1.0), mask);
  }
}

void optimizer_step(OptimizerState& state, ParamVector& params, const ParamVector& grads,
                    const ParamVector* hessian_diag, const ParamMask* mask) {
  switch (state.config.kind) {
    case OptimizerKind::sgd:
      sgd_step(params, grads, state.config.lr, mask);
      ++state.step_count;
      break;
    case OptimizerKind::adam:
      adam_step(state, params, grads, mask);
      break;
    case OptimizerKind::so_diag:
      so_diag_step(state, params, grads, hessian_diag, mask);
      break;
  }
}

bool wants_curvature(const OptimizerState& state) {
  return state.config.kind == OptimizerKind::so_diag &&
         state.step_count % state.config.curvature_interval == 0;
}

ParamVector estimate_hessian_diag(const Objective& objective, const ParamVector& at, int probes,
                                  std::uint64_t seed) {
  if (probes < 1) throw ConfigError("estimate_hessian_diag needs probes >= 1");
  const std::size_t n = at.size();
  std::vector<double> acc(n, 0.0);
  Rng rng(seed);
  for (int p = 0; p < probes; ++p) {
    Tensor z(Shape{n});
    for (auto& v : z.data) v = rng.rademacher();
    ad::Tape tape;
    ad::Var theta = tape.parameter(Tensor(Shape{n}, at.values));
    ad::Var loss = objective(theta);
    ad::Var g = tape.grad(loss, std::span<const ad::Var>(&theta, 1), /*create_graph=*/true)[0];
    ad::Var gz = ad::dot(g, tape.constant(z));
    ad::Var hz = tape.grad(gz, std::span<const ad::Var>(&theta, 1))[0];
    const auto& hv = hz.value().data;
    for (std::size_t i = 0; i < n; ++i) acc[i] += static_cast<double>(z.data[i]) * hv[i];
  }
  ParamVector out{std::vector<float>(n), at.layout};
  for (std::size_t i = 0; i < n; ++i) {
    out.values[i] = static_cast<float>(std::max(0.0, acc[i] / probes));
  }
  return out;
}

CurriculumDirection parse_curriculum(const std::string& name) {
  if (name == "ascending") return CurriculumDirection::ascending;
  if (name == "descending") return CurriculumDirection::descending;
  throw ConfigError("unknown curriculum direction '" + name + "'");
}

std::string to_string(CurriculumDirection d) {
  return d == CurriculumDirection::ascending ? "ascending" : "descending";
}

std::vector<std::size_t> curriculum_order(std::span<const double> per_sample_losses,
                                          CurriculumDirection direction) {
  for (std::size_t i = 0; i < per_sample_losses.size(); ++i) {
    if (std::isnan(per_sample_losses[i])) {
      throw NumericError("curriculum_order: NaN loss at position " + std::to_string(i));
    }
  }
  std::vector<std::size_t> order(per_sample_losses.size());
  std::iota(order.begin(), order.end(), 0);
  if (direction == CurriculumDirection::ascending) {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return per_sample_losses[a] < per_sample_losses[b];
    });
  } else {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return per_sample_losses[a] > per_sample_losses[b];
    });
  }
  return order;
}

}  // namespace mcu
