#include "mcu/unlearn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mcu/error.hpp"

namespace mcu {

UnlearnMethod parse_method(const std::string& name) {
  if (name == "ga") return UnlearnMethod::ga;
  if (name == "rl") return UnlearnMethod::rl;
  if (name == "gd") return UnlearnMethod::gd;
  if (name == "bt") return UnlearnMethod::bt;
  if (name == "salun" || name == "su") return UnlearnMethod::salun;
  if (name == "npo") return UnlearnMethod::npo;
  throw ConfigError("unknown unlearning method '" + name +
                    "' (expected ga, rl, gd, bt, salun or npo)");
}

std::string to_string(UnlearnMethod m) {
  switch (m) {
    case UnlearnMethod::ga: return "ga";
    case UnlearnMethod::rl: return "rl";
    case UnlearnMethod::gd: return "gd";
    case UnlearnMethod::bt: return "bt";
    case UnlearnMethod::salun: return "salun";
    case UnlearnMethod::npo: return "npo";
  }
  return "?";
}

void UnlearnConfig::validate() const {
  if (epochs < 1) throw ConfigError("unlearning epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("unlearning batch_size must be >= 1");
  if (!(salun_fraction > 0.0 && salun_fraction <= 1.0)) {
    throw ConfigError("salun_fraction must lie in (0, 1]");
  }
  if (!(npo_beta > 0.0)) throw ConfigError("npo_beta must be > 0");
  if (!(bt_weight >= 0.0)) throw ConfigError("bt_weight must be >= 0");
  if (!(rl_retain_fraction > 0.0 && rl_retain_fraction <= 1.0)) {
    throw ConfigError("rl_retain_fraction must lie in (0, 1]");
  }
  if (!(divergence_factor > 0.0)) throw ConfigError("divergence_factor must be > 0");
  optimizer.validate();
}

std::uint64_t dumb_model_seed(std::uint64_t seed) { return derive_seed(seed, 0xD0D0); }

double subset_loss(const MlpArch& arch, const ParamVector& params, const SplitDataset& ds,
                   std::span<const std::size_t> idx) {
  if (idx.empty()) return 0.0;
  Tensor logits = forward_logits(arch, params, ds.gather_features(idx));
  return softmax_xent(logits, ds.gather_labels(idx));
}

double subset_accuracy(const MlpArch& arch, const ParamVector& params, const SplitDataset& ds,
                       std::span<const std::size_t> idx) {
  if (idx.empty()) return 0.0;
  Tensor logits = forward_logits(arch, params, ds.gather_features(idx));
  const std::size_t c = logits.shape[1];
  std::size_t correct = 0;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const float* row = logits.data.data() + i * c;
    const auto pred = static_cast<int>(std::max_element(row, row + c) - row);
    if (pred == ds.data.labels[idx[i]]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(idx.size());
}

ParamMask top_k_mask(std::span<const float> magnitudes, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("mask fraction must lie in (0, 1]");
  const std::size_t n = magnitudes.size();
  const auto k = std::min<std::size_t>(
      n, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-12)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(magnitudes[a]) > std::abs(magnitudes[b]);
  });
  ParamMask mask(n, 0);
  for (std::size_t i = 0; i < k; ++i) mask[order[i]] = 1;
  return mask;
}

ParamMask salun_mask(const MlpArch& arch, const ParamVector& params, const SplitDataset& ds,
                     double fraction) {
  const Tensor x = ds.gather_features(ds.forget_idx);
  const std::vector<int> y = ds.gather_labels(ds.forget_idx);
  auto vg = value_and_grad(
      [&](const ad::Var& p) { return softmax_xent(forward_logits(arch, p, x), y); }, params);
  return top_k_mask(vg.grad.values, fraction);
}

UnlearnObjective::UnlearnObjective(MlpArch arch, const ParamVector& original,
                                   const SplitDataset& ds, UnlearnConfig cfg,
                                   const ParamVector* dumb)
    : arch_(std::move(arch)), ds_(ds), cfg_(std::move(cfg)), labels_(ds.data.labels) {
  cfg_.validate();
  if (ds_.forget_idx.empty()) throw ConfigError("unlearning needs a non-empty forget set");
  if (uses_retain() && ds_.retain_idx.empty()) {
    throw ConfigError("unlearning method needs a non-empty retain set");
  }
  const auto method = cfg_.method;

  if (method == UnlearnMethod::rl || method == UnlearnMethod::salun) {
    labels_ = corrupt_labels(ds_.data.labels, ds_.data.num_classes, ds_.forget_idx,
                             derive_seed(cfg_.seed, 2));
  }
  if (method == UnlearnMethod::bt) {
    dumb_ = dumb ? *dumb : init_mlp(arch_, dumb_model_seed(cfg_.seed)).params;
    original_logits_ = forward_logits(arch_, original, ds_.data.features);
    dumb_logits_ = forward_logits(arch_, dumb_, ds_.data.features);
  }
  if (method == UnlearnMethod::npo) {
    const Tensor logits = forward_logits(arch_, original, ds_.data.features);
    auto probs = true_class_prob(logits, ds_.data.labels);
    ref_log_prob_.resize(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
      double p = probs[i];
      if (p < 1e-12) {
        p = 1e-12;
        if (std::binary_search(ds_.forget_idx.begin(), ds_.forget_idx.end(), i)) ++ref_clamps_;
      }
      ref_log_prob_[i] = static_cast<float>(std::log(p));
    }
  }
  if (method == UnlearnMethod::salun) {
    mask_ = salun_mask(arch_, original, ds_, cfg_.salun_fraction);
  }
  if (cfg_.curriculum) {
    const Tensor logits = forward_logits(arch_, original, ds_.gather_features(ds_.forget_idx));
    auto losses = per_sample_xent(logits, ds_.gather_labels(ds_.forget_idx));
    auto order = curriculum_order(losses, *cfg_.curriculum);
    std::vector<std::size_t> idx(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) idx[i] = ds_.forget_idx[order[i]];
    forget_curriculum_ = std::move(idx);
  }
}

bool UnlearnObjective::uses_retain() const {
  switch (cfg_.method) {
    case UnlearnMethod::ga: return false;
    case UnlearnMethod::npo: return cfg_.npo_retain_term;
    default: return true;
  }
}

namespace {

Tensor gather_rows(const Tensor& all, std::span<const std::size_t> idx) {
  const std::size_t c = all.shape[1];
  Tensor out(Shape{idx.size(), c});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    std::copy_n(all.data.begin() + static_cast<std::ptrdiff_t>(idx[r] * c), c,
                out.data.begin() + static_cast<std::ptrdiff_t>(r * c));
  }
  return out;
}

}  // namespace

ad::Var UnlearnObjective::operator()(const ad::Var& params, const StepBatch& batch) const {
  ad::Tape& tape = params.tape();
  auto logits_on = [&](const std::vector<std::size_t>& idx) {
    return forward_logits(arch_, params, ds_.gather_features(idx));
  };
  auto xent_on = [&](const std::vector<std::size_t>& idx) {
    return softmax_xent(logits_on(idx), SplitDataset::gather(labels_, idx));
  };

  switch (cfg_.method) {
    case UnlearnMethod::ga:
      return ad::neg(xent_on(batch.forget));
    case UnlearnMethod::rl:
    case UnlearnMethod::salun: {
      std::vector<std::size_t> both = batch.retain;
      both.insert(both.end(), batch.forget.begin(), batch.forget.end());
      return xent_on(both);
    }
    case UnlearnMethod::gd: {
      ad::Var forget = ad::scale(xent_on(batch.forget), static_cast<float>(cfg_.gd_forget_weight));
      return ad::sub(xent_on(batch.retain), forget);
    }
    case UnlearnMethod::bt: {
      ad::Var keep = kl_divergence(logits_on(batch.retain), gather_rows(original_logits_, batch.retain));
      ad::Var away = ad::scale(kl_divergence(logits_on(batch.forget), gather_rows(dumb_logits_, batch.forget)),
                               static_cast<float>(cfg_.bt_weight));
      return cfg_.bt_maximize ? ad::sub(keep, away) : ad::add(keep, away);
    }
    case UnlearnMethod::npo: {
      std::vector<float> ref(batch.forget.size());
      for (std::size_t i = 0; i < ref.size(); ++i) ref[i] = ref_log_prob_[batch.forget[i]];
      ad::Var loss = npo_loss(logits_on(batch.forget), SplitDataset::gather(labels_, batch.forget),
                              ref, static_cast<float>(cfg_.npo_beta));
      if (cfg_.npo_retain_term) loss = ad::add(loss, xent_on(batch.retain));
      return loss;
    }
  }
  (void)tape;
  throw ConfigError("unhandled unlearning method");
}

Objective UnlearnObjective::bind(const StepBatch& batch) const {
  return [this, batch](const ad::Var& params) { return (*this)(params, batch); };
}

std::vector<StepBatch> UnlearnObjective::epoch_batches(Rng& rng) const {
  std::vector<std::size_t> forget;
  if (forget_curriculum_) {
    forget = *forget_curriculum_;
  } else {
    forget = ds_.forget_idx;
    rng.shuffle(forget);
  }
  const std::size_t bs = cfg_.batch_size;
  std::vector<StepBatch> out;

  if (!uses_retain()) {
    for (std::size_t i = 0; i < forget.size(); i += bs) {
      StepBatch b;
      b.forget.assign(forget.begin() + static_cast<std::ptrdiff_t>(i),
                      forget.begin() + static_cast<std::ptrdiff_t>(std::min(forget.size(), i + bs)));
      out.push_back(std::move(b));
    }
    return out;
  }

  std::vector<std::size_t> retain = ds_.retain_idx;
  rng.shuffle(retain);
  if ((cfg_.method == UnlearnMethod::rl || cfg_.method == UnlearnMethod::salun) &&
      cfg_.rl_retain_fraction < 1.0) {
    auto keep = static_cast<std::size_t>(
        std::llround(cfg_.rl_retain_fraction * static_cast<double>(retain.size())));
    retain.resize(std::max<std::size_t>(1, keep));
  }
  const std::size_t fb = std::min(bs, forget.size());
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < retain.size(); i += bs) {
    StepBatch b;
    b.retain.assign(retain.begin() + static_cast<std::ptrdiff_t>(i),
                    retain.begin() + static_cast<std::ptrdiff_t>(std::min(retain.size(), i + bs)));
    for (std::size_t j = 0; j < fb; ++j) {
      b.forget.push_back(forget[cursor]);
      cursor = (cursor + 1) % forget.size();
    }
    out.push_back(std::move(b));
  }
  return out;
}

const StepBatch& BatchStream::next() {
  if (pos_ >= epoch_.size()) {
    epoch_ = objective_.epoch_batches(rng_);
    pos_ = 0;
    if (epoch_.empty()) throw ConfigError("empty batch schedule");
  }
  return epoch_[pos_++];
}

UnlearnResult unlearn(const MlpModel& original, const SplitDataset& ds, const UnlearnConfig& cfg,
                      AccessLog* log, const ParamVector* dumb) {
  UnlearnObjective objective(original.arch, original.params, ds, cfg, dumb);
  const MlpArch& arch = original.arch;

  UnlearnResult result;
  result.method = cfg.method;
  result.seed = cfg.seed;
  result.params = original.params;
  result.ref_prob_clamps = objective.ref_prob_clamps();

  OptimizerState opt(cfg.optimizer, result.params);
  Rng rng(derive_seed(cfg.seed, 1));
  const bool guarded = cfg.method == UnlearnMethod::ga || cfg.method == UnlearnMethod::gd;
  const double chance = std::log(static_cast<double>(ds.data.num_classes));
  const double ceiling =
      cfg.divergence_factor * std::max(subset_loss(arch, original.params, ds, ds.forget_idx), chance);

  for (int epoch = 0; epoch < cfg.epochs && !result.diverged; ++epoch) {
    for (const auto& batch : objective.epoch_batches(rng)) {
      if (log) {
        log->retain_gradient.insert(log->retain_gradient.end(), batch.retain.begin(), batch.retain.end());
        log->forget_gradient.insert(log->forget_gradient.end(), batch.forget.begin(), batch.forget.end());
      }
      const Objective fn = objective.bind(batch);
      std::optional<ParamVector> curvature;
      if (wants_curvature(opt)) {
        curvature = estimate_hessian_diag(fn, result.params, cfg.optimizer.hessian_probes,
                                          derive_seed(cfg.seed, 1000 + result.steps));
      }
      ValueAndGrad vg = value_and_grad(fn, result.params);
      if (!std::isfinite(vg.value)) {
        throw NumericError(to_string(cfg.method) + ": non-finite objective at step " +
                           std::to_string(result.steps));
      }
      optimizer_step(opt, result.params, vg.grad, curvature ? &*curvature : nullptr,
                     objective.mask());
      ++result.steps;
      if (guarded && subset_loss(arch, result.params, ds, ds.forget_idx) > ceiling) {
        result.diverged = true;
        break;
      }
    }
    result.training_log.push_back({subset_loss(arch, result.params, ds, ds.retain_idx),
                                   subset_loss(arch, result.params, ds, ds.forget_idx)});
  }
  return result;
}

namespace {

void require_method(const UnlearnConfig& cfg, UnlearnMethod expected) {
  if (cfg.method != expected) {
    throw ConfigError("config method '" + to_string(cfg.method) + "' passed to unlearn_" +
                      to_string(expected));
  }
}

}  // namespace

UnlearnResult unlearn_ga(const MlpModel& original, const SplitDataset& ds,
                         const UnlearnConfig& cfg, AccessLog* log) {
  require_method(cfg, UnlearnMethod::ga);
  return unlearn(original, ds, cfg, log);
}

UnlearnResult unlearn_rl(const MlpModel& original, const SplitDataset& ds,
                         const UnlearnConfig& cfg, AccessLog* log) {
  require_method(cfg, UnlearnMethod::rl);
  return unlearn(original, ds, cfg, log);
}

UnlearnResult unlearn_gd(const MlpModel& original, const SplitDataset& ds,
                         const UnlearnConfig& cfg, AccessLog* log) {
  require_method(cfg, UnlearnMethod::gd);
  return unlearn(original, ds, cfg, log);
}

UnlearnResult unlearn_bt(const MlpModel& original, const SplitDataset& ds,
                         const UnlearnConfig& cfg, AccessLog* log, const ParamVector* dumb) {
  require_method(cfg, UnlearnMethod::bt);
  return unlearn(original, ds, cfg, log, dumb);
}

UnlearnResult unlearn_salun(const MlpModel& original, const SplitDataset& ds,
                            const UnlearnConfig& cfg, AccessLog* log) {
  require_method(cfg, UnlearnMethod::salun);
  return unlearn(original, ds, cfg, log);
}

UnlearnResult unlearn_npo(const MlpModel& original, const SplitDataset& ds,
                          const UnlearnConfig& cfg, AccessLog* log) {
  require_method(cfg, UnlearnMethod::npo);
  return unlearn(original, ds, cfg, log);
}

TrainOutcome train_supervised(const MlpArch& arch, const SplitDataset& ds,
                              const std::vector<std::size_t>& idx, const TrainSchedule& schedule,
                              std::uint64_t seed, AccessLog* log) {
  if (schedule.epochs < 0) throw ConfigError("training epochs must be >= 0");
  if (schedule.batch_size < 1) throw ConfigError("training batch_size must be >= 1");
  if (idx.empty()) throw ConfigError("training needs a non-empty index set");
  TrainOutcome out;
  out.params = init_mlp(arch, seed).params;
  OptimizerState opt(schedule.optimizer, out.params);
  Rng rng(derive_seed(seed, 7));
  std::vector<char> is_forget(ds.data.size(), 0);
  for (auto i : ds.forget_idx) is_forget[i] = 1;

  for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
    std::vector<std::size_t> order = idx;
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t i = 0; i < order.size(); i += schedule.batch_size) {
      std::vector<std::size_t> b(order.begin() + static_cast<std::ptrdiff_t>(i),
                                 order.begin() + static_cast<std::ptrdiff_t>(
                                                     std::min(order.size(), i + schedule.batch_size)));
      if (log) {
        for (auto s : b) (is_forget[s] ? log->forget_gradient : log->retain_gradient).push_back(s);
      }
      const Tensor x = ds.gather_features(b);
      const std::vector<int> y = ds.gather_labels(b);
      const Objective fn = [&](const ad::Var& p) { return softmax_xent(forward_logits(arch, p, x), y); };
      std::optional<ParamVector> curvature;
      if (wants_curvature(opt)) {
        curvature = estimate_hessian_diag(fn, out.params, schedule.optimizer.hessian_probes,
                                          derive_seed(seed, 5000 + opt.step_count));
      }
      ValueAndGrad vg = value_and_grad(fn, out.params);
      if (!std::isfinite(vg.value)) throw NumericError("non-finite training loss");
      optimizer_step(opt, out.params, vg.grad, curvature ? &*curvature : nullptr);
      loss_sum += vg.value;
      ++batches;
    }
    out.loss_curve.push_back(loss_sum / static_cast<double>(batches));
    out.accuracy_curve.push_back(subset_accuracy(arch, out.params, ds, idx));
  }
  return out;
}

ParamVector retrain_oracle(const MlpArch& arch, const SplitDataset& ds,
                           const TrainSchedule& schedule, std::uint64_t seed, AccessLog* log) {
  return train_supervised(arch, ds, ds.retain_idx, schedule, seed, log).params;
}

}  // namespace mcu
