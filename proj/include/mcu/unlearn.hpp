#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mcu/autodiff.hpp"
#include "mcu/data.hpp"
#include "mcu/losses.hpp"
#include "mcu/mlp.hpp"
#include "mcu/optim.hpp"
#include "mcu/rng.hpp"

namespace mcu {

enum class UnlearnMethod { ga, rl, gd, bt, salun, npo };

UnlearnMethod parse_method(const std::string& name);
std::string to_string(UnlearnMethod m);
inline constexpr UnlearnMethod kAllMethods[] = {UnlearnMethod::ga, UnlearnMethod::rl,
                                                UnlearnMethod::gd, UnlearnMethod::bt,
                                                UnlearnMethod::salun, UnlearnMethod::npo};

struct UnlearnConfig {
  UnlearnMethod method = UnlearnMethod::gd;
  int epochs = 20;
  std::size_t batch_size = 32;
  OptimizerConfig optimizer;
  std::optional<CurriculumDirection> curriculum;
  std::uint64_t seed = 0;

  double salun_fraction = 0.5;
  double bt_weight = 1.0;
  // Flips the forget-side KL term to ascent; the default pulls D_f toward the dumb teacher.
  bool bt_maximize = false;
  double npo_beta = 0.1;
  bool npo_retain_term = true;
  double rl_retain_fraction = 1.0;
  double gd_forget_weight = 1.0;
  // GA/GD stop once the full forget loss exceeds this multiple of
  // max(starting forget loss, log(classes)).
  double divergence_factor = 50.0;

  void validate() const;
};

struct EpochLog {
  double retain_loss = 0.0;
  double forget_loss = 0.0;
};

struct UnlearnResult {
  ParamVector params;
  UnlearnMethod method = UnlearnMethod::gd;
  // One entry per completed epoch; shorter than `epochs` only when `diverged` is set.
  std::vector<EpochLog> training_log;
  std::uint64_t seed = 0;
  bool diverged = false;
  std::size_t steps = 0;
  // NPO: reference probabilities clamped at 1e-12.
  std::size_t ref_prob_clamps = 0;
};

/// Records which sample indices entered a gradient computation.
struct AccessLog {
  std::vector<std::size_t> retain_gradient;
  std::vector<std::size_t> forget_gradient;
};

/// Sample indices feeding one optimizer step.
struct StepBatch {
  std::vector<std::size_t> retain;
  std::vector<std::size_t> forget;
};

/// Top ceil(fraction * n) coordinates by magnitude; ties go to the lower index.
ParamMask top_k_mask(std::span<const float> magnitudes, double fraction);

/// Saliency mask from |grad of L(D_f)| at `params`.
ParamMask salun_mask(const MlpArch& arch, const ParamVector& params, const SplitDataset& ds,
                     double fraction);

/// The per-method unlearning objective J together with its batch schedule.
///
/// Built once from the frozen original model; also drives curve training, where J is
/// evaluated at points on the curve instead of at the model being unlearned.
class UnlearnObjective {
 public:
  UnlearnObjective(MlpArch arch, const ParamVector& original, const SplitDataset& ds,
                   UnlearnConfig cfg, const ParamVector* dumb = nullptr);

  ad::Var operator()(const ad::Var& params, const StepBatch& batch) const;
  Objective bind(const StepBatch& batch) const;

  /// One epoch of steps. Forget-only methods walk D_f in batches; the others pair each
  /// shuffled retain batch with the next forget batch, cycling through D_f.
  std::vector<StepBatch> epoch_batches(Rng& rng) const;

  const ParamMask* mask() const { return mask_ ? &*mask_ : nullptr; }
  bool uses_retain() const;
  const std::vector<int>& train_labels() const { return labels_; }
  const ParamVector& dumb_params() const { return dumb_; }
  std::size_t ref_prob_clamps() const { return ref_clamps_; }
  const UnlearnConfig& config() const { return cfg_; }
  const MlpArch& arch() const { return arch_; }
  const SplitDataset& dataset() const { return ds_; }

 private:
  MlpArch arch_;
  const SplitDataset& ds_;
  UnlearnConfig cfg_;
  std::vector<int> labels_;        // labels used for training (corrupted on D_f for rl/salun)
  Tensor original_logits_;         // frozen original, all samples
  Tensor dumb_logits_;             // frozen dumb model, all samples
  std::vector<float> ref_log_prob_;  // NPO reference, all samples
  std::size_t ref_clamps_ = 0;
  ParamVector dumb_;
  std::optional<ParamMask> mask_;
  std::optional<std::vector<std::size_t>> forget_curriculum_;
};

/// Draws StepBatches from successive epochs of an objective's schedule.
class BatchStream {
 public:
  BatchStream(const UnlearnObjective& objective, std::uint64_t seed)
      : objective_(objective), rng_(seed) {}
  const StepBatch& next();

 private:
  const UnlearnObjective& objective_;
  Rng rng_;
  std::vector<StepBatch> epoch_;
  std::size_t pos_ = 0;
};

UnlearnResult unlearn(const MlpModel& original, const SplitDataset& ds, const UnlearnConfig& cfg,
                      AccessLog* log = nullptr, const ParamVector* dumb = nullptr);

UnlearnResult unlearn_ga(const MlpModel& original, const SplitDataset& ds,
                         const UnlearnConfig& cfg, AccessLog* log = nullptr);
UnlearnResult unlearn_rl(const MlpModel& original, const SplitDataset& ds,
                         const UnlearnConfig& cfg, AccessLog* log = nullptr);
UnlearnResult unlearn_gd(const MlpModel& original, const SplitDataset& ds,
                         const UnlearnConfig& cfg, AccessLog* log = nullptr);
UnlearnResult unlearn_bt(const MlpModel& original, const SplitDataset& ds,
                         const UnlearnConfig& cfg, AccessLog* log = nullptr,
                         const ParamVector* dumb = nullptr);
UnlearnResult unlearn_salun(const MlpModel& original, const SplitDataset& ds,
                            const UnlearnConfig& cfg, AccessLog* log = nullptr);
UnlearnResult unlearn_npo(const MlpModel& original, const SplitDataset& ds,
                          const UnlearnConfig& cfg, AccessLog* log = nullptr);

/// Seed used for the internally constructed dumb model when none is supplied.
std::uint64_t dumb_model_seed(std::uint64_t seed);

struct TrainSchedule {
  int epochs = 300;
  std::size_t batch_size = 32;
  OptimizerConfig optimizer{OptimizerKind::adam, 0.01};
};

struct TrainOutcome {
  ParamVector params;
  std::vector<double> loss_curve;      // mean train loss per epoch
  std::vector<double> accuracy_curve;  // train accuracy after each epoch
};

/// Plain supervised training from a fresh seeded init on `idx` only.
TrainOutcome train_supervised(const MlpArch& arch, const SplitDataset& ds,
                              const std::vector<std::size_t>& idx, const TrainSchedule& schedule,
                              std::uint64_t seed, AccessLog* log = nullptr);

/// Trains from scratch on D_r with the base schedule.
ParamVector retrain_oracle(const MlpArch& arch, const SplitDataset& ds,
                           const TrainSchedule& schedule, std::uint64_t seed,
                           AccessLog* log = nullptr);

/// Mean cross-entropy of `params` on the given indices (original labels).
double subset_loss(const MlpArch& arch, const ParamVector& params, const SplitDataset& ds,
                   std::span<const std::size_t> idx);
double subset_accuracy(const MlpArch& arch, const ParamVector& params, const SplitDataset& ds,
                       std::span<const std::size_t> idx);

}  // namespace mcu
