#pragma once

#include <functional>
#include <span>
#include <vector>

#include "mcu/autodiff.hpp"
#include "mcu/param_vector.hpp"
#include "mcu/tensor.hpp"

namespace mcu {

// Plain evaluation, 64-bit accumulation.

/// Mean negative log-softmax of the true class.
double softmax_xent(const Tensor& logits, std::span<const int> labels);
std::vector<double> per_sample_xent(const Tensor& logits, std::span<const int> labels);
/// Softmax probability of the true class per row.
std::vector<double> true_class_prob(const Tensor& logits, std::span<const int> labels);
/// Row-wise KL(softmax(p) || softmax(q)), averaged over rows.
double kl_divergence(const Tensor& logits_p, const Tensor& logits_q);
/// Row-wise log-softmax in double precision.
std::vector<double> log_softmax_row(std::span<const float> logits);

// Graph versions; gradients flow through the first argument only.

ad::Var softmax_xent(const ad::Var& logits, std::span<const int> labels);
ad::Var kl_divergence(const ad::Var& logits_p, const Tensor& logits_q);
/// (2 / beta) * mean log(1 + (p / p_ref)^beta) with p the true-class probability.
ad::Var npo_loss(const ad::Var& logits, std::span<const int> labels,
                 std::span<const float> ref_log_prob, float beta);

/// A scalar function of a flat parameter vector, recorded on the vector's tape.
using Objective = std::function<ad::Var(const ad::Var& params)>;

/// Reads the gradient of `loss` w.r.t. the flat parameter leaf into a ParamVector.
ParamVector backward(const ad::Var& loss, const ad::Var& params,
                     std::shared_ptr<const ParamLayout> layout);

struct ValueAndGrad {
  double value = 0.0;
  ParamVector grad;
};

/// Evaluates an objective and its gradient on a fresh tape.
ValueAndGrad value_and_grad(const Objective& objective, const ParamVector& at);

}  // namespace mcu
