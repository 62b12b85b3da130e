#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mcu/autodiff.hpp"
#include "mcu/param_vector.hpp"
#include "mcu/tensor.hpp"

namespace mcu {

enum class Activation { relu, tanh };

Activation parse_activation(const std::string& name);
std::string to_string(Activation a);

/// Layer sizes (input, hidden..., classes) and the hidden activation.
struct MlpArch {
  std::vector<std::size_t> layer_dims;
  Activation activation = Activation::relu;

  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t num_classes() const { return layer_dims.back(); }
  std::size_t num_layers() const { return layer_dims.size() - 1; }

  /// Sum over layers of (in + 1) * out.
  std::size_t param_count() const;
  /// Slots W0, b0, W1, b1, ...; Wi has shape [in, out], bi has shape [out].
  std::shared_ptr<const ParamLayout> layout() const;
  /// Throws ConfigError unless there are at least two dims, all >= 1.
  void validate() const;
  bool operator==(const MlpArch&) const = default;
};

struct MlpModel {
  MlpArch arch;
  ParamVector params;
};

/// Glorot-uniform weights, zero biases, seeded.
MlpModel init_mlp(const MlpArch& arch, std::uint64_t seed);

/// Recovers the architecture from a layout written by MlpArch::layout().
MlpArch arch_from_layout(const ParamLayout& layout, Activation activation);

ParamVector flatten(const MlpModel& model);
void unflatten(MlpModel& model, const ParamVector& v);

/// Pre-softmax logits for x[batch, in_dim]. Plain evaluation, no graph.
Tensor forward_logits(const MlpModel& model, const Tensor& x);
Tensor forward_logits(const MlpArch& arch, const ParamVector& params, const Tensor& x);

/// The same forward pass recorded on a tape, reading weights out of `flat_params`.
ad::Var forward_logits(const MlpArch& arch, const ad::Var& flat_params, const Tensor& x);

}  // namespace mcu
