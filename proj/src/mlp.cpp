#include "mcu/mlp.hpp"

#include <cmath>

#include "mcu/error.hpp"
#include "mcu/kernels.hpp"
#include "mcu/rng.hpp"

namespace mcu {

const std::string& ParamLayout::slot_name(std::size_t index) const {
  for (const auto& s : slots) {
    if (index >= s.offset && index < s.offset + s.size()) return s.name;
  }
  static const std::string unknown = "<out of range>";
  return unknown;
}

bool ParamLayout::contiguous() const {
  std::size_t next = 0;
  for (const auto& s : slots) {
    if (s.offset != next) return false;
    next += s.size();
  }
  return true;
}

std::shared_ptr<const ParamLayout> ParamLayout::single(std::string name, std::size_t n) {
  auto layout = std::make_shared<ParamLayout>();
  layout->slots.push_back(ParamSlot{std::move(name), Shape{n}, 0});
  return layout;
}

bool ParamVector::same_layout(const ParamVector& other) const {
  if (layout == other.layout) return true;
  if (!layout || !other.layout) return false;
  return *layout == *other.layout;
}

void require_same_length(const ParamVector& a, const ParamVector& b, const char* what) {
  if (a.size() != b.size()) {
    throw DimensionError(std::string(what) + ": parameter vectors of length " +
                         std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
}

ParamVector make_flat(std::vector<float> values, std::string name) {
  const auto n = values.size();
  return ParamVector{std::move(values), ParamLayout::single(std::move(name), n)};
}

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + name + "' (expected relu or tanh)");
}

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

void MlpArch::validate() const {
  if (layer_dims.size() < 2) throw ConfigError("MLP needs at least input and output dims");
  for (auto d : layer_dims) {
    if (d < 1) throw ConfigError("MLP layer dims must be >= 1");
  }
}

std::size_t MlpArch::param_count() const {
  std::size_t total = 0;
  for (std::size_t i = 0; i + 1 < layer_dims.size(); ++i) {
    total += (layer_dims[i] + 1) * layer_dims[i + 1];
  }
  return total;
}

std::shared_ptr<const ParamLayout> MlpArch::layout() const {
  validate();
  auto layout = std::make_shared<ParamLayout>();
  std::size_t offset = 0;
  for (std::size_t i = 0; i + 1 < layer_dims.size(); ++i) {
    const auto in = layer_dims[i], out = layer_dims[i + 1];
    layout->slots.push_back(ParamSlot{"W" + std::to_string(i), Shape{in, out}, offset});
    offset += in * out;
    layout->slots.push_back(ParamSlot{"b" + std::to_string(i), Shape{out}, offset});
    offset += out;
  }
  return layout;
}

MlpArch arch_from_layout(const ParamLayout& layout, Activation activation) {
  MlpArch arch;
  arch.activation = activation;
  if (layout.slots.empty() || layout.slots.size() % 2 != 0) {
    throw FormatError("layout is not an MLP layout (expected W/b slot pairs)");
  }
  for (std::size_t i = 0; i < layout.slots.size(); i += 2) {
    const auto& w = layout.slots[i];
    if (w.shape.size() != 2 || w.name != "W" + std::to_string(i / 2)) {
      throw FormatError("unexpected slot '" + w.name + "' in MLP layout");
    }
    if (i == 0) arch.layer_dims.push_back(w.shape[0]);
    arch.layer_dims.push_back(w.shape[1]);
  }
  if (!(*arch.layout() == layout)) throw FormatError("layout does not match an MLP layout");
  return arch;
}

MlpModel init_mlp(const MlpArch& arch, std::uint64_t seed) {
  MlpModel model{arch, ParamVector{std::vector<float>(arch.param_count(), 0.0f), arch.layout()}};
  Rng rng(seed);
  for (const auto& slot : model.params.layout->slots) {
    if (slot.shape.size() != 2) continue;  // biases stay zero
    const double fan_in = static_cast<double>(slot.shape[0]);
    const double fan_out = static_cast<double>(slot.shape[1]);
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (std::size_t i = 0; i < slot.size(); ++i) {
      model.params.values[slot.offset + i] = static_cast<float>((2.0 * rng.uniform() - 1.0) * bound);
    }
  }
  return model;
}

ParamVector flatten(const MlpModel& model) { return model.params; }

void unflatten(MlpModel& model, const ParamVector& v) {
  if (v.size() != model.arch.param_count()) {
    throw DimensionError("unflatten: vector of length " + std::to_string(v.size()) +
                         " for a model with " + std::to_string(model.arch.param_count()) +
                         " parameters");
  }
  model.params.values = v.values;
  if (!model.params.layout) model.params.layout = model.arch.layout();
}

namespace {

void check_input(const MlpArch& arch, const Tensor& x) {
  if (x.rank() != 2 || x.shape[1] != arch.input_dim()) {
    throw DimensionError("forward_logits: input " + shape_string(x.shape) +
                         " does not match layer_dims[0] = " + std::to_string(arch.input_dim()) +
                         " (expected [batch, " + std::to_string(arch.input_dim()) + "])");
  }
}

}  // namespace

Tensor forward_logits(const MlpArch& arch, const ParamVector& params, const Tensor& x) {
  check_input(arch, x);
  if (params.size() != arch.param_count()) {
    throw DimensionError("forward_logits: " + std::to_string(params.size()) +
                         " parameters for an architecture with " +
                         std::to_string(arch.param_count()));
  }
  const std::size_t batch = x.shape[0];
  Tensor h = x;
  std::size_t offset = 0;
  for (std::size_t l = 0; l < arch.num_layers(); ++l) {
    const auto in = arch.layer_dims[l], out = arch.layer_dims[l + 1];
    std::span<const float> w(params.values.data() + offset, in * out);
    offset += in * out;
    std::span<const float> b(params.values.data() + offset, out);
    offset += out;
    Tensor next(Shape{batch, out});
    kernels::matmul(h.data, w, next.data, batch, in, out);
    const bool last = l + 1 == arch.num_layers();
    for (std::size_t i = 0; i < batch; ++i) {
      for (std::size_t j = 0; j < out; ++j) {
        float v = next.data[i * out + j] + b[j];
        if (!last) v = arch.activation == Activation::relu ? (v > 0.0f ? v : 0.0f) : std::tanh(v);
        next.data[i * out + j] = v;
      }
    }
    h = std::move(next);
  }
  return h;
}

Tensor forward_logits(const MlpModel& model, const Tensor& x) {
  return forward_logits(model.arch, model.params, x);
}

ad::Var forward_logits(const MlpArch& arch, const ad::Var& flat_params, const Tensor& x) {
  check_input(arch, x);
  if (flat_params.value().numel() != arch.param_count()) {
    throw DimensionError("forward_logits: parameter var of length " +
                         std::to_string(flat_params.value().numel()) +
                         " for an architecture with " + std::to_string(arch.param_count()));
  }
  ad::Tape& tape = flat_params.tape();
  ad::Var h = tape.constant(x);
  std::size_t offset = 0;
  for (std::size_t l = 0; l < arch.num_layers(); ++l) {
    const auto in = arch.layer_dims[l], out = arch.layer_dims[l + 1];
    ad::Var w = ad::slice(flat_params, offset, Shape{in, out});
    offset += in * out;
    ad::Var b = ad::slice(flat_params, offset, Shape{out});
    offset += out;
    h = ad::add_row(ad::matmul(h, w), b);
    if (l + 1 < arch.num_layers()) {
      h = arch.activation == Activation::relu ? ad::relu(h) : ad::tanh(h);
    }
  }
  return h;
}

}  // namespace mcu
