#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "mcu/tensor.hpp"

namespace mcu {

struct ParamSlot {
  std::string name;
  Shape shape;
  std::size_t offset = 0;

  std::size_t size() const { return shape_numel(shape); }
  bool operator==(const ParamSlot&) const = default;
};

/// Ordered, contiguous slots covering a flat parameter vector.
struct ParamLayout {
  std::vector<ParamSlot> slots;

  std::size_t total() const { return slots.empty() ? 0 : slots.back().offset + slots.back().size(); }
  /// Name of the slot holding flat coordinate `index`.
  const std::string& slot_name(std::size_t index) const;
  /// Offsets start at 0 and each slot begins where the previous ends.
  bool contiguous() const;
  bool operator==(const ParamLayout&) const = default;

  static std::shared_ptr<const ParamLayout> single(std::string name, std::size_t n);
};

/// A point in parameter space: flat float values plus the layout that names them.
struct ParamVector {
  std::vector<float> values;
  std::shared_ptr<const ParamLayout> layout;

  std::size_t size() const { return values.size(); }
  bool same_layout(const ParamVector& other) const;
};

/// Checks that two vectors can be combined; throws DimensionError otherwise.
void require_same_length(const ParamVector& a, const ParamVector& b, const char* what);

/// Wraps raw values with a one-slot layout called `name`.
ParamVector make_flat(std::vector<float> values, std::string name = "theta");

}  // namespace mcu
