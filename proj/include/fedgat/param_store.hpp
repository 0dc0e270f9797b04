#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fedgat/tensor.hpp"

namespace fedgat {

// Ordered map from parameter name to Tensor. Iteration order is insertion
// order, which fixes the layout of flatten()/unflatten().
class ParamStore {
 public:
  ParamStore() = default;

  void add(std::string name, Tensor t);
  void replace(std::string_view name, Tensor t);  // shape must match
  bool contains(std::string_view name) const;
  const Tensor& at(std::string_view name) const;

  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  const std::vector<std::pair<std::string, Tensor>>& items() const {
    return items_;
  }

  // Total number of scalar values across all parameters.
  std::size_t value_count() const;

  // Concatenation of all parameter values in insertion order.
  std::vector<double> flatten() const;
  // Rebuilds parameter values from a flat vector with this store's schema.
  void unflatten(std::span<const double> flat);

  // Same names, order, and shapes.
  static bool same_schema(const ParamStore& a, const ParamStore& b);

  // Copy of this store whose tensors are registered as parameter leaves of
  // `tape`, ready for gradient extraction after backward().
  ParamStore bound_to(GradTape& tape) const;

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace fedgat
