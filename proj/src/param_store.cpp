#include "fedgat/param_store.hpp"

#include <stdexcept>

namespace fedgat {

void ParamStore::add(std::string name, Tensor t) {
  if (index_.count(name)) {
    throw std::invalid_argument("parameter '" + name + "' already present");
  }
  index_.emplace(name, items_.size());
  items_.emplace_back(std::move(name), std::move(t));
}

void ParamStore::replace(std::string_view name, Tensor t) {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) {
    throw std::invalid_argument("parameter '" + std::string(name) +
                                "' not found");
  }
  Tensor& slot = items_[it->second].second;
  if (!slot.same_shape(t)) {
    throw std::invalid_argument("parameter '" + std::string(name) +
                                "' shape changed from " + slot.shape_str() +
                                " to " + t.shape_str());
  }
  slot = std::move(t);
}

bool ParamStore::contains(std::string_view name) const {
  return index_.count(std::string(name)) > 0;
}

const Tensor& ParamStore::at(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) {
    throw std::invalid_argument("parameter '" + std::string(name) +
                                "' not found");
  }
  return items_[it->second].second;
}

std::size_t ParamStore::value_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : items_) n += t.size();
  return n;
}

std::vector<double> ParamStore::flatten() const {
  std::vector<double> flat;
  flat.reserve(value_count());
  for (const auto& [name, t] : items_) {
    const auto& v = t.values();
    flat.insert(flat.end(), v.begin(), v.end());
  }
  return flat;
}

void ParamStore::unflatten(std::span<const double> flat) {
  if (flat.size() != value_count()) {
    throw std::invalid_argument(
        "unflatten: expected " + std::to_string(value_count()) +
        " values, got " + std::to_string(flat.size()));
  }
  std::size_t offset = 0;
  for (auto& [name, t] : items_) {
    std::vector<double> vals(flat.begin() + offset,
                             flat.begin() + offset + t.size());
    offset += t.size();
    t = Tensor(t.shape(), std::move(vals));
  }
}

bool ParamStore::same_schema(const ParamStore& a, const ParamStore& b) {
  if (a.items_.size() != b.items_.size()) return false;
  for (std::size_t i = 0; i < a.items_.size(); ++i) {
    if (a.items_[i].first != b.items_[i].first) return false;
    if (a.items_[i].second.shape() != b.items_[i].second.shape()) return false;
  }
  return true;
}

ParamStore ParamStore::bound_to(GradTape& tape) const {
  ParamStore bound;
  for (const auto& [name, t] : items_) {
    bound.add(name, tape.parameter(t));
  }
  return bound;
}

}  // namespace fedgat
