#include "layoutdm/numerics/parameters.hpp"

#include "layoutdm/error.hpp"

namespace layoutdm {

void ParameterStore::add(const std::string& name, Tensor value) {
  if (!tensors_.emplace(name, std::move(value)).second) {
    throw DataError(DataErrorCode::invalid_argument, "duplicate parameter name", name);
  }
}

void ParameterStore::set(const std::string& name, Tensor value) {
  Tensor& slot = get(name);
  if (slot.shape() != value.shape()) {
    throw DataError(DataErrorCode::shape_mismatch,
                    "parameter " + name + " has shape " + shape_to_string(slot.shape()) +
                        ", got " + shape_to_string(value.shape()),
                    name);
  }
  slot = std::move(value);
}

const Tensor& ParameterStore::get(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw DataError(DataErrorCode::missing_field, "no parameter named " + name, name);
  return it->second;
}

Tensor& ParameterStore::get(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw DataError(DataErrorCode::missing_field, "no parameter named " + name, name);
  return it->second;
}

std::size_t ParameterStore::total_elements() const {
  std::size_t n = 0;
  for (const auto& [_, t] : tensors_) n += t.size();
  return n;
}

ParameterStore ParameterStore::zeros_like() const {
  ParameterStore out;
  for (const auto& [name, t] : tensors_) out.add(name, Tensor::zeros_like(t));
  return out;
}

bool ParameterStore::same_layout(const ParameterStore& other) const {
  if (tensors_.size() != other.tensors_.size()) return false;
  auto a = tensors_.begin();
  auto b = other.tensors_.begin();
  for (; a != tensors_.end(); ++a, ++b) {
    if (a->first != b->first || a->second.shape() != b->second.shape()) return false;
  }
  return true;
}

}  // namespace layoutdm
