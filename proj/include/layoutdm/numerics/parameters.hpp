#pragma once

#include <map>
#include <string>

#include "layoutdm/numerics/tensor.hpp"

namespace layoutdm {

// Named tensors iterated in lexicographic name order. Shapes are fixed once
// a name is added; `set` rejects shape changes.
class ParameterStore {
 public:
  using Map = std::map<std::string, Tensor>;

  void add(const std::string& name, Tensor value);
  void set(const std::string& name, Tensor value);

  bool contains(const std::string& name) const { return tensors_.contains(name); }
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);

  std::size_t size() const noexcept { return tensors_.size(); }
  std::size_t total_elements() const;
  bool empty() const noexcept { return tensors_.empty(); }

  Map::const_iterator begin() const { return tensors_.begin(); }
  Map::const_iterator end() const { return tensors_.end(); }
  Map::iterator begin() { return tensors_.begin(); }
  Map::iterator end() { return tensors_.end(); }

  ParameterStore zeros_like() const;
  bool same_layout(const ParameterStore& other) const;

  friend bool operator==(const ParameterStore&, const ParameterStore&) = default;

 private:
  Map tensors_;
};

using Gradients = ParameterStore;

}  // namespace layoutdm
