#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "layoutdm/numerics/parameters.hpp"
#include "layoutdm/numerics/tensor.hpp"

namespace layoutdm {

// Handle to a value recorded on a Graph.
struct Var {
  std::uint64_t graph = 0;
  std::size_t index = 0;
};

// Layout of the rows fed to Graph::attention: `batch` groups of `seq` rows.
struct AttentionShape {
  std::size_t batch = 0;
  std::size_t seq = 0;
  std::size_t heads = 1;
};

enum class Activation { gelu, relu };

// Reverse-mode tape restricted to the operations the layout denoiser needs.
// Each op computes its value eagerly and records a hand-written adjoint.
// All ops take 2-D operands: rows by last-dimension columns.
class Graph {
 public:
  Graph();
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  // Leaf that receives gradients. Registering a name twice returns the same Var.
  Var parameter(const std::string& name, const Tensor& value);
  Var parameter(const ParameterStore& params, const std::string& name) {
    return parameter(name, params.get(name));
  }

  const Tensor& value(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }

  // x[rows,in] * w[in,out] + b[out]
  Var linear(Var x, Var w, Var b);
  Var embedding(Var table, std::span<const int> ids);
  Var concat_cols(Var a, Var b);
  Var add(Var a, Var b);
  Var add_constant(Var x, const Tensor& c);
  Var layer_norm(Var x, Var gamma, Var beta, double eps);
  // Scaled dot-product multi-head attention. Keys whose mask entry is zero get
  // -inf logits. Every group must contain at least one valid key.
  Var attention(Var q, Var k, Var v, AttentionShape shape, std::span<const std::uint8_t> key_mask);
  Var activation(Var x, Activation kind);
  Var gelu(Var x) { return activation(x, Activation::gelu); }
  Var relu(Var x) { return activation(x, Activation::relu); }
  Var mask_rows(Var x, std::span<const std::uint8_t> mask);
  // Mean of squared differences over rows with nonzero mask and all columns.
  Var masked_mse(Var pred, const Tensor& target, std::span<const std::uint8_t> mask);
  Var sum(Var x);
  Var sum_squares(Var x);

  // Seeds d(loss)/d(loss) = 1 and propagates to every recorded node.
  void backward(Var loss);
  // Gradient of the last backward() loss w.r.t. `v`; zeros if `v` does not
  // influence the loss.
  Tensor grad(Var v) const;
  // Gradient for every entry of `params`; zero tensors for names that were
  // never registered on this graph.
  Gradients parameter_grads(const ParameterStore& params) const;

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::function<void()> backward;
  };

  std::size_t check(Var v) const;
  Var push(Tensor value, bool requires_grad, std::function<void()> backward = {});
  Tensor& grad_of(std::size_t index);
  bool needs(std::size_t index) const { return nodes_[index].requires_grad; }

  std::uint64_t id_;
  std::vector<Node> nodes_;
  std::map<std::string, std::size_t> parameters_;
  bool has_backward_ = false;
};

}  // namespace layoutdm
