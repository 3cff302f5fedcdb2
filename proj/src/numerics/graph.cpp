#include "layoutdm/numerics/graph.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>

#include "layoutdm/error.hpp"

namespace layoutdm {

namespace {

std::atomic<std::uint64_t> next_graph_id{1};

void require(bool ok, const std::string& what) {
  if (!ok) throw DataError(DataErrorCode::shape_mismatch, what);
}

Shape with_last(const Shape& shape, std::size_t last) {
  Shape out = shape.empty() ? Shape{1} : shape;
  out.back() = last;
  return out;
}

double gelu_value(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_slope(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

}  // namespace

Graph::Graph() : id_(next_graph_id.fetch_add(1)) {}

std::size_t Graph::check(Var v) const {
  if (v.graph != id_ || v.index >= nodes_.size()) {
    throw DataError(DataErrorCode::invalid_argument, "value is not on the recorded graph");
  }
  return v.index;
}

Var Graph::push(Tensor value, bool requires_grad, std::function<void()> backward) {
  nodes_.push_back(Node{std::move(value), Tensor{}, requires_grad, std::move(backward)});
  return Var{id_, nodes_.size() - 1};
}

Tensor& Graph::grad_of(std::size_t index) {
  Node& n = nodes_[index];
  if (n.grad.size() != n.value.size() || n.grad.shape() != n.value.shape()) {
    n.grad = Tensor::zeros_like(n.value);
  }
  return n.grad;
}

const Tensor& Graph::value(Var v) const { return nodes_[check(v)].value; }

Var Graph::constant(Tensor value) { return push(std::move(value), false); }

Var Graph::parameter(const std::string& name, const Tensor& value) {
  if (auto it = parameters_.find(name); it != parameters_.end()) return Var{id_, it->second};
  Var v = push(value, true);
  parameters_.emplace(name, v.index);
  return v;
}

Var Graph::linear(Var xv, Var wv, Var bv) {
  const std::size_t xi = check(xv), wi = check(wv), bi = check(bv);
  const Tensor& x = nodes_[xi].value;
  const Tensor& w = nodes_[wi].value;
  const Tensor& b = nodes_[bi].value;
  const std::size_t in = x.cols(), rows = x.rows();
  require(w.rank() == 2 && w.dim(0) == in, "linear: weight " + shape_to_string(w.shape()) +
                                               " does not accept input " + shape_to_string(x.shape()));
  const std::size_t out = w.dim(1);
  require(b.size() == out, "linear: bias size mismatch");

  Tensor y(with_last(x.shape(), out));
  for (std::size_t r = 0; r < rows; ++r) std::copy(b.data().begin(), b.data().end(), y.row(r).begin());
  gemm(x.data(), w.data(), y.data(), rows, in, out, true);

  const bool rg = needs(xi) || needs(wi) || needs(bi);
  const std::size_t self = nodes_.size();
  return push(std::move(y), rg, [this, self, xi, wi, bi, rows, in, out] {
    const Tensor& g = nodes_[self].grad;
    if (needs(xi)) gemm_nt(g.data(), nodes_[wi].value.data(), grad_of(xi).data(), rows, out, in, true);
    if (needs(wi)) gemm_tn(nodes_[xi].value.data(), g.data(), grad_of(wi).data(), in, rows, out, true);
    if (needs(bi)) {
      Tensor& gb = grad_of(bi);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < out; ++c) gb[c] += g.at(r, c);
      }
    }
  });
}

Var Graph::embedding(Var tv, std::span<const int> ids) {
  const std::size_t ti = check(tv);
  const Tensor& table = nodes_[ti].value;
  require(table.rank() == 2, "embedding: table must be 2-D");
  const std::size_t classes = table.dim(0), d = table.dim(1);
  Tensor y(Shape{ids.size(), d});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= classes) {
      throw DataError(DataErrorCode::label_out_of_vocabulary,
                      "label id " + std::to_string(ids[r]) + " not in [0, " + std::to_string(classes) + ")",
                      std::to_string(ids[r]));
    }
    auto src = table.row(static_cast<std::size_t>(ids[r]));
    std::copy(src.begin(), src.end(), y.row(r).begin());
  }
  const std::size_t self = nodes_.size();
  std::vector<int> keep(ids.begin(), ids.end());
  return push(std::move(y), needs(ti), [this, self, ti, keep = std::move(keep)] {
    const Tensor& g = nodes_[self].grad;
    Tensor& gt = grad_of(ti);
    for (std::size_t r = 0; r < keep.size(); ++r) {
      auto dst = gt.row(static_cast<std::size_t>(keep[r]));
      auto src = g.row(r);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
    }
  });
}

Var Graph::concat_cols(Var av, Var bv) {
  const std::size_t ai = check(av), bi = check(bv);
  const Tensor& a = nodes_[ai].value;
  const Tensor& b = nodes_[bi].value;
  require(a.rows() == b.rows(), "concat_cols: row counts differ");
  const std::size_t ca = a.cols(), cb = b.cols(), rows = a.rows();
  Tensor y(Shape{rows, ca + cb});
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(a.row(r).begin(), a.row(r).end(), y.row(r).begin());
    std::copy(b.row(r).begin(), b.row(r).end(), y.row(r).begin() + static_cast<std::ptrdiff_t>(ca));
  }
  const std::size_t self = nodes_.size();
  return push(std::move(y), needs(ai) || needs(bi), [this, self, ai, bi, ca, cb, rows] {
    const Tensor& g = nodes_[self].grad;
    for (std::size_t r = 0; r < rows; ++r) {
      if (needs(ai)) {
        auto dst = grad_of(ai).row(r);
        for (std::size_t c = 0; c < ca; ++c) dst[c] += g.at(r, c);
      }
      if (needs(bi)) {
        auto dst = grad_of(bi).row(r);
        for (std::size_t c = 0; c < cb; ++c) dst[c] += g.at(r, ca + c);
      }
    }
  });
}

Var Graph::add(Var av, Var bv) {
  const std::size_t ai = check(av), bi = check(bv);
  require(nodes_[ai].value.shape() == nodes_[bi].value.shape(), "add: shapes differ");
  Tensor y = nodes_[ai].value + nodes_[bi].value;
  const std::size_t self = nodes_.size();
  return push(std::move(y), needs(ai) || needs(bi), [this, self, ai, bi] {
    const Tensor& g = nodes_[self].grad;
    if (needs(ai)) grad_of(ai) += g;
    if (needs(bi)) grad_of(bi) += g;
  });
}

Var Graph::add_constant(Var xv, const Tensor& c) {
  const std::size_t xi = check(xv);
  require(nodes_[xi].value.size() == c.size(), "add_constant: sizes differ");
  Tensor y = nodes_[xi].value;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += c[i];
  const std::size_t self = nodes_.size();
  return push(std::move(y), needs(xi), [this, self, xi] { grad_of(xi) += nodes_[self].grad; });
}

Var Graph::layer_norm(Var xv, Var gv, Var bv, double eps) {
  const std::size_t xi = check(xv), gi = check(gv), bi = check(bv);
  const Tensor& x = nodes_[xi].value;
  const std::size_t rows = x.rows(), d = x.cols();
  require(nodes_[gi].value.size() == d && nodes_[bi].value.size() == d, "layer_norm: scale/shift size");
  auto normalized = std::make_shared<Tensor>(x.shape());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  Tensor y(x.shape());
  const Tensor& gamma = nodes_[gi].value;
  const Tensor& beta = nodes_[bi].value;
  for (std::size_t r = 0; r < rows; ++r) {
    auto in = x.row(r);
    double mean = 0.0;
    for (double v : in) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : in) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    const double s = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = s;
    auto xh = normalized->row(r);
    auto out = y.row(r);
    for (std::size_t c = 0; c < d; ++c) {
      xh[c] = (in[c] - mean) * s;
      out[c] = xh[c] * gamma[c] + beta[c];
    }
  }
  const std::size_t self = nodes_.size();
  const bool rg = needs(xi) || needs(gi) || needs(bi);
  return push(std::move(y), rg, [this, self, xi, gi, bi, rows, d, normalized, inv_std] {
    const Tensor& g = nodes_[self].grad;
    const Tensor& gamma = nodes_[gi].value;
    std::vector<double> dxh(d);
    for (std::size_t r = 0; r < rows; ++r) {
      auto gr = g.row(r);
      auto xh = normalized->row(r);
      if (needs(gi)) {
        Tensor& gg = grad_of(gi);
        for (std::size_t c = 0; c < d; ++c) gg[c] += gr[c] * xh[c];
      }
      if (needs(bi)) {
        Tensor& gb = grad_of(bi);
        for (std::size_t c = 0; c < d; ++c) gb[c] += gr[c];
      }
      if (needs(xi)) {
        double mean_dxh = 0.0, mean_dxh_xh = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
          dxh[c] = gr[c] * gamma[c];
          mean_dxh += dxh[c];
          mean_dxh_xh += dxh[c] * xh[c];
        }
        mean_dxh /= static_cast<double>(d);
        mean_dxh_xh /= static_cast<double>(d);
        auto dx = grad_of(xi).row(r);
        const double s = (*inv_std)[r];
        for (std::size_t c = 0; c < d; ++c) dx[c] += s * (dxh[c] - mean_dxh - xh[c] * mean_dxh_xh);
      }
    }
  });
}

Var Graph::attention(Var qv, Var kv, Var vv, AttentionShape shape, std::span<const std::uint8_t> key_mask) {
  const std::size_t qi = check(qv), ki = check(kv), vi = check(vv);
  const Tensor& q = nodes_[qi].value;
  const Tensor& k = nodes_[ki].value;
  const Tensor& v = nodes_[vi].value;
  const std::size_t B = shape.batch, N = shape.seq, H = shape.heads, d = q.cols();
  require(q.rows() == B * N && k.shape() == q.shape() && v.shape() == q.shape(),
          "attention: q/k/v must all be [batch*seq, d]");
  require(H > 0 && d % H == 0, "attention: d not divisible by heads");
  require(key_mask.size() == B * N, "attention: mask size");
  const std::size_t dh = d / H;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  // probs[b][h][i][j]
  auto probs = std::make_shared<std::vector<double>>(B * H * N * N, 0.0);
  Tensor y(q.shape());
  std::vector<double> logits(N);
  for (std::size_t b = 0; b < B; ++b) {
    bool any_valid = false;
    for (std::size_t j = 0; j < N; ++j) any_valid = any_valid || key_mask[b * N + j];
    if (!any_valid) throw DataError(DataErrorCode::invalid_argument, "attention: group without valid keys");
    for (std::size_t h = 0; h < H; ++h) {
      const std::size_t off = h * dh;
      for (std::size_t i = 0; i < N; ++i) {
        const double* qr = q.ptr(b * N + i, off);
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < N; ++j) {
          if (!key_mask[b * N + j]) {
            logits[j] = -std::numeric_limits<double>::infinity();
            continue;
          }
          const double* kr = k.ptr(b * N + j, off);
          double s = 0.0;
          for (std::size_t c = 0; c < dh; ++c) s += qr[c] * kr[c];
          logits[j] = s * scale;
          mx = std::max(mx, logits[j]);
        }
        double* p = &(*probs)[((b * H + h) * N + i) * N];
        double z = 0.0;
        for (std::size_t j = 0; j < N; ++j) {
          p[j] = key_mask[b * N + j] ? std::exp(logits[j] - mx) : 0.0;
          z += p[j];
        }
        double* out = y.ptr(b * N + i, off);
        for (std::size_t j = 0; j < N; ++j) {
          p[j] /= z;
          if (p[j] == 0.0) continue;
          const double* vr = v.ptr(b * N + j, off);
          for (std::size_t c = 0; c < dh; ++c) out[c] += p[j] * vr[c];
        }
      }
    }
  }

  const std::size_t self = nodes_.size();
  const bool rg = needs(qi) || needs(ki) || needs(vi);
  return push(std::move(y), rg, [this, self, qi, ki, vi, B, N, H, dh, scale, probs] {
    const Tensor& g = nodes_[self].grad;
    const Tensor& q = nodes_[qi].value;
    const Tensor& k = nodes_[ki].value;
    const Tensor& v = nodes_[vi].value;
    Tensor* gq = needs(qi) ? &grad_of(qi) : nullptr;
    Tensor* gk = needs(ki) ? &grad_of(ki) : nullptr;
    Tensor* gv = needs(vi) ? &grad_of(vi) : nullptr;
    std::vector<double> dp(N), ds(N);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t h = 0; h < H; ++h) {
        const std::size_t off = h * dh;
        for (std::size_t i = 0; i < N; ++i) {
          const double* p = &(*probs)[((b * H + h) * N + i) * N];
          const double* go = g.ptr(b * N + i, off);
          double dot = 0.0;
          for (std::size_t j = 0; j < N; ++j) {
            if (p[j] == 0.0) {
              dp[j] = 0.0;
              continue;
            }
            const double* vr = v.ptr(b * N + j, off);
            double s = 0.0;
            for (std::size_t c = 0; c < dh; ++c) s += go[c] * vr[c];
            dp[j] = s;
            dot += s * p[j];
            if (gv) {
              double* dv = gv->ptr(b * N + j, off);
              for (std::size_t c = 0; c < dh; ++c) dv[c] += p[j] * go[c];
            }
          }
          for (std::size_t j = 0; j < N; ++j) ds[j] = p[j] * (dp[j] - dot) * scale;
          const double* qr = q.ptr(b * N + i, off);
          for (std::size_t j = 0; j < N; ++j) {
            if (ds[j] == 0.0) continue;
            const double* kr = k.ptr(b * N + j, off);
            if (gq) {
              double* dq = gq->ptr(b * N + i, off);
              for (std::size_t c = 0; c < dh; ++c) dq[c] += ds[j] * kr[c];
            }
            if (gk) {
              double* dk = gk->ptr(b * N + j, off);
              for (std::size_t c = 0; c < dh; ++c) dk[c] += ds[j] * qr[c];
            }
          }
        }
      }
    }
  });
}

Var Graph::activation(Var xv, Activation kind) {
  const std::size_t xi = check(xv);
  Tensor y = nodes_[xi].value;
  for (double& v : y.data()) v = kind == Activation::gelu ? gelu_value(v) : std::max(0.0, v);
  const std::size_t self = nodes_.size();
  return push(std::move(y), needs(xi), [this, self, xi, kind] {
    const Tensor& g = nodes_[self].grad;
    const Tensor& x = nodes_[xi].value;
    Tensor& gx = grad_of(xi);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double slope = kind == Activation::gelu ? gelu_slope(x[i]) : (x[i] > 0.0 ? 1.0 : 0.0);
      gx[i] += g[i] * slope;
    }
  });
}

Var Graph::mask_rows(Var xv, std::span<const std::uint8_t> mask) {
  const std::size_t xi = check(xv);
  Tensor y = nodes_[xi].value;
  require(mask.size() == y.rows(), "mask_rows: mask size");
  for (std::size_t r = 0; r < y.rows(); ++r) {
    if (!mask[r]) std::fill(y.row(r).begin(), y.row(r).end(), 0.0);
  }
  const std::size_t self = nodes_.size();
  Mask keep(mask.begin(), mask.end());
  return push(std::move(y), needs(xi), [this, self, xi, keep = std::move(keep)] {
    const Tensor& g = nodes_[self].grad;
    Tensor& gx = grad_of(xi);
    for (std::size_t r = 0; r < keep.size(); ++r) {
      if (!keep[r]) continue;
      auto dst = gx.row(r);
      auto src = g.row(r);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
    }
  });
}

Var Graph::masked_mse(Var pv, const Tensor& target, std::span<const std::uint8_t> mask) {
  const std::size_t pi = check(pv);
  const Tensor& p = nodes_[pi].value;
  require(p.size() == target.size() && p.cols() == target.cols(), "masked_mse: prediction/target shapes");
  require(mask.size() == p.rows(), "masked_mse: mask size");
  std::size_t valid = 0;
  for (auto m : mask) valid += m ? 1 : 0;
  if (valid == 0) throw DataError(DataErrorCode::invalid_argument, "masked_mse: no valid rows");
  const double denom = static_cast<double>(valid * p.cols());
  double total = 0.0;
  for (std::size_t r = 0; r < p.rows(); ++r) {
    if (!mask[r]) continue;
    for (std::size_t c = 0; c < p.cols(); ++c) {
      const double e = p.at(r, c) - target.at(r, c);
      total += e * e;
    }
  }
  const std::size_t self = nodes_.size();
  Mask keep(mask.begin(), mask.end());
  return push(Tensor(Shape{1}, total / denom), needs(pi),
              [this, self, pi, target, keep = std::move(keep), denom] {
                const double g = nodes_[self].grad[0];
                const Tensor& p = nodes_[pi].value;
                Tensor& gp = grad_of(pi);
                for (std::size_t r = 0; r < p.rows(); ++r) {
                  if (!keep[r]) continue;
                  for (std::size_t c = 0; c < p.cols(); ++c) {
                    gp.at(r, c) += g * 2.0 * (p.at(r, c) - target.at(r, c)) / denom;
                  }
                }
              });
}

Var Graph::sum(Var xv) {
  const std::size_t xi = check(xv);
  double s = 0.0;
  for (double v : nodes_[xi].value.data()) s += v;
  const std::size_t self = nodes_.size();
  return push(Tensor(Shape{1}, s), needs(xi), [this, self, xi] {
    const double g = nodes_[self].grad[0];
    for (double& v : grad_of(xi).data()) v += g;
  });
}

Var Graph::sum_squares(Var xv) {
  const std::size_t xi = check(xv);
  double s = 0.0;
  for (double v : nodes_[xi].value.data()) s += v * v;
  const std::size_t self = nodes_.size();
  return push(Tensor(Shape{1}, s), needs(xi), [this, self, xi] {
    const double g = nodes_[self].grad[0];
    const Tensor& x = nodes_[xi].value;
    Tensor& gx = grad_of(xi);
    for (std::size_t i = 0; i < x.size(); ++i) gx[i] += 2.0 * g * x[i];
  });
}

void Graph::backward(Var loss) {
  const std::size_t li = check(loss);
  if (nodes_[li].value.size() != 1) {
    throw DataError(DataErrorCode::shape_mismatch,
                    "backward needs a scalar loss, got " + shape_to_string(nodes_[li].value.shape()));
  }
  for (auto& n : nodes_) n.grad = Tensor{};
  grad_of(li)[0] = 1.0;
  for (std::size_t i = li + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.backward || n.grad.size() == 0) continue;
    n.backward();
  }
  has_backward_ = true;
}

Tensor Graph::grad(Var v) const {
  const std::size_t i = check(v);
  if (!has_backward_) throw DataError(DataErrorCode::invalid_argument, "grad requested before backward");
  const Node& n = nodes_[i];
  return n.grad.size() == n.value.size() && n.grad.size() > 0 ? n.grad : Tensor::zeros_like(n.value);
}

Gradients Graph::parameter_grads(const ParameterStore& params) const {
  if (!has_backward_) throw DataError(DataErrorCode::invalid_argument, "grad requested before backward");
  Gradients out;
  for (const auto& [name, value] : params) {
    auto it = parameters_.find(name);
    out.add(name, it == parameters_.end() ? Tensor::zeros_like(value) : grad(Var{id_, it->second}));
  }
  return out;
}

}  // namespace layoutdm
