#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "layoutdm/error.hpp"
#include "layoutdm/numerics/adam.hpp"
#include "layoutdm/numerics/checkpoint.hpp"
#include "layoutdm/numerics/gradcheck.hpp"
#include "layoutdm/numerics/graph.hpp"
#include "layoutdm/numerics/rng.hpp"
#include "layoutdm/numerics/tensor.hpp"

using namespace layoutdm;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, double scale = 1.0) {
  RngStream s{seed, 0};
  Tensor t = seeded_gaussian(shape, s);
  t *= scale;
  return t;
}

// Naive triple loop used as the GEMM oracle.
std::vector<double> naive_matmul(const std::vector<double>& a, const std::vector<double>& b, std::size_t m,
                                 std::size_t k, std::size_t n) {
  std::vector<double> c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) c[i * n + j] += a[i * k + p] * b[p * n + j];
  return c;
}

// Scalar probe: sum((x W + b)^2) + sum(x W + b) with fixed W, b, so every
// entry of x influences the objective in a non-degenerate way.
Var probe(Graph& g, Var x) {
  const std::size_t cols = g.value(x).cols();
  Var w = g.constant(random_tensor({cols, 3}, 991));
  Var b = g.constant(random_tensor({3}, 992));
  Var y = g.linear(x, w, b);
  return g.add(g.sum_squares(y), g.sum(y));
}

using GraphObjective = std::function<Var(Graph&, const ParameterStore&)>;

GradientComparison check_op(const GraphObjective& build, const ParameterStore& params, double h = 1e-5) {
  Graph g;
  Var loss = build(g, params);
  g.backward(loss);
  const Gradients analytic = g.parameter_grads(params);
  const Gradients numeric = finite_difference_grad(
      [&](const ParameterStore& p) {
        Graph gg;
        return gg.value(build(gg, p))[0];
      },
      params, h);
  return compare_gradients(analytic, numeric);
}

}  // namespace

TEST_CASE("philox4x32-10 known-answer vectors") {
  using A4 = std::array<std::uint32_t, 4>;
  CHECK(philox4x32_10({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(philox4x32_10({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
        A4{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(philox4x32_10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
        A4{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("rng streams are reproducible and counter addressed") {
  RngStream a{42, 0}, b{42, 0};
  for (int i = 0; i < 100; ++i) REQUIRE(a.uniform() == b.uniform());
  RngStream c{42, 10};
  RngStream d{42, 0};
  for (int i = 0; i < 10; ++i) d.next_block();
  CHECK(c.next_block() == d.next_block());
  RngStream e{43, 0};
  RngStream f{42, 0};
  CHECK(e.next_block() != f.next_block());
}

TEST_CASE("rng uniform range and gaussian moments") {
  RngStream s{7, 0};
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double u = s.uniform();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo > 0.0);
  CHECK(hi <= 1.0);

  const std::size_t n = 100000;
  const Tensor z = seeded_gaussian({n}, s);
  double mean = 0.0, m2 = 0.0;
  for (double v : z.values()) mean += v;
  mean /= n;
  for (double v : z.values()) m2 += (v - mean) * (v - mean);
  const double var = m2 / (n - 1);
  // 5 sigma bands for n = 1e5
  CHECK(std::abs(mean) < 5.0 / std::sqrt(double(n)));
  CHECK(std::abs(var - 1.0) < 5.0 * std::sqrt(2.0 / n));
}

TEST_CASE("uniform_index covers the range without bias beyond sampling noise") {
  RngStream s{11, 0};
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 70000; ++i) hits[s.uniform_index(7)]++;
  for (int h : hits) CHECK(std::abs(h - 10000) < 500);
  CHECK_THROWS_AS(s.uniform_index(0), DataError);
}

TEST_CASE("seeded_gaussian advances by half the element count") {
  RngStream s{5, 0};
  (void)seeded_gaussian({7}, s);
  CHECK(s.counter == 4);
}

TEST_CASE("gemm variants agree with a naive product") {
  const std::size_t m = 5, k = 7, n = 3;
  const Tensor a = random_tensor({m, k}, 1), b = random_tensor({k, n}, 2);
  const auto ref = naive_matmul(a.values(), b.values(), m, k, n);

  std::vector<double> c(m * n, 0.0);
  gemm(a.data(), b.data(), c, m, k, n, false);
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(ref[i]).epsilon(1e-12));

  // a stored transposed [k, m]
  Tensor at({k, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) at.at(p, i) = a.at(i, p);
  std::vector<double> c2(m * n, 1.0);
  gemm_tn(at.data(), b.data(), c2, m, k, n, true);
  for (std::size_t i = 0; i < c2.size(); ++i) CHECK(c2[i] == doctest::Approx(ref[i] + 1.0).epsilon(1e-12));

  // b stored transposed [n, k]
  Tensor bt({n, k});
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t j = 0; j < n; ++j) bt.at(j, p) = b.at(p, j);
  std::vector<double> c3(m * n, 0.0);
  gemm_nt(a.data(), bt.data(), c3, m, k, n, false);
  for (std::size_t i = 0; i < c3.size(); ++i) CHECK(c3[i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("tensor basics") {
  Tensor t({2, 3}, 1.5);
  CHECK(t.size() == 6);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  t.at(1, 2) = std::nan("");
  CHECK_FALSE(t.all_finite());
  CHECK_THROWS_AS(t.require_finite("t"), NumericError);
  CHECK_THROWS_AS(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), DataError);
}

TEST_CASE("parameter store rejects duplicate names and shape changes") {
  ParameterStore p;
  p.add("w", Tensor({2, 2}));
  CHECK_THROWS_AS(p.add("w", Tensor({2, 2})), DataError);
  CHECK_THROWS_AS(p.set("w", Tensor({3})), DataError);
  CHECK_THROWS_AS(p.get("missing"), DataError);
  p.set("w", Tensor({2, 2}, 1.0));
  CHECK(p.get("w")[3] == 1.0);
  CHECK(p.total_elements() == 4);
}

TEST_CASE("graph op gradients match central differences") {
  ParameterStore p;
  p.add("x", random_tensor({4, 5}, 10));
  p.add("y", random_tensor({4, 5}, 11));
  p.add("w", random_tensor({5, 6}, 12, 0.5));
  p.add("b", random_tensor({6}, 13));
  p.add("gamma", random_tensor({5}, 14));
  p.add("beta", random_tensor({5}, 15));
  p.add("table", random_tensor({3, 5}, 16));
  const double tol = 1e-6;

  SUBCASE("linear") {
    auto r = check_op([](Graph& g, const ParameterStore& q) {
      return probe(g, g.linear(g.parameter(q, "x"), g.parameter(q, "w"), g.parameter(q, "b")));
    }, p);
    CHECK(r.max_rel_error < tol);
  }
  SUBCASE("add, concat, add_constant") {
    auto r = check_op([](Graph& g, const ParameterStore& q) {
      Var x = g.parameter(q, "x"), y = g.parameter(q, "y");
      Var s = g.add_constant(g.add(x, y), random_tensor({4, 5}, 77));
      return probe(g, g.concat_cols(s, y));
    }, p);
    CHECK(r.max_rel_error < tol);
  }
  SUBCASE("add requires equal shapes") {
    Graph g;
    CHECK_THROWS(g.add(g.parameter(p, "x"), g.parameter(p, "gamma")));
  }
  SUBCASE("layer norm") {
    auto r = check_op([](Graph& g, const ParameterStore& q) {
      return probe(g, g.layer_norm(g.parameter(q, "x"), g.parameter(q, "gamma"), g.parameter(q, "beta"), 1e-8));
    }, p);
    CHECK(r.max_rel_error < tol);
  }
  SUBCASE("gelu and relu") {
    auto r = check_op([](Graph& g, const ParameterStore& q) { return probe(g, g.gelu(g.parameter(q, "x"))); }, p);
    CHECK(r.max_rel_error < tol);
    auto r2 = check_op([](Graph& g, const ParameterStore& q) { return probe(g, g.relu(g.parameter(q, "x"))); }, p);
    CHECK(r2.max_rel_error < tol);
  }
  SUBCASE("embedding") {
    const std::vector<int> ids{2, 0, 2, 1};
    auto r = check_op([&](Graph& g, const ParameterStore& q) {
      return probe(g, g.embedding(g.parameter(q, "table"), ids));
    }, p);
    CHECK(r.max_rel_error < tol);
  }
  SUBCASE("masked attention, two heads") {
    // x: 4 rows = 2 groups of 2, 5 columns is not divisible by 2 heads, so use w to project to 6.
    const Mask mask{1, 1, 1, 0};
    auto r = check_op([&](Graph& g, const ParameterStore& q) {
      Var h = g.linear(g.parameter(q, "x"), g.parameter(q, "w"), g.parameter(q, "b"));
      Var k = g.linear(g.parameter(q, "y"), g.parameter(q, "w"), g.parameter(q, "b"));
      return probe(g, g.attention(h, k, h, AttentionShape{2, 2, 2}, mask));
    }, p);
    CHECK(r.max_rel_error < tol);
  }
  SUBCASE("mask_rows and masked_mse") {
    const Mask mask{1, 0, 1, 1};
    const Tensor target = random_tensor({4, 6}, 55);
    auto r = check_op([&](Graph& g, const ParameterStore& q) {
      Var h = g.linear(g.parameter(q, "x"), g.parameter(q, "w"), g.parameter(q, "b"));
      return g.add(g.masked_mse(h, target, mask), probe(g, g.mask_rows(h, mask)));
    }, p);
    CHECK(r.max_rel_error < tol);
  }
}

TEST_CASE("attention with a single valid key returns that key's value") {
  Graph g;
  const Tensor q = random_tensor({3, 4}, 1), k = random_tensor({3, 4}, 2), v = random_tensor({3, 4}, 3);
  const Mask mask{0, 1, 0};
  Var out = g.attention(g.constant(q), g.constant(k), g.constant(v), AttentionShape{1, 3, 2}, mask);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 4; ++c) CHECK(g.value(out).at(r, c) == doctest::Approx(v.at(1, c)).epsilon(1e-12));
}

TEST_CASE("attention rejects a group without valid keys") {
  Graph g;
  const Tensor x = random_tensor({2, 2}, 1);
  const Mask mask{0, 0};
  CHECK_THROWS(g.attention(g.constant(x), g.constant(x), g.constant(x), AttentionShape{1, 2, 1}, mask));
}

TEST_CASE("layer norm output has zero mean and unit variance per row") {
  Graph g;
  const Tensor x = random_tensor({6, 16}, 3, 4.0);
  Var y = g.layer_norm(g.constant(x), g.constant(Tensor({16}, 1.0)), g.constant(Tensor({16}, 0.0)), 1e-8);
  for (std::size_t r = 0; r < 6; ++r) {
    double mean = 0.0, var = 0.0;
    for (double v : g.value(y).row(r)) mean += v;
    mean /= 16;
    for (double v : g.value(y).row(r)) var += (v - mean) * (v - mean);
    var /= 16;
    CHECK(std::abs(mean) < 1e-6);
    CHECK(std::abs(var - 1.0) < 1e-6);
  }
}

TEST_CASE("gelu uses the exact erf form") {
  Graph g;
  Var y = g.gelu(g.constant(Tensor({1, 3}, std::vector<double>{-1.0, 0.0, 2.0})));
  const auto exact = [](double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); };
  CHECK(g.value(y)[0] == doctest::Approx(exact(-1.0)).epsilon(1e-15));
  CHECK(g.value(y)[1] == 0.0);
  CHECK(g.value(y)[2] == doctest::Approx(exact(2.0)).epsilon(1e-15));
}

TEST_CASE("graph misuse is reported") {
  Graph g, other;
  Var x = g.constant(Tensor({2, 2}, 1.0));
  CHECK_THROWS(other.value(x));
  CHECK_THROWS(g.grad(x));                  // no backward yet
  CHECK_THROWS(g.backward(x));              // not a scalar
  CHECK_THROWS_AS(g.embedding(g.constant(Tensor({2, 2})), std::vector<int>{3}), DataError);
}

TEST_CASE("finite differences reject bad step sizes") {
  ParameterStore p;
  p.add("a", Tensor({1}, 1.0));
  CHECK_THROWS(finite_difference_grad([](const ParameterStore&) { return 0.0; }, p, 0.0));
  const auto g = finite_difference_grad([](const ParameterStore& q) { return 3.0 * q.get("a")[0] * q.get("a")[0]; }, p, 1e-4);
  CHECK(g.get("a")[0] == doctest::Approx(6.0).epsilon(1e-9));
}

TEST_CASE("adam minimizes x^2 along the reference trajectory") {
  // Trajectory from an independent reference implementation of bias-corrected
  // Adam (lr 0.1, default betas, eps 1e-8) started at x = 1.
  const double expected[] = {0.9000000005,        0.8004122286917928, 0.7015862729460303, 0.603939060573746,
                             0.507963659264342,   0.4142364559936619, 0.3234207049391021, 0.23626372452104188,
                             0.1535845600703636,  0.07624915560691221};
  ParameterStore p;
  p.add("x", Tensor({1}, 1.0));
  AdamState state{AdamHyperparameters{0.1, 0.9, 0.999, 1e-8}, 0, {}, {}};
  double prev = 1.0;
  for (int i = 0; i < 10; ++i) {
    Gradients g = p.zeros_like();
    g.get("x")[0] = 2.0 * p.get("x")[0];
    adam_step(p, g, state);
    const double x = p.get("x")[0];
    CHECK(x < prev);
    CHECK(x == doctest::Approx(expected[i]).epsilon(1e-12));
    prev = x;
  }
  CHECK(state.step == 10);
  }

TEST_CASE("adam rejects mismatched gradients") {
  ParameterStore p;
  p.add("x", Tensor({2}));
  ParameterStore g;
  g.add("y", Tensor({2}));
  AdamState s;
  CHECK_THROWS_AS(adam_step(p, g, s), DataError);
}

TEST_CASE("checkpoint round trip is exact") {
  Checkpoint c;
  c.config = {{"a", 1}, {"b", "two"}};
  c.rng["train"] = RngStream{123, 456};
  c.step = 77;
  c.params.add("layer.w", random_tensor({3, 4}, 9));
  c.params.add("layer.b", random_tensor({4}, 10));
  AdamState a;
  a.hyper.lr = 0.003;
  a.step = 5;
  a.first_moment = c.params.zeros_like();
  a.second_moment = c.params.zeros_like();
  a.first_moment.get("layer.b")[2] = -1e-300;
  c.adam = a;

  const std::string bytes = encode_checkpoint(c);
  CHECK(decode_checkpoint(bytes) == c);
  CHECK(encode_checkpoint(decode_checkpoint(bytes)) == bytes);

  const auto path = std::filesystem::temp_directory_path() / "layoutdm_numerics_test.ckpt";
  save_checkpoint(path, c);
  CHECK(load_checkpoint(path) == c);
  std::filesystem::remove(path);

  Checkpoint bare;
  bare.params.add("w", Tensor({1}, 2.0));
  CHECK(decode_checkpoint(encode_checkpoint(bare)) == bare);
}

TEST_CASE("checkpoint decoding rejects damaged files") {
  Checkpoint c;
  c.params.add("w", Tensor({2}, 1.0));
  const std::string bytes = encode_checkpoint(c);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), DataError);
  CHECK_THROWS_AS(decode_checkpoint("not a checkpoint"), DataError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/file.ckpt"), DataError);
}

TEST_CASE("seeded gaussian from seed 0 has pinned moments") {
  RngStream s{0, 0};
  const Tensor z = seeded_gaussian({100000}, s);
  double mean = 0.0;
  for (double v : z.values()) mean += v;
  mean /= z.size();
  double var = 0.0;
  for (double v : z.values()) var += (v - mean) * (v - mean);
  var /= z.size() - 1;
  CHECK(mean > -0.02);
  CHECK(mean < 0.02);
  CHECK(var > 0.98);
  CHECK(var < 1.02);

  RngStream again{0, 0}, shifted{0, 1};
  CHECK(seeded_gaussian({8}, again) == Tensor(Shape{8}, std::vector<double>(z.values().begin(), z.values().begin() + 8)));
  CHECK_FALSE(seeded_gaussian({8}, shifted) == Tensor(Shape{8}, std::vector<double>(z.values().begin(), z.values().begin() + 8)));
}

TEST_CASE("backward on elementary losses") {
  ParameterStore p;
  p.add("p", random_tensor({3, 2}, 21));
  p.add("unused", random_tensor({2}, 22));
  Graph g;
  Var v = g.parameter(p, "p");
  g.parameter(p, "unused");
  g.backward(g.sum(v));
  const Tensor ones = g.grad(v);
  for (double x : ones.values()) CHECK(x == 1.0);

  Graph h;
  Var w = h.parameter(p, "p");
  h.backward(h.sum_squares(w));
  const Gradients grads = h.parameter_grads(p);
  for (std::size_t i = 0; i < 6; ++i) CHECK(grads.get("p")[i] == doctest::Approx(2.0 * p.get("p")[i]).epsilon(1e-15));
  for (double x : grads.get("unused").values()) CHECK(x == 0.0);
}

TEST_CASE("finite differences on analytic functions") {
  ParameterStore p;
  p.add("x", Tensor({1}, 3.0));
  const auto sq = finite_difference_grad([](const ParameterStore& q) { return q.get("x")[0] * q.get("x")[0]; }, p, 1e-5);
  CHECK(std::abs(sq.get("x")[0] - 6.0) < 1e-8);
  const auto flat = finite_difference_grad([](const ParameterStore&) { return 4.2; }, p, 1e-5);
  CHECK(std::abs(flat.get("x")[0]) < 1e-10);
  CHECK_THROWS_AS(finite_difference_grad([](const ParameterStore&) { return std::nan(""); }, p, 1e-5), NumericError);
}

TEST_CASE("adam first steps") {
  ParameterStore p;
  p.add("w", Tensor({3}, std::vector<double>{0.5, -1.0, 2.0}));
  const ParameterStore start = p;

  AdamState fresh;
  adam_step(p, p.zeros_like(), fresh);
  CHECK(p == start);
  CHECK(fresh.step == 1);

  AdamState s{AdamHyperparameters{0.01, 0.9, 0.999, 1e-8}, 0, {}, {}};
  ParameterStore q = start;
  Gradients g = q.zeros_like();
  g.get("w") = Tensor({3}, std::vector<double>{0.3, -2.0, 1e-3});
  adam_step(q, g, s);
  for (std::size_t i = 0; i < 3; ++i) {
    const double gi = g.get("w")[i];
    const double delta = q.get("w")[i] - start.get("w")[i];
    CHECK(std::abs(delta + 0.01 * gi / (std::abs(gi) + 1e-8)) < 0.01 * 1e-6);
    CHECK(std::abs(delta + 0.01 * (gi > 0 ? 1.0 : -1.0)) < 0.01 * 1e-4);
  }
}
