#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "cosep/tensorcore/kernels.hpp"
#include "cosep/tensorcore/ops.hpp"
#include "gradcheck.hpp"

using namespace cosep;

TEST_CASE("every op passes the finite-difference check") {
  std::mt19937_64 rng(11);
  auto cases = testing::make_op_cases(rng);
  std::map<std::string, int> per_op;
  for (auto& c : cases) {
    CAPTURE(c.op);
    CAPTURE(c.shape);
    auto r = testing::gradcheck(c.inputs, c.build, rng);
    CHECK(r.max_rel_error < 1e-4);
    ++per_op[c.op];
  }
  for (const auto& [op, n] : per_op) {
    CAPTURE(op);
    CHECK(n >= 3);
  }
}

TEST_CASE("gradchecks also hold with the scalar kernels") {
  const auto before = kernels::active().isa;
  kernels::set_active(kernels::Isa::kScalar);
  std::mt19937_64 rng(12);
  for (auto& c : testing::make_op_cases(rng)) {
    if (c.op != "conv2d" && c.op != "conv_transpose2d" && c.op != "linear") continue;
    CAPTURE(c.shape);
    CHECK(testing::gradcheck(c.inputs, c.build, rng).max_rel_error < 1e-4);
  }
  kernels::set_active(before);
}

TEST_CASE("scalar forward examples") {
  Graph g;
  CHECK(ops::leaky_relu(g.constant(Tensor::scalar(-1.0)), 0.2).value()[0] ==
        doctest::Approx(-0.2));
  CHECK(ops::sigmoid(g.constant(Tensor::scalar(0.0))).value()[0] == 0.5);
  Var big = ops::sigmoid(g.constant(Tensor({2}, std::vector<double>{-800.0, 800.0})));
  CHECK(big.value()[0] == 0.0);
  CHECK(big.value()[1] == 1.0);
}

TEST_CASE("conv output shapes") {
  Graph g;
  Var x = g.constant(Tensor({1, 1, 8, 8}, 1.0));
  Var w = g.constant(Tensor({5, 1, 4, 4}, 0.1));
  Var b = g.constant(Tensor({5}, 0.0));
  Var y = ops::conv2d(x, w, b, {2, 1});
  CHECK(y.shape() == Shape{1, 5, 4, 4});
  Var wt = g.constant(Tensor({5, 2, 4, 4}, 0.1));
  Var z = ops::conv_transpose2d(y, wt, g.constant(Tensor({2}, 0.0)), {2, 1});
  CHECK(z.shape() == Shape{1, 2, 8, 8});
}

TEST_CASE("conv_transpose2d is the adjoint of conv2d") {
  std::mt19937_64 rng(5);
  Tensor x = testing::random_tensor({2, 3, 8, 6}, rng);
  Tensor w = testing::random_tensor({4, 3, 4, 4}, rng);
  Graph g;
  Var y = ops::conv2d(g.constant(x), g.constant(w), g.constant(Tensor({4}, 0.0)), {2, 1});
  Tensor u = testing::random_tensor(y.shape(), rng);
  Var xt = ops::conv_transpose2d(g.constant(u), g.constant(w), g.constant(Tensor({3}, 0.0)),
                                 {2, 1});
  REQUIRE(xt.shape() == x.shape());
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) lhs += u[i] * y.value()[i];
  for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * xt.value()[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("shape mismatches name both shapes") {
  Graph g;
  Var a = g.constant(Tensor({2, 3}));
  Var b = g.constant(Tensor({3, 2}));
  try {
    ops::add(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[3x2]") != std::string::npos);
  }
  CHECK_THROWS_AS(ops::conv2d(g.constant(Tensor({1, 2, 8, 8})), g.constant(Tensor({4, 3, 4, 4})),
                              g.constant(Tensor({4})), {2, 1}),
                  ShapeError);
  CHECK_THROWS_AS(ops::linear(a, g.constant(Tensor({4, 2})), g.constant(Tensor({4}))),
                  ShapeError);
}

TEST_CASE("backward of sum(w * x) is w") {
  std::mt19937_64 rng(3);
  Tensor w = testing::random_tensor({3, 4}, rng);
  Graph g;
  Var x = g.input(testing::random_tensor({3, 4}, rng), true);
  g.backward(ops::sum(ops::mul(g.constant(w), x)));
  const Tensor* gx = g.grad(x);
  REQUIRE(gx != nullptr);
  for (std::size_t i = 0; i < w.size(); ++i) CHECK((*gx)[i] == w[i]);
}

TEST_CASE("backward rejects a non-scalar loss") {
  Graph g;
  Var x = g.input(Tensor({2}, 1.0), true);
  CHECK_THROWS_AS(g.backward(x), std::invalid_argument);
}

TEST_CASE("detached inputs get no gradient and unused parameters stay zero") {
  ParameterStore store;
  Parameter& used = store.add("used", Tensor({2}, 1.0));
  Parameter& unused = store.add("unused", Tensor({2}, 1.0));
  Graph g;
  Var d = g.input(Tensor({2}, 3.0), false);
  Var p = g.parameter(used);
  g.parameter(unused);
  g.backward(ops::sum(ops::mul(d, p)));
  CHECK(g.grad(d) == nullptr);
  CHECK(used.touched);
  CHECK_FALSE(unused.touched);
  for (double v : unused.grad.data()) CHECK(v == 0.0);
  for (double v : used.grad.data()) CHECK(v == 3.0);
}

TEST_CASE("batch_norm in training mode standardizes each channel") {
  std::mt19937_64 rng(9);
  Tensor x = testing::random_tensor({4, 3, 2, 2}, rng, -5.0, 9.0);
  Graph g;
  Tensor rm({3}, 0.0), rv({3}, 1.0);
  Var y = ops::batch_norm(g.constant(x), g.constant(Tensor({3}, 1.0)),
                          g.constant(Tensor({3}, 0.0)), rm, rv, {});
  for (std::size_t c = 0; c < 3; ++c) {
    double s = 0.0, ss = 0.0;
    int n = 0;
    for (std::size_t b = 0; b < 4; ++b) {
      for (std::size_t q = 0; q < 4; ++q) {
        const double v = y.value()[(b * 3 + c) * 4 + q];
        s += v;
        ss += v * v;
        ++n;
      }
    }
    const double mean = s / n;
    CHECK(std::abs(mean) < 1e-6);
    CHECK(std::abs(ss / n - mean * mean - 1.0) < 1e-5);
  }
  for (double v : rm.data()) CHECK(v != 0.0);
}

TEST_CASE("batch_norm in eval mode uses running statistics") {
  Graph g(false);
  Tensor rm({1}, 2.0), rv({1}, 4.0);
  Var y = ops::batch_norm(g.constant(Tensor({2, 1}, std::vector<double>{2.0, 6.0})),
                          g.constant(Tensor({1}, 1.0)), g.constant(Tensor({1}, 0.5)), rm, rv,
                          {0.1, 0.0});
  CHECK(y.value()[0] == doctest::Approx(0.5));
  CHECK(y.value()[1] == doctest::Approx(2.5));
  CHECK(rm[0] == 2.0);
}

TEST_CASE("repeated forward/backward is bitwise reproducible") {
  auto run = [] {
    std::mt19937_64 rng(21);
    Tensor x = testing::random_tensor({2, 2, 8, 8}, rng);
    Tensor w = testing::random_tensor({3, 2, 4, 4}, rng);
    Graph g;
    Var wv = g.input(w, true);
    Var y = ops::leaky_relu(ops::conv2d(g.constant(x), wv, g.constant(Tensor({3}, 0.1)), {2, 1}),
                            0.2);
    g.backward(ops::sum(y));
    return *g.grad(wv);
  };
  Tensor a = run(), b = run();
  CHECK(a.storage() == b.storage());
}

TEST_CASE("softmax_cross_entropy reductions") {
  Graph g;
  Tensor logits({2, 16}, 0.0);
  const std::vector<std::size_t> labels{3, 15};
  CHECK(ops::softmax_cross_entropy(g.constant(logits), labels).value()[0] ==
        doctest::Approx(std::log(16.0)).epsilon(1e-12));
  Tensor sat({1, 4}, 0.0);
  sat[1] = 30.0;
  CHECK(ops::softmax_cross_entropy(g.constant(sat), std::vector<std::size_t>{1}).value()[0] <
        1e-9);
  CHECK_THROWS_AS(ops::softmax_cross_entropy(g.constant(sat), std::vector<std::size_t>{4}),
                  std::out_of_range);
  std::mt19937_64 rng(1);
  Tensor p = ops::softmax_rows(testing::random_tensor({3, 7}, rng));
  for (std::size_t i = 0; i < 3; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 7; ++j) s += p[i * 7 + j];
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
}
