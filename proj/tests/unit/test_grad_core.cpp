// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "sunet/errors.hpp"
#include "sunet/nn.hpp"
#include "sunet/ops.hpp"

using namespace sunet;
using sunet::testing::check_leaf_gradients;
using sunet::testing::random_tensor;

namespace {

Tensor t4(std::size_t n, std::size_t c, std::size_t h, std::size_t w, std::vector<double> v) {
  return Tensor(Shape{n, c, h, w}, std::move(v));
}

LstmWeights bind_weights(const std::vector<Var>& v, std::size_t offset) {
  LstmWeights w;
  w.input_weight = v[offset];
  w.hidden_weight = v[offset + 1];
  w.bias = v[offset + 2];
  return w;
}

}  // namespace

TEST_CASE("conv2d scaling identity") {
  Tape tape;
  Var x = tape.constant(Tensor(Shape{1, 1, 3, 3}, 1.0));
  Var k = tape.constant(t4(1, 1, 1, 1, {2.0}));
  Var b = tape.constant(Tensor(Shape{1}, 0.0));
  Var y = ops::conv2d(x, k, b);
  CHECK(y.shape() == Shape{1, 1, 3, 3});
  for (double v : y.value().values()) CHECK(v == 2.0);
}

TEST_CASE("conv2d single dot product") {
  Tape tape;
  Var x = tape.constant(t4(1, 1, 2, 2, {1, 2, 3, 4}));
  Var k = tape.constant(t4(1, 1, 2, 2, {1, 0, 0, 1}));
  Var b = tape.constant(Tensor(Shape{1}, 0.0));
  Var y = ops::conv2d(x, k, b);
  CHECK(y.shape() == Shape{1, 1, 1, 1});
  CHECK(y.value()[0] == 5.0);
}

TEST_CASE("conv2d output extents follow the floor formula") {
  Tape tape;
  Var x = tape.constant(Tensor(Shape{2, 3, 7, 6}, 0.5));
  Var k = tape.constant(Tensor(Shape{4, 3, 3, 2}, 0.1));
  Var b = tape.constant(Tensor(Shape{4}, 0.0));
  ops::Conv2dOptions o;
  o.padding = {1, 0};
  o.stride = {2, 2};
  // H' = (7 + 2 - 3) / 2 + 1 = 4, W' = (6 - 2) / 2 + 1 = 3
  CHECK(ops::conv2d(x, k, b, o).shape() == Shape{2, 4, 4, 3});
}

TEST_CASE("conv2d rejects mismatched shapes") {
  Tape tape;
  Var x = tape.constant(Tensor(Shape{1, 2, 4, 4}));
  Var k = tape.constant(Tensor(Shape{1, 3, 3, 3}));
  Var b = tape.constant(Tensor(Shape{1}));
  CHECK_THROWS_AS(ops::conv2d(x, k, b), ShapeError);
  Var big = tape.constant(Tensor(Shape{1, 2, 5, 5}));
  CHECK_THROWS_AS(ops::conv2d(x, big, b), ShapeError);
}

TEST_CASE("conv2d gradient matches finite differences") {
  Rng rng(11);
  for (auto [pad, stride] : {std::pair<std::size_t, std::size_t>{0, 1}, {1, 1}, {1, 2}}) {
    auto report = check_leaf_gradients(
        {random_tensor({2, 2, 5, 5}, rng), random_tensor({3, 2, 3, 3}, rng), random_tensor({3}, rng)},
        [pad = pad, stride = stride](Tape&, const std::vector<Var>& v) {
          ops::Conv2dOptions o;
          o.padding = {pad, pad};
          o.stride = {stride, stride};
          return ops::sum(ops::conv2d(v[0], v[1], v[2], o));
        });
    CHECK(report.max_rel_error < 1e-5);
  }
}

TEST_CASE("lstm_step zero fixed point") {
  Tape tape;
  LstmWeights w;
  w.input_weight = tape.constant(Tensor(Shape{4, 1}));
  w.hidden_weight = tape.constant(Tensor(Shape{4, 1}));
  w.bias = tape.constant(Tensor(Shape{4}));
  LstmState s{tape.constant(Tensor(Shape{1, 1})), tape.constant(Tensor(Shape{1, 1}))};
  auto next = lstm_step(tape.constant(Tensor(Shape{1, 1})), s, w);
  CHECK(next.h.value()[0] == 0.0);
  CHECK(next.c.value()[0] == 0.0);
}

TEST_CASE("lstm_step hand-evaluated gates with unit cell state") {
  Tape tape;
  LstmWeights w;
  w.input_weight = tape.constant(Tensor(Shape{4, 1}));
  w.hidden_weight = tape.constant(Tensor(Shape{4, 1}));
  w.bias = tape.constant(Tensor(Shape{4}));
  LstmState s{tape.constant(Tensor(Shape{1, 1})), tape.constant(Tensor(Shape{1, 1}, 1.0))};
  auto next = lstm_step(tape.constant(Tensor(Shape{1, 1})), s, w);
  // gates all sigmoid(0) = 0.5, candidate tanh(0) = 0
  CHECK(next.c.value()[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(next.h.value()[0] == doctest::Approx(0.5 * std::tanh(0.5)).epsilon(1e-12));
  CHECK(next.h.value()[0] == doctest::Approx(0.23106).epsilon(1e-4));
}

TEST_CASE("lstm_step rejects inconsistent dimensions") {
  Tape tape;
  LstmWeights w;
  w.input_weight = tape.constant(Tensor(Shape{8, 3}));
  w.hidden_weight = tape.constant(Tensor(Shape{8, 2}));
  w.bias = tape.constant(Tensor(Shape{8}));
  LstmState s{tape.constant(Tensor(Shape{1, 2})), tape.constant(Tensor(Shape{1, 3}))};
  CHECK_THROWS_AS(lstm_step(tape.constant(Tensor(Shape{1, 3})), s, w), ShapeError);
  LstmState ok{tape.constant(Tensor(Shape{1, 2})), tape.constant(Tensor(Shape{1, 2}))};
  CHECK_THROWS_AS(lstm_step(tape.constant(Tensor(Shape{1, 4})), ok, w), ShapeError);
}

TEST_CASE("three chained lstm steps match finite differences") {
  Rng rng(5);
  const std::size_t batch = 2, in = 3, hid = 4;
  std::vector<Tensor> inputs{random_tensor({batch, in}, rng),       random_tensor({batch, in}, rng),
                             random_tensor({batch, in}, rng),       random_tensor({4 * hid, in}, rng),
                             random_tensor({4 * hid, hid}, rng),    random_tensor({4 * hid}, rng),
                             random_tensor({batch, hid}, rng),      random_tensor({batch, hid}, rng)};
  auto report = check_leaf_gradients(inputs, [](Tape&, const std::vector<Var>& v) {
    LstmState s{v[6], v[7]};
    const LstmWeights w = bind_weights(v, 3);
    for (int t = 0; t < 3; ++t) s = lstm_step(v[t], s, w);
    return ops::sum(ops::mul(s.h, s.h));
  });
  CHECK(report.max_rel_error < 1e-5);
}

TEST_CASE("projected lstm cell (cell width differs from hidden width)") {
  Rng rng(9);
  auto report = check_leaf_gradients(
      {random_tensor({2, 3}, rng), random_tensor({12, 3}, rng), random_tensor({12, 2}, rng), random_tensor({12}, rng),
       random_tensor({2, 3}, rng)},
      [](Tape& tape, const std::vector<Var>& v) {
        LstmWeights w = bind_weights(v, 1);
        w.projection = v[4];
        LstmState s{tape.constant(Tensor(Shape{2, 2}, 0.1)), tape.constant(Tensor(Shape{2, 3}, -0.2))};
        s = lstm_step(v[0], s, w);
        CHECK(s.h.shape() == Shape{2, 2});
        CHECK(s.c.shape() == Shape{2, 3});
        s = lstm_step(v[0], s, w);
        return ops::sum(s.h);
      });
  CHECK(report.max_rel_error < 1e-5);
}

TEST_CASE("softmax, sigmoid and batch_norm hand values") {
  Tape tape;
  Var s = ops::softmax(tape.constant(Tensor::from({0, 0, 0})), 0);
  for (double v : s.value().values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(ops::sigmoid(tape.constant(Tensor::scalar(0))).value()[0] == 0.5);

  Var x = tape.constant(Tensor(Shape{2, 1}, {1.0, 3.0}));
  Var gamma = tape.constant(Tensor(Shape{1}, 1.0));
  Var beta = tape.constant(Tensor(Shape{1}, 0.0));
  Tensor rm(Shape{1}, 0.0), rv(Shape{1}, 1.0);
  ops::BatchNormOptions opts;
  Var y = ops::batch_norm(x, gamma, beta, rm, rv, opts);
  const double expect = 1.0 / std::sqrt(1.0 + opts.eps);
  CHECK(y.value()[0] == doctest::Approx(-expect).epsilon(1e-14));
  CHECK(y.value()[1] == doctest::Approx(expect).epsilon(1e-14));
  // running stats: mean 0.9*0 + 0.1*2, unbiased var 2 -> 0.9*1 + 0.1*2
  CHECK(rm[0] == doctest::Approx(0.2));
  CHECK(rv[0] == doctest::Approx(1.1));

  opts.training = false;
  Var z = ops::batch_norm(x, gamma, beta, rm, rv, opts);
  CHECK(z.value()[0] == doctest::Approx((1.0 - 0.2) / std::sqrt(1.1 + opts.eps)));
  CHECK(rm[0] == doctest::Approx(0.2));
}

TEST_CASE("softmax rows lie on the simplex") {
  Rng rng(3);
  Tape tape;
  Var x = tape.constant(random_tensor({3, 5, 4}, rng, -30, 30));
  for (std::size_t axis = 0; axis < 3; ++axis) {
    const Tensor& y = ops::softmax(x, axis).value();
    const Shape& s = y.shape();
    std::size_t inner = 1;
    for (std::size_t d = axis + 1; d < 3; ++d) inner *= s[d];
    const std::size_t outer = y.size() / (s[axis] * inner);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t i = 0; i < inner; ++i) {
        double total = 0;
        for (std::size_t k = 0; k < s[axis]; ++k) {
          const double v = y[(o * s[axis] + k) * inner + i];
          CHECK(v >= 0.0);
          total += v;
        }
        CHECK(std::abs(total - 1.0) < 1e-9);
      }
    }
  }
  CHECK_THROWS_AS(ops::softmax(x, 3), ShapeError);
}

TEST_CASE("backward basics") {
  SUBCASE("sum gives ones") {
    Tape tape;
    Var x = tape.leaf(Tensor(Shape{2, 3}, 0.7));
    tape.backward(ops::sum(x));
    for (double g : x.grad().values()) CHECK(g == 1.0);
  }
  SUBCASE("sum of squares") {
    Tape tape;
    Var x = tape.leaf(Tensor::from({3.0}));
    tape.backward(ops::sum(ops::mul(x, x)));
    CHECK(x.grad()[0] == 6.0);
  }
  SUBCASE("non-scalar loss rejected") {
    Tape tape;
    Var x = tape.leaf(Tensor(Shape{2}, 1.0));
    CHECK_THROWS_AS(tape.backward(x), ShapeError);
  }
  SUBCASE("second backward without a new forward pass rejected") {
    Tape tape;
    Var x = tape.leaf(Tensor(Shape{2}, 1.0));
    Var loss = ops::sum(x);
    tape.backward(loss);
    CHECK_THROWS_AS(tape.backward(loss), std::logic_error);
    CHECK_THROWS_AS(ops::sum(x), std::logic_error);
    tape.clear();
    Var y = tape.leaf(Tensor(Shape{2}, 1.0));
    CHECK_NOTHROW(tape.backward(ops::sum(y)));
  }
  SUBCASE("fan-out accumulates") {
    Tape tape;
    Var x = tape.leaf(Tensor::from({2.0, -1.0}));
    Var y = ops::add(ops::scale(x, 3.0), ops::mul(x, x));
    tape.backward(ops::sum(y));
    CHECK(x.grad()[0] == 3.0 + 4.0);
    CHECK(x.grad()[1] == 3.0 - 2.0);
  }
}

TEST_CASE("gradient accumulation is linear") {
  Rng rng(21);
  const Tensor x0 = random_tensor({6}, rng);
  auto f = [](const Var& x) { return ops::sum(ops::tanh(x)); };
  auto g = [](const Var& x) { return ops::sum(ops::mul(ops::sigmoid(x), x)); };
  auto grad_of = [&](auto&& loss) {
    Tape tape;
    Var x = tape.leaf(x0);
    tape.backward(loss(x));
    return x.grad();
  };
  const Tensor gf = grad_of(f);
  const Tensor gg = grad_of(g);
  const Tensor gsum = grad_of([&](const Var& x) { return ops::add(f(x), g(x)); });
  for (std::size_t i = 0; i < x0.size(); ++i) CHECK(gsum[i] == doctest::Approx(gf[i] + gg[i]).epsilon(1e-14));
}

TEST_CASE("parameters receive accumulated gradients") {
  ParameterStore store;
  Parameter& p = store.add("w", Shape{2});
  p.value = Tensor::from({1.0, 2.0});
  Tape tape;
  Var a = tape.param(p);
  Var b = tape.param(p);
  CHECK(a.id() == b.id());
  tape.backward(ops::sum(ops::mul(a, b)));
  CHECK(p.grad[0] == 2.0);
  CHECK(p.grad[1] == 4.0);
}

TEST_CASE("non-finite forward values abort") {
  Tape tape;
  Var x = tape.leaf(Tensor::from({1000.0}));
  CHECK_THROWS_AS(ops::exp(x), NumericalError);
  CHECK_THROWS_AS(ops::log(tape.constant(Tensor::from({0.0}))), NumericalError);
  CHECK_THROWS_AS(tape.leaf(Tensor::from({std::nan("")})), NumericalError);
}

TEST_CASE("every differentiable op matches finite differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(100 + seed);
    CAPTURE(seed);
    auto expect_ok = [](const testing::GradCheckReport& r) {
      CAPTURE(r.worst);
      CHECK(r.max_rel_error < 1e-4);
    };
    // Random weights keep sum-of-output losses from having structurally zero gradients.
    auto weighted = [&rng](Shape s) { return random_tensor(std::move(s), rng); };
    const Tensor w23 = weighted({2, 3});
    auto wsum = [](const Var& y, const Tensor& w) {
      return ops::sum(ops::mul(y, y.tape().constant(w)));
    };
    expect_ok(check_leaf_gradients({weighted({2, 3}), weighted({2, 3})}, [&](Tape&, const std::vector<Var>& v) {
      return wsum(ops::sub(ops::mul(v[0], v[1]), ops::add(v[0], ops::scale(v[1], 0.3))), w23);
    }));
    expect_ok(check_leaf_gradients({weighted({2, 3})}, [&](Tape&, const std::vector<Var>& v) {
      return wsum(ops::add(ops::add(ops::sigmoid(v[0]), ops::tanh(v[0])), ops::exp(v[0])), w23);
    }));
    expect_ok(check_leaf_gradients({random_tensor({2, 3}, rng, 0.2, 2.0)}, [&](Tape&, const std::vector<Var>& v) {
      return wsum(ops::log(ops::clamp_min(v[0], 1e-12)), w23);
    }));
    expect_ok(check_leaf_gradients({weighted({2, 3})}, [&](Tape&, const std::vector<Var>& v) {
      return wsum(ops::relu(ops::add_scalar(v[0], 0.05)), w23);
    }));
    const Tensor w345 = weighted({3, 4, 5});
    for (std::size_t axis = 0; axis < 3; ++axis) {
      expect_ok(check_leaf_gradients({weighted({3, 4, 5})}, [&](Tape&, const std::vector<Var>& v) {
        return wsum(ops::softmax(v[0], axis), w345);
      }));
    }
    expect_ok(check_leaf_gradients({weighted({3, 4}), weighted({4, 2})}, [&](Tape&, const std::vector<Var>& v) {
      return ops::mean(ops::tanh(ops::matmul(v[0], v[1])));
    }));
    expect_ok(check_leaf_gradients({weighted({3, 4}), weighted({5, 4}), weighted({5})},
                                   [&](Tape&, const std::vector<Var>& v) {
                                     return ops::mean(ops::tanh(ops::linear(v[0], v[1], v[2])));
                                   }));
    expect_ok(check_leaf_gradients({weighted({2, 1, 3}), weighted({2, 2, 3})}, [&](Tape& t, const std::vector<Var>& v) {
      Var c = ops::concat({v[0], v[1]}, 1);
      Var n = ops::narrow(c, 1, 1, 2);
      Var r = ops::reshape(n, Shape{12});
      return ops::sum(ops::mul(ops::tanh(r), t.constant(Tensor(Shape{12}, 0.5))));
    }));
    const Tensor w4 = weighted({2, 3, 4, 4});
    expect_ok(check_leaf_gradients({weighted({2, 3, 4, 4})}, [&](Tape&, const std::vector<Var>& v) {
      return wsum(ops::upsample2d(ops::max_pool2d(v[0], 2), 2), w4);
    }));
    const Tensor wb = weighted({2, 3, 5, 5});
    expect_ok(check_leaf_gradients({weighted({2, 3}), weighted({2, 3})}, [&](Tape&, const std::vector<Var>& v) {
      Var pooled = ops::global_avg_pool(ops::broadcast_spatial(v[0], 5, 5));
      return ops::add(wsum(ops::broadcast_spatial(v[1], 5, 5), wb), wsum(pooled, w23));
    }));
    for (bool training : {true, false}) {
      const Tensor wbn = weighted({3, 2, 2, 2});
      Tensor rm = random_tensor({2}, rng), rv = random_tensor({2}, rng, 0.5, 1.5);
      expect_ok(check_leaf_gradients({weighted({3, 2, 2, 2}), weighted({2}), weighted({2})},
                                     [&](Tape&, const std::vector<Var>& v) {
                                       Tensor m = rm, s = rv;
                                       ops::BatchNormOptions o;
                                       o.training = training;
                                       return wsum(ops::batch_norm(v[0], v[1], v[2], m, s, o), wbn);
                                     }));
    }
  }
}

TEST_CASE("composite conv -> lstm_step -> softmax -> mean graph") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    const std::size_t hid = 3;
    std::vector<Tensor> inputs{random_tensor({2, 1, 4, 4}, rng), random_tensor({2, 1, 3, 3}, rng),
                               random_tensor({2}, rng),          random_tensor({4 * hid, 2}, rng),
                               random_tensor({4 * hid, hid}, rng), random_tensor({4 * hid}, rng)};
    const Tensor target = random_tensor({2, hid}, rng);
    auto report = check_leaf_gradients(inputs, [&](Tape& tape, const std::vector<Var>& v) {
      ops::Conv2dOptions o;
      o.padding = {1, 1};
      Var feat = ops::global_avg_pool(ops::conv2d(v[0], v[1], v[2], o));
      LstmState s{tape.constant(Tensor(Shape{2, hid})), tape.constant(Tensor(Shape{2, hid}))};
      s = lstm_step(feat, s, bind_weights(v, 3));
      Var p = ops::softmax(s.h, 1);
      return ops::mean(ops::mul(p, tape.constant(target)));
    });
    CAPTURE(report.worst);
    CHECK(report.max_rel_error < 1e-4);
  }
}

TEST_CASE("straight-through emits one-hot and passes gradient unchanged") {
  Tape tape;
  Var soft = tape.leaf(Tensor(Shape{1, 3}, {0.2, 0.5, 0.3}));
  Var hard = ops::straight_through(soft);
  CHECK(hard.value()[1] == 1.0);
  CHECK(hard.value()[0] == 0.0);
  tape.backward(ops::sum(ops::mul(hard, tape.constant(Tensor(Shape{1, 3}, {1.0, 2.0, 3.0})))));
  CHECK(soft.grad()[2] == 3.0);
}
