#include <doctest.h>

#include <optional>

#include "../support/oracles.hpp"
#include "catunet/autodiff.hpp"
#include "catunet/errors.hpp"
#include "catunet/ops.hpp"

using namespace catunet;

namespace {

Tensor make(Shape shape, std::vector<float> values) { return Tensor(std::move(shape), std::move(values)); }

std::vector<float> to_vector(std::span<const float> s) { return {s.begin(), s.end()}; }

}  // namespace

TEST_CASE("relu forward and gradient") {
  Graph g;
  const NodeId x = g.constant(make({3}, {-1, 0, 2}), true);
  const NodeId y = ops::relu(g, x);
  CHECK(g.value(y) == make({3}, {0, 0, 2}));
  g.backward(ops::sum_squares(g, y));
  CHECK(to_vector(g.grad(x)) == std::vector<float>{0, 0, 4});

  Graph h;
  const NodeId three = h.constant(make({1}, {3}), true);
  h.backward(ops::relu(h, three));
  CHECK(h.grad(three)[0] == 1.0f);
}

TEST_CASE("relu of an all-negative input is zero") {
  Graph g;
  const NodeId y = ops::relu(g, g.constant(Tensor(Shape{2, 2}, -3.0f)));
  for (float v : g.value(y).values()) CHECK(v == 0.0f);
}

TEST_CASE("dropout is the identity outside training or at rate zero") {
  Rng rng(1, Stream::dropout);
  const Tensor x = oracle::random_tensor({4, 4}, rng);
  Graph g;
  const NodeId in = g.constant(x);
  CHECK(g.value(ops::dropout(g, in, 0.5, false, rng)) == x);
  CHECK(g.value(ops::dropout(g, in, 0.0, true, rng)) == x);
  CHECK_THROWS_AS(ops::dropout(g, in, 1.0, true, rng), ValidationError);
  CHECK_THROWS_AS(ops::dropout(g, in, -0.1, true, rng), ValidationError);
}

TEST_CASE("dropout keeps the expected activation at rate 0.5") {
  Rng rng(2024, Stream::dropout);
  Graph g;
  const NodeId y = ops::dropout(g, g.constant(Tensor(Shape{1000000}, 1.0f)), 0.5, true, rng);
  double sum = 0.0;
  for (float v : g.value(y).values()) {
    REQUIRE((v == 0.0f || v == 2.0f));
    sum += v;
  }
  const double mean = sum / 1e6;
  CHECK(mean >= 0.99);
  CHECK(mean <= 1.01);
}

TEST_CASE("mse fixtures") {
  Graph g;
  const NodeId a = g.constant(make({2}, {0, 1})), b = g.constant(make({2}, {1, 0}));
  CHECK(g.value(ops::mse(g, a, b))[0] == 1.0f);
  CHECK(g.value(ops::mse(g, a, a))[0] == 0.0f);
  CHECK_THROWS_AS(ops::mse(g, a, g.constant(Tensor(Shape{3}))), ShapeError);
}

TEST_CASE("mse matches a scalar loop") {
  Rng rng(3, Stream::gradcheck);
  const Tensor a = oracle::random_tensor({8}, rng), b = oracle::random_tensor({8}, rng);
  double total = 0.0;
  for (std::size_t i = 0; i < 8; ++i) total += (static_cast<double>(a[i]) - b[i]) * (static_cast<double>(a[i]) - b[i]);
  Graph g;
  CHECK(std::abs(g.value(ops::mse(g, g.constant(a), g.constant(b)))[0] - total / 8.0) < 1e-7);
}

TEST_CASE("mse of a tensor with itself has zero gradient") {
  Rng rng(4, Stream::gradcheck);
  Graph g;
  const NodeId x = g.constant(oracle::random_tensor({5}, rng), true);
  g.backward(ops::mse(g, x, x));
  for (float v : g.grad(x)) CHECK(v == 0.0f);
}

TEST_CASE("backward requires a scalar target") {
  Graph g;
  const NodeId x = g.constant(Tensor(Shape{2}), true);
  CHECK_THROWS_AS(g.backward(ops::relu(g, x)), ValidationError);
}

TEST_CASE("a tensor with two consumers receives the sum of both branch gradients") {
  Rng rng(5, Stream::gradcheck);
  const Tensor xv = oracle::random_tensor({6}, rng);

  auto branch_grad = [&](bool use_relu, bool use_scale) {
    Graph g;
    const NodeId x = g.constant(xv, true);
    std::optional<NodeId> total;
    if (use_relu) total = ops::sum_squares(g, ops::relu(g, x));
    if (use_scale) {
      const NodeId s = ops::sum_squares(g, ops::scale(g, x, 3.0f));
      total = total ? ops::add(g, *total, s) : s;
    }
    g.backward(*total);
    return to_vector(g.grad(x));
  };

  const auto both = branch_grad(true, true), first = branch_grad(true, false), second = branch_grad(false, true);
  for (std::size_t i = 0; i < both.size(); ++i) CHECK(both[i] == doctest::Approx(first[i] + second[i]).epsilon(1e-6));
}

TEST_CASE("backward visits nodes in reverse recording order") {
  Graph g;
  const NodeId x = g.constant(make({2}, {1, -1}), true);
  const NodeId r = ops::relu(g, x);
  const NodeId s = ops::scale(g, r, 2.0f);
  const NodeId loss = ops::sum_squares(g, s);
  g.backward(loss);
  CHECK(g.last_backward_order() == std::vector<NodeId>{loss, s, r, x});
}

TEST_CASE("frozen leaves never receive gradients") {
  const Tensor w(Shape{2}, 1.0f);
  Graph g;
  const NodeId frozen = g.frozen(w);
  const NodeId param = g.parameter(w);
  g.backward(ops::sum_squares(g, ops::add(g, frozen, param)));
  CHECK_FALSE(g.has_grad(frozen));
  CHECK(to_vector(g.grad(param)) == std::vector<float>{4, 4});
}

TEST_CASE("forward and backward stay finite on bounded inputs") {
  Rng rng(6, Stream::gradcheck);
  Graph g;
  const NodeId x = g.constant(oracle::random_tensor({1, 2, 8, 8}, rng, -10.0, 10.0), true);
  const NodeId w = g.constant(oracle::random_tensor({3, 2, 3, 3}, rng), true);
  const NodeId b = g.constant(oracle::random_tensor({3}, rng), true);
  const NodeId y = ops::upsample_nearest(g, ops::maxpool2d(g, ops::relu(g, ops::conv2d(g, x, w, b, {1, 1}))), 2);
  const NodeId loss = ops::mse(g, y, g.constant(Tensor(g.value(y).shape())));
  g.backward(loss);
  CHECK(g.value(loss).all_finite());
  for (NodeId id : {x, w, b}) {
    for (float v : g.grad(id)) REQUIRE(std::isfinite(v));
  }
}

TEST_CASE("identical seeds give bit-identical gradients") {
  auto run = [] {
    Rng rng(9, Stream::gradcheck);
    Graph g;
    const NodeId x = g.constant(oracle::random_tensor({1, 1, 4, 4}, rng), true);
    const NodeId w = g.constant(oracle::random_tensor({2, 1, 3, 3}, rng), true);
    const NodeId b = g.constant(oracle::random_tensor({2}, rng), true);
    Rng drop(9, Stream::dropout);
    g.backward(ops::sum_squares(g, ops::dropout(g, ops::conv2d(g, x, w, b, {1, 1}), 0.5, true, drop)));
    return to_vector(g.grad(w));
  };
  CHECK(run() == run());
}
