#include <doctest.h>

#include "../support/oracles.hpp"
#include "catunet/gradcheck.hpp"
#include "catunet/ops.hpp"

using namespace catunet;

TEST_CASE("conv2d gradients agree with finite differences") {
  Rng data(1, Stream::gradcheck), probes(2, Stream::gradcheck);
  std::vector<Tensor> inputs{oracle::random_tensor({1, 2, 4, 4}, data), oracle::random_tensor({3, 2, 3, 3}, data),
                             oracle::random_tensor({3}, data)};
  const Tensor target = oracle::random_tensor({1, 3, 4, 4}, data);
  auto conv = [](Graph& g, std::span<const NodeId> in) { return ops::conv2d(g, in[0], in[1], in[2], {1, 1}); };

  const auto loss = grad_check_mse(conv, inputs, target);
  CHECK(loss.max_relative_error < 1e-4);
  CHECK(loss.per_tensor.size() == 3);

  const auto projected = grad_check(conv, inputs, probes);
  CHECK(projected.max_relative_error < 1e-4);
}

TEST_CASE("a corrupted analytic gradient is detected") {
  Rng data(3, Stream::gradcheck), probes(4, Stream::gradcheck);
  std::vector<Tensor> inputs{oracle::random_tensor({2, 3}, data)};
  const auto result = grad_check([](Graph& g, std::span<const NodeId> in) { return ops::sum_squares(g, in[0]); },
                                 inputs, probes, {.analytic_scale = 1.5});
  CHECK(result.max_relative_error > 0.1);
}

TEST_CASE("the full suite passes and names every case") {
  const auto cases = run_gradcheck_suite({});
  std::vector<std::string> names;
  for (const auto& c : cases) {
    names.push_back(c.name);
    CHECK_MESSAGE(c.passed(), c.name, " error ", c.max_relative_error);
  }
  for (const char* expected : {"conv2d", "maxpool2d", "upsample_nearest", "concat_channels", "relu", "dropout", "mse",
                               "model"}) {
    CHECK(std::find(names.begin(), names.end(), expected) != names.end());
  }
}

TEST_CASE("fault injection fails only the named case") {
  const auto cases = run_gradcheck_suite({.seed = 0, .fault = "relu"});
  for (const auto& c : cases) CHECK(c.passed() == (c.name != "relu"));
}

TEST_CASE("the suite is deterministic for a fixed seed") {
  const auto a = run_gradcheck_suite({.seed = 5}), b = run_gradcheck_suite({.seed = 5});
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].max_relative_error == b[i].max_relative_error);
}
