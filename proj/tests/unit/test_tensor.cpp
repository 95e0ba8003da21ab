#include <doctest.h>

#include <cmath>
#include <limits>

#include "catunet/errors.hpp"
#include "catunet/rng.hpp"
#include "catunet/tensor.hpp"

using namespace catunet;

TEST_CASE("tensor construction checks element count") {
  CHECK_THROWS_AS(Tensor(Shape{2, 2}, std::vector<float>{1, 2, 3}), ShapeError);
  Tensor t(Shape{2, 3}, 1.5f);
  CHECK(t.numel() == 6);
  CHECK(t.dim(1) == 3);
  CHECK(shape_string(t.shape()) == "(2,3)");
  CHECK_THROWS_AS(t.dim(2), ShapeError);
}

TEST_CASE("reshape keeps values and rejects a different count") {
  Tensor t(Shape{2, 2}, std::vector<float>{1, 2, 3, 4});
  const Tensor r = t.reshaped(Shape{4});
  CHECK(r[3] == 4.0f);
  CHECK_THROWS_AS(t.reshaped(Shape{3}), ShapeError);
}

TEST_CASE("gradient buffers follow the value shape") {
  Tensor t(Shape{3});
  CHECK_FALSE(t.has_grad());
  CHECK_THROWS(t.grad());
  auto g = t.ensure_grad();
  CHECK(g.size() == 3);
  g[1] = 2.0f;
  t.zero_grad();
  CHECK(t.grad()[1] == 0.0f);
  t.clear_grad();
  CHECK_FALSE(t.has_grad());
}

TEST_CASE("equality compares shape and bits, not gradients") {
  Tensor a(Shape{2}, std::vector<float>{1, 2});
  Tensor b = a;
  b.ensure_grad()[0] = 9.0f;
  CHECK(a == b);
  CHECK_FALSE(a == a.reshaped(Shape{1, 2}));
}

TEST_CASE("all_finite detects NaN and infinity") {
  Tensor t(Shape{2});
  CHECK(t.all_finite());
  t[0] = std::numeric_limits<float>::quiet_NaN();
  CHECK_FALSE(t.all_finite());
  t[0] = std::numeric_limits<float>::infinity();
  CHECK_FALSE(t.all_finite());
}

TEST_CASE("rng streams are reproducible and independent") {
  Rng a(7, Stream::init), b(7, Stream::init), c(7, Stream::dropout);
  bool differs = false;
  for (int i = 0; i < 16; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    differs |= x != c.next_u64();
  }
  CHECK(differs);
}

TEST_CASE("rng children are deterministic and distinct") {
  const Rng root(3, Stream::synthesis);
  Rng a = root.child(5), b = root.child(5), c = root.child(6);
  CHECK(a.next_u64() == b.next_u64());
  CHECK(a.next_u64() != c.next_u64());
}

TEST_CASE("rng variates stay in range with plausible moments") {
  Rng rng(11, Stream::gradcheck);
  double sum = 0.0, sum_sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    const double z = rng.normal();
    sum += z;
    sum_sq += z * z;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sum_sq / n - 1.0) < 0.02);
  for (int i = 0; i < 1000; ++i) CHECK(rng.below(7) < 7);
}
