#include <doctest.h>

#include "../support/oracles.hpp"
#include "catunet/errors.hpp"
#include "catunet/metrics.hpp"

using namespace catunet;

namespace {

Tensor mask_from(std::initializer_list<float> values) { return Tensor(Shape{values.size()}, std::vector<float>(values)); }

}  // namespace

TEST_CASE("reconstruction accuracy fixtures") {
  Rng rng(1, Stream::synthesis);
  std::vector<Tensor> originals, perfect;
  for (int i = 0; i < 3; ++i) originals.push_back(oracle::random_tensor({1, 4, 4}, rng, 0.0, 1.0));
  CHECK(reconstruction_accuracy(originals, originals).value == 1.0);

  // Per-image MSE of exactly 0.02: every pixel off by sqrt(0.02).
  std::vector<Tensor> zeros(2, Tensor(Shape{4}, 0.0f)), offsets;
  for (int i = 0; i < 2; ++i) offsets.emplace_back(Shape{4}, static_cast<float>(std::sqrt(0.02)));
  CHECK(reconstruction_accuracy(zeros, offsets).value == doctest::Approx(0.98).epsilon(1e-6));

  CHECK_THROWS_AS(reconstruction_accuracy({}, {}), ValidationError);
  CHECK_THROWS_AS(reconstruction_accuracy(originals, std::vector<Tensor>(2)), ValidationError);
}

TEST_CASE("reconstruction accuracy matches a scalar oracle and clamps") {
  Rng rng(2, Stream::synthesis);
  std::vector<Tensor> a, b;
  double total = 0.0;
  for (int i = 0; i < 4; ++i) {
    a.push_back(oracle::random_tensor({1, 3, 3}, rng, 0.0, 1.0));
    b.push_back(oracle::random_tensor({1, 3, 3}, rng, 0.0, 1.0));
    double mse = 0.0;
    for (std::size_t j = 0; j < 9; ++j) mse += (static_cast<double>(a[i][j]) - b[i][j]) * (static_cast<double>(a[i][j]) - b[i][j]);
    total += mse / 9.0;
  }
  const auto acc = reconstruction_accuracy(a, b);
  CHECK(std::abs(acc.value - (1.0 - total / 4.0)) < 1e-6);
  CHECK_FALSE(acc.clamped);

  std::vector<Tensor> far{Tensor(Shape{2}, 3.0f)}, zero{Tensor(Shape{2}, 0.0f)};
  const auto clamped = reconstruction_accuracy(far, zero);
  CHECK(clamped.value == 0.0);
  CHECK(clamped.raw == -8.0);
  CHECK(clamped.clamped);
}

TEST_CASE("reconstruction accuracy drops when a reconstruction is perturbed") {
  Rng rng(3, Stream::synthesis);
  std::vector<Tensor> a{oracle::random_tensor({1, 4, 4}, rng, 0.0, 1.0)};
  std::vector<Tensor> b = a;
  b[0][5] += 0.01f;
  CHECK(reconstruction_accuracy(a, b).value < 1.0);
}

TEST_CASE("dice fixtures") {
  const Tensor a = mask_from({1, 1, 0, 0});
  CHECK(dice(a, a) == 1.0);
  CHECK(dice(a, mask_from({0, 0, 1, 1})) == 0.0);
  CHECK(dice(mask_from({1, 1, 1, 1, 0, 0}), mask_from({0, 0, 1, 1, 1, 1})) == 0.5);
  CHECK(dice(mask_from({0, 0}), mask_from({0, 0})) == 1.0);
  CHECK_THROWS_AS(dice(mask_from({0.5f, 0}), mask_from({0, 0})), ValidationError);
  CHECK_THROWS_AS(dice(mask_from({0, 0}), mask_from({0, 0, 0})), ShapeError);
}

TEST_CASE("dice is symmetric and bounded") {
  Rng rng(4, Stream::synthesis);
  for (int i = 0; i < 100; ++i) {
    Tensor a(Shape{16}), b(Shape{16});
    for (std::size_t j = 0; j < 16; ++j) {
      a[j] = rng.uniform() < 0.4 ? 1.0f : 0.0f;
      b[j] = rng.uniform() < 0.4 ? 1.0f : 0.0f;
    }
    const double d = dice(a, b);
    CHECK(d == dice(b, a));
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
  }
}

TEST_CASE("confusion matrix rates") {
  const std::vector<Label> truth{Label::positive, Label::negative};
  const auto perfect = confusion(truth, truth);
  CHECK(perfect.fp == 0);
  CHECK(perfect.fn == 0);
  CHECK(*perfect.accuracy() == 1.0);

  std::vector<Label> actual(99, Label::positive), predicted(99, Label::positive);
  predicted[0] = predicted[1] = Label::negative;
  const auto fig = confusion(predicted, actual);
  CHECK(fig.tp == 97);
  CHECK(fig.fn == 2);
  CHECK(*fig.sensitivity() == doctest::Approx(0.9798).epsilon(1e-4));
  CHECK_FALSE(fig.specificity());

  CHECK_THROWS_AS(confusion(predicted, truth), ValidationError);
}

TEST_CASE("hand-counted ten-sample confusion matrix") {
  using enum Label;
  const std::vector<Label> actual{positive, positive, positive, positive, positive,
                                  negative, negative, negative, negative, negative};
  const std::vector<Label> predicted{positive, positive, positive, negative, positive,
                                     negative, positive, negative, negative, negative};
  const auto m = confusion(predicted, actual);
  CHECK(m == ConfusionMatrix{4, 1, 4, 1});
  CHECK(*m.sensitivity() == 0.8);
  CHECK(*m.specificity() == 0.8);
  CHECK(*m.accuracy() == 0.8);

  std::vector<std::size_t> order{9, 3, 0, 7, 1, 5, 2, 8, 4, 6};
  std::vector<Label> pa, pp;
  for (auto i : order) {
    pa.push_back(actual[i]);
    pp.push_back(predicted[i]);
  }
  CHECK(confusion(pp, pa) == m);
}

TEST_CASE("metrics report serialization") {
  MetricsReport empty;
  const auto j = empty.to_json();
  CHECK(j.at("dice").is_null());
  CHECK(j.at("sensitivity").is_null());
  CHECK(empty.confusion_csv() == "actual,predicted_positive,predicted_negative\n");

  MetricsReport r;
  r.samples = 10;
  r.confusion = ConfusionMatrix{4, 1, 4, 1};
  r.dice = 0.75;
  const auto k = r.to_json();
  CHECK(k.at("tp") == 4);
  CHECK(k.at("accuracy") == 0.8);
  CHECK(k.at("dice") == 0.75);
  CHECK(r.confusion_csv() == "actual,predicted_positive,predicted_negative\nPositive,4,1\nNegative,1,4\n");
}
