#include <benchmark/benchmark.h>

#include "catunet/kernels.hpp"
#include "catunet/rng.hpp"

using namespace catunet;

namespace {

Tensor random_tensor(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

// Args: spatial size, input channels, output channels.
void BM_Conv2dForward(benchmark::State& state) {
  const auto size = static_cast<std::size_t>(state.range(0));
  const auto cin = static_cast<std::size_t>(state.range(1));
  const auto cout = static_cast<std::size_t>(state.range(2));
  Rng rng(1, Stream::init);
  const Tensor x = random_tensor(Shape{4, cin, size, size}, rng);
  const Tensor w = random_tensor(Shape{cout, cin, 3, 3}, rng);
  const Tensor b = random_tensor(Shape{cout}, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::conv2d_forward(x, w, b, {.stride = 1, .padding = 1}));
  }
  state.SetItemsProcessed(state.iterations() * 4 * static_cast<std::int64_t>(size * size * cin * cout * 9));
}
BENCHMARK(BM_Conv2dForward)->Args({64, 1, 16})->Args({64, 16, 16})->Args({32, 32, 32})->Args({16, 64, 64})
    ->Unit(benchmark::kMillisecond);

void BM_Conv2dBackward(benchmark::State& state) {
  const auto size = static_cast<std::size_t>(state.range(0));
  const auto cin = static_cast<std::size_t>(state.range(1));
  const auto cout = static_cast<std::size_t>(state.range(2));
  Rng rng(2, Stream::init);
  const Tensor x = random_tensor(Shape{4, cin, size, size}, rng);
  const Tensor w = random_tensor(Shape{cout, cin, 3, 3}, rng);
  const Tensor g = random_tensor(Shape{4, cout, size, size}, rng);
  Tensor gx(x.shape()), gw(w.shape()), gb(Shape{cout});
  for (auto _ : state) {
    kernels::conv2d_backward(x, w, g, {.stride = 1, .padding = 1}, gx.data(), gw.data(), gb.data());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * 4 * static_cast<std::int64_t>(size * size * cin * cout * 9));
}
BENCHMARK(BM_Conv2dBackward)->Args({64, 1, 16})->Args({64, 16, 16})->Args({32, 32, 32})->Args({16, 64, 64})
    ->Unit(benchmark::kMillisecond);

void BM_MaxPool(benchmark::State& state) {
  Rng rng(3, Stream::init);
  const Tensor x = random_tensor(Shape{4, 16, 64, 64}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::maxpool2d_forward(x, {}));
}
BENCHMARK(BM_MaxPool)->Unit(benchmark::kMicrosecond);

void BM_Upsample(benchmark::State& state) {
  Rng rng(4, Stream::init);
  const Tensor x = random_tensor(Shape{4, 32, 32, 32}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::upsample_nearest_forward(x, 2));
}
BENCHMARK(BM_Upsample)->Unit(benchmark::kMicrosecond);

}  // namespace
