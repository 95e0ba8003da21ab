#include <benchmark/benchmark.h>

#include "catunet/model.hpp"
#include "catunet/ops.hpp"

using namespace catunet;

namespace {

CatUNetModel make_model(int size, int depth) {
  CatUNetConfig config;
  config.input_size = size;
  config.depth = depth;
  Rng init(7, Stream::init);
  return CatUNetModel::build(config, init);
}

Tensor make_batch(std::size_t n, int size) {
  const auto s = static_cast<std::size_t>(size);
  Tensor batch(Shape{n, 1, s, s});
  Rng rng(8, Stream::synthesis);
  for (auto& v : batch.values()) v = static_cast<float>(rng.uniform());
  return batch;
}

// Args: image size, depth.
void BM_ModelInfer(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const CatUNetModel model = make_model(size, static_cast<int>(state.range(1)));
  const Tensor batch = make_batch(1, size);
  for (auto _ : state) benchmark::DoNotOptimize(model.infer(batch));
}
BENCHMARK(BM_ModelInfer)->Args({64, 2})->Args({64, 3})->Args({128, 3})->Unit(benchmark::kMillisecond);

// One training step without the parameter update: forward, loss, backward.
void BM_ModelTrainStep(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  CatUNetModel model = make_model(size, static_cast<int>(state.range(1)));
  const Tensor batch = make_batch(8, size);
  Rng dropout(9, Stream::dropout);
  for (auto _ : state) {
    Graph graph;
    const NodeId input = graph.constant(batch);
    const ForwardTrace trace = model.forward(graph, input, {.training = true, .track_gradients = true, .rng = &dropout});
    const NodeId loss = ops::mse(graph, trace.output, input);
    graph.backward(loss);
    model.zero_gradients();
    model.accumulate_gradients(graph, trace);
  }
}
BENCHMARK(BM_ModelTrainStep)->Args({32, 2})->Args({64, 2})->Unit(benchmark::kMillisecond);

}  // namespace
