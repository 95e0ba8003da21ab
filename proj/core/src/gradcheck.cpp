#include "catunet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "catunet/errors.hpp"
#include "catunet/model.hpp"
#include "catunet/ops.hpp"

namespace catunet {
namespace {

double projected(const Tensor& output, const std::vector<float>& weights) {
  double total = 0.0;
  for (std::size_t i = 0; i < output.numel(); ++i) total += static_cast<double>(weights[i]) * output[i];
  return total;
}

double relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  double diff = 0.0, a_norm = 0.0, n_norm = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    a_norm += analytic[i] * analytic[i];
    n_norm += numeric[i] * numeric[i];
  }
  return std::sqrt(diff) / std::max(1e-8, std::sqrt(a_norm) + std::sqrt(n_norm));
}

// Central difference using the perturbation actually representable in float.
template <typename Eval>
double central_difference(float& slot, double step, Eval&& eval) {
  const float original = slot;
  slot = static_cast<float>(original + step);
  const double plus_at = slot;
  const double plus = eval();
  slot = static_cast<float>(original - step);
  const double minus_at = slot;
  const double minus = eval();
  slot = original;
  return (plus - minus) / (plus_at - minus_at);
}

Tensor random_tensor(Shape shape, Rng& rng, double lo, double hi) {
  Tensor t(std::move(shape));
  for (float& v : t.values()) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

// Values bounded away from zero so a finite-difference probe never crosses the ReLU kink.
Tensor away_from_zero(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (float& v : t.values()) {
    const double magnitude = rng.uniform(0.1, 1.0);
    v = static_cast<float>(rng.uniform() < 0.5 ? -magnitude : magnitude);
  }
  return t;
}

// Strictly distinct values separated by much more than the probe step.
Tensor distinct_values(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  std::vector<std::size_t> order(t.numel());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = 0.05f * static_cast<float>(order[i]) - 0.5f;
  return t;
}

double model_grad_check(CatUNetModel model, const Tensor& input, const Tensor& target, double step,
                        double analytic_scale) {
  Graph graph;
  const NodeId x = graph.frozen(input);
  const ForwardTrace trace = model.forward(graph, x, ForwardOptions{false, true, nullptr});
  const NodeId loss = ops::mse(graph, trace.output, graph.frozen(target));
  graph.backward(loss);
  model.zero_gradients();
  model.accumulate_gradients(graph, trace);

  auto eval = [&]() {
    const Tensor out = model.infer(input);
    double total = 0.0;
    for (std::size_t i = 0; i < out.numel(); ++i) {
      const double d = static_cast<double>(out[i]) - target[i];
      total += d * d;
    }
    return total / static_cast<double>(out.numel());
  };

  double worst = 0.0;
  for (auto& p : model.parameters()) {
    std::vector<double> analytic, numeric;
    const auto grad = p.value.grad();
    for (std::size_t i = 0; i < p.value.numel(); ++i) {
      analytic.push_back(analytic_scale * grad[i]);
      numeric.push_back(central_difference(p.value[i], step, eval));
    }
    worst = std::max(worst, relative_error(analytic, numeric));
  }
  return worst;
}

}  // namespace

GradCheckResult grad_check(const GradCheckBuilder& build, std::vector<Tensor> inputs, Rng& rng,
                           const GradCheckOptions& options) {
  auto evaluate = [&](bool want_gradients, std::vector<std::vector<double>>* gradients,
                      std::vector<float>* weights) -> double {
    Graph graph;
    std::vector<NodeId> leaves;
    for (const auto& t : inputs) leaves.push_back(graph.constant(t, want_gradients));
    const NodeId out = build(graph, leaves);
    const Tensor& value = graph.value(out);
    if (weights->empty()) {
      weights->resize(value.numel());
      for (float& w : *weights) w = static_cast<float>(rng.uniform(-1.0, 1.0));
    }
    if (!want_gradients) return projected(value, *weights);
    graph.backward(out, *weights);
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      std::vector<double> g(inputs[i].numel(), 0.0);
      if (graph.has_grad(leaves[i])) {
        const auto src = graph.grad(leaves[i]);
        for (std::size_t j = 0; j < g.size(); ++j) g[j] = options.analytic_scale * src[j];
      }
      gradients->push_back(std::move(g));
    }
    return projected(value, *weights);
  };

  std::vector<float> weights;
  std::vector<std::vector<double>> analytic;
  evaluate(true, &analytic, &weights);

  GradCheckResult result;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    std::vector<double> numeric;
    for (std::size_t j = 0; j < inputs[i].numel(); ++j) {
      numeric.push_back(
          central_difference(inputs[i][j], options.step, [&] { return evaluate(false, nullptr, &weights); }));
      ++result.probes;
    }
    const double err = relative_error(analytic[i], numeric);
    result.per_tensor.push_back(err);
    result.max_relative_error = std::max(result.max_relative_error, err);
  }
  return result;
}

GradCheckResult grad_check_mse(const GradCheckBuilder& build, std::vector<Tensor> inputs, const Tensor& target,
                               const GradCheckOptions& options) {
  auto prediction = [&](Graph& graph, bool want_gradients, std::vector<NodeId>& leaves) {
    for (const auto& t : inputs) leaves.push_back(graph.constant(t, want_gradients));
    return build(graph, leaves);
  };

  std::vector<std::vector<double>> analytic;
  {
    Graph graph;
    std::vector<NodeId> leaves;
    const NodeId pred = prediction(graph, true, leaves);
    graph.backward(ops::mse(graph, pred, graph.frozen(target)));
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      std::vector<double> g(inputs[i].numel(), 0.0);
      if (graph.has_grad(leaves[i])) {
        const auto src = graph.grad(leaves[i]);
        for (std::size_t j = 0; j < g.size(); ++j) g[j] = options.analytic_scale * src[j];
      }
      analytic.push_back(std::move(g));
    }
  }

  auto loss = [&]() {
    Graph graph;
    std::vector<NodeId> leaves;
    const Tensor& out = graph.value(prediction(graph, false, leaves));
    if (out.numel() != target.numel()) throw ShapeError("grad_check_mse: prediction and target sizes differ");
    double total = 0.0;
    for (std::size_t i = 0; i < out.numel(); ++i) {
      const double d = static_cast<double>(out[i]) - target[i];
      total += d * d;
    }
    return total / static_cast<double>(out.numel());
  };

  GradCheckResult result;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    std::vector<double> numeric;
    for (std::size_t j = 0; j < inputs[i].numel(); ++j) {
      numeric.push_back(central_difference(inputs[i][j], options.step, loss));
      ++result.probes;
    }
    const double err = relative_error(analytic[i], numeric);
    result.per_tensor.push_back(err);
    result.max_relative_error = std::max(result.max_relative_error, err);
  }
  return result;
}

std::vector<GradCheckCase> run_gradcheck_suite(const GradCheckSuiteOptions& options) {
  Rng rng(options.seed, Stream::gradcheck);
  std::vector<GradCheckCase> cases;
  auto run = [&](const std::string& name, double tolerance, const GradCheckBuilder& build,
                 std::vector<Tensor> inputs) {
    GradCheckOptions check;
    if (options.fault && *options.fault == name) check.analytic_scale = 1.5;
    const GradCheckResult r = grad_check(build, std::move(inputs), rng, check);
    cases.push_back(GradCheckCase{name, r.max_relative_error, tolerance});
  };

  run("conv2d", 1e-4,
      [](Graph& g, std::span<const NodeId> in) { return ops::conv2d(g, in[0], in[1], in[2], {1, 1}); },
      {random_tensor({1, 2, 4, 4}, rng, -1, 1), random_tensor({3, 2, 3, 3}, rng, -1, 1),
       random_tensor({3}, rng, -1, 1)});
  run("conv2d_strided", 1e-4,
      [](Graph& g, std::span<const NodeId> in) { return ops::conv2d(g, in[0], in[1], in[2], {2, 0}); },
      {random_tensor({2, 2, 5, 5}, rng, -1, 1), random_tensor({2, 2, 3, 3}, rng, -1, 1),
       random_tensor({2}, rng, -1, 1)});
  run("maxpool2d", 1e-4, [](Graph& g, std::span<const NodeId> in) { return ops::maxpool2d(g, in[0], {2, 2}); },
      {distinct_values({1, 2, 4, 4}, rng)});
  run("upsample_nearest", 1e-4,
      [](Graph& g, std::span<const NodeId> in) { return ops::upsample_nearest(g, in[0], 2); },
      {random_tensor({1, 2, 3, 3}, rng, -1, 1)});
  run("concat_channels", 1e-6,
      [](Graph& g, std::span<const NodeId> in) { return ops::concat_channels(g, in[0], in[1]); },
      {random_tensor({1, 2, 3, 3}, rng, -1, 1), random_tensor({1, 1, 3, 3}, rng, -1, 1)});
  run("relu", 1e-4, [](Graph& g, std::span<const NodeId> in) { return ops::relu(g, in[0]); },
      {away_from_zero({1, 2, 4, 4}, rng)});
  run("dropout", 1e-4,
      [](Graph& g, std::span<const NodeId> in) {
        Rng mask_rng(17, Stream::dropout);
        return ops::dropout(g, in[0], 0.5, true, mask_rng);
      },
      {random_tensor({1, 2, 4, 4}, rng, -1, 1)});
  run("mse", 1e-4, [](Graph& g, std::span<const NodeId> in) { return ops::mse(g, in[0], in[1]); },
      {random_tensor({1, 1, 4, 4}, rng, -1, 1), random_tensor({1, 1, 4, 4}, rng, -1, 1)});
  run("sum_squares", 1e-4, [](Graph& g, std::span<const NodeId> in) { return ops::sum_squares(g, in[0]); },
      {random_tensor({2, 3}, rng, -1, 1)});
  run("add", 1e-4, [](Graph& g, std::span<const NodeId> in) { return ops::add(g, in[0], in[1]); },
      {random_tensor({2, 3}, rng, -1, 1), random_tensor({2, 3}, rng, -1, 1)});
  run("scale", 1e-4, [](Graph& g, std::span<const NodeId> in) { return ops::scale(g, in[0], 0.7f); },
      {random_tensor({2, 3}, rng, -1, 1)});

  CatUNetConfig tiny;
  tiny.depth = 1;
  tiny.base_channels = 2;
  tiny.input_size = 8;
  tiny.dropout_rate = 0.0;
  Rng init = rng.split(Stream::init);
  const CatUNetModel model = CatUNetModel::build(tiny, init);
  const Tensor input = random_tensor({1, 1, 8, 8}, rng, 0, 1);
  const Tensor target = random_tensor({1, 1, 8, 8}, rng, 0, 1);
  const double scale = options.fault && *options.fault == "model" ? 1.5 : 1.0;
  cases.push_back(GradCheckCase{"model", model_grad_check(model, input, target, 1e-3, scale), 1e-3});
  return cases;
}

}  // namespace catunet
