#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "catunet/autodiff.hpp"
#include "catunet/rng.hpp"

namespace catunet {

/// Builds an operation under test from leaf ids that correspond, in order, to
/// the tensors handed to grad_check. May return a non-scalar node.
using GradCheckBuilder = std::function<NodeId(Graph&, std::span<const NodeId>)>;

struct GradCheckOptions {
  double step = 1e-3;
  /// Multiplies the analytic gradient before comparison. Only the negative
  /// control in the check suite changes it.
  double analytic_scale = 1.0;
};

struct GradCheckResult {
  /// Max over checked tensors of ||analytic - numeric|| / max(1e-8, ||analytic|| + ||numeric||).
  double max_relative_error = 0.0;
  std::size_t probes = 0;
  std::vector<double> per_tensor;
};

/// Compares reverse-mode gradients against central finite differences.
///
/// Non-scalar outputs are reduced with fixed random weights drawn from `rng`,
/// so every output element participates. The reduction and the difference
/// quotients are evaluated in double precision.
GradCheckResult grad_check(const GradCheckBuilder& build, std::vector<Tensor> inputs, Rng& rng,
                           const GradCheckOptions& options = {});

/// Checks the gradient of mse(build(inputs), target). The analytic side runs
/// through the mse node; the numeric side recomputes the loss in double from
/// the prediction, so float rounding of the scalar loss does not enter.
GradCheckResult grad_check_mse(const GradCheckBuilder& build, std::vector<Tensor> inputs, const Tensor& target,
                               const GradCheckOptions& options = {});

struct GradCheckCase {
  std::string name;
  double max_relative_error = 0.0;
  double tolerance = 0.0;
  bool passed() const { return max_relative_error < tolerance; }
};

struct GradCheckSuiteOptions {
  std::uint64_t seed = 0;
  /// Name of a case whose analytic gradient is deliberately corrupted.
  std::optional<std::string> fault;
};

/// Every differentiable primitive plus a tiny full model (depth 1, base 2,
/// 8x8 input, dropout off).
std::vector<GradCheckCase> run_gradcheck_suite(const GradCheckSuiteOptions& options);

}  // namespace catunet
