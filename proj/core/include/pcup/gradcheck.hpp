#pragma once

// Central finite-difference gradient checking.
//
// The checker only ever evaluates the forward function; it never touches
// the backward kernels it is verifying. Outputs are scalarised with a fixed
// random weighting so every output element is exercised.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pcup/tensor.hpp"

namespace pcup {

struct GradCheckOptions {
  double step = 1e-3;
  double tolerance = 1e-4;
  // Denominator floor for the element-wise relative error.
  double floor = 1e-3;
  std::uint64_t weight_seed = 7;
};

struct GradCheckResult {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t elements = 0;
  bool passed = false;
};

/// Element-wise error |a - n| / max(|a|, |n|, floor).
double relative_error(double analytic, double numeric, double floor);

/// Checks d(sum(w * f(inputs)))/d(inputs) against central differences for
/// every element of every input.
GradCheckResult check_gradients(
    const std::string& name,
    const std::function<TensorD(const std::vector<TensorD>&)>& fn,
    std::vector<TensorD> inputs, const GradCheckOptions& options = {});

/// Check for float networks. `loss` re-runs the forward pass reading the
/// current values of `params`. Up to `samples_per_param` random elements of
/// each parameter are perturbed in place; the error is the norm-relative
/// difference ||a - n|| / max(||a||, ||n||, floor) over all sampled elements.
GradCheckResult check_sampled_gradients(const std::string& name, const std::function<Tensor()>& loss,
                                        std::vector<Tensor> params, std::size_t samples_per_param,
                                        const GradCheckOptions& options);

/// One registered kernel with a randomised input generator.
struct OpGradCase {
  std::string name;
  std::function<std::vector<TensorD>(std::uint64_t seed)> make_inputs;
  std::function<TensorD(const std::vector<TensorD>&)> fn;
};

/// Every differentiable op of the tensor engine, each with a generator that
/// draws a random shape per seed and keeps inputs away from kinks and
/// singularities by more than the finite-difference step.
const std::vector<OpGradCase>& op_grad_cases();

struct OpSuiteReport {
  std::vector<GradCheckResult> per_op;  // worst seed per op
  std::size_t checks = 0;
  bool passed = true;
};

OpSuiteReport run_op_grad_suite(std::size_t seeds_per_op, const GradCheckOptions& options = {});

}  // namespace pcup
