#include "pcup/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "pcup/ops.hpp"
#include "pcup/rng.hpp"

namespace pcup {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

namespace {

double weighted_sum(const TensorD& y, const std::vector<double>& w) {
  double acc = 0.0;
  const auto yd = y.data();
  for (std::size_t i = 0; i < yd.size(); ++i) acc += yd[i] * w[i];
  return acc;
}

}  // namespace

GradCheckResult check_gradients(const std::string& name,
                                const std::function<TensorD(const std::vector<TensorD>&)>& fn,
                                std::vector<TensorD> inputs, const GradCheckOptions& options) {
  GradCheckResult result;
  result.name = name;
  for (auto& in : inputs) {
    in.set_requires_grad(true);
    in.zero_grad();
  }

  const TensorD y = fn(inputs);
  Rng rng(options.weight_seed);
  std::vector<double> w(y.numel());
  for (auto& v : w) v = rng.uniform(-1.0, 1.0);
  const TensorD loss = reduce_sum(mul(y, TensorD(y.shape(), w)));
  backward(loss);

  NoGradGuard no_grad;
  for (auto& in : inputs) {
    const std::vector<double> analytic =
        in.has_grad() ? std::vector<double>(in.grad().begin(), in.grad().end())
                      : std::vector<double>(in.numel(), 0.0);
    auto data = in.data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double original = data[i];
      data[i] = original + options.step;
      const double plus = weighted_sum(fn(inputs), w);
      data[i] = original - options.step;
      const double minus = weighted_sum(fn(inputs), w);
      data[i] = original;
      const double numeric = (plus - minus) / (2.0 * options.step);
      result.max_rel_error =
          std::max(result.max_rel_error, relative_error(analytic[i], numeric, options.floor));
      ++result.elements;
    }
  }
  result.passed = result.max_rel_error < options.tolerance;
  return result;
}

GradCheckResult check_sampled_gradients(const std::string& name, const std::function<Tensor()>& loss,
                                        std::vector<Tensor> params, std::size_t samples_per_param,
                                        const GradCheckOptions& options) {
  GradCheckResult result;
  result.name = name;
  for (auto& p : params) p.zero_grad();
  const Tensor l = loss();
  if (l.numel() != 1) throw ContractViolation("check_sampled_gradients: loss must be a scalar");
  backward(l);

  NoGradGuard no_grad;
  Rng rng(options.weight_seed);
  double diff_sq = 0.0, analytic_sq = 0.0, numeric_sq = 0.0;
  for (auto& p : params) {
    const std::vector<float> grad =
        p.has_grad() ? std::vector<float>(p.grad().begin(), p.grad().end()) : std::vector<float>(p.numel(), 0.0f);
    auto data = p.data();
    std::vector<std::size_t> picks;
    if (samples_per_param >= data.size()) {
      for (std::size_t i = 0; i < data.size(); ++i) picks.push_back(i);
    } else {
      picks = rng.sample_without_replacement(data.size(), samples_per_param);
    }
    for (const std::size_t i : picks) {
      const float original = data[i];
      data[i] = static_cast<float>(original + options.step);
      const double up = static_cast<double>(data[i]) - original;
      const double plus = loss().item();
      data[i] = static_cast<float>(original - options.step);
      const double down = original - static_cast<double>(data[i]);
      const double minus = loss().item();
      data[i] = original;
      const double numeric = (plus - minus) / (up + down);
      diff_sq += (numeric - grad[i]) * (numeric - grad[i]);
      analytic_sq += static_cast<double>(grad[i]) * grad[i];
      numeric_sq += numeric * numeric;
      ++result.elements;
    }
  }
  const double denom = std::max({std::sqrt(analytic_sq), std::sqrt(numeric_sq), options.floor});
  result.max_rel_error = std::sqrt(diff_sq) / denom;
  result.passed = result.max_rel_error < options.tolerance;
  return result;
}

namespace {

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); }

TensorD uniform_tensor(Rng& rng, Shape shape, double lo, double hi) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return TensorD(std::move(shape), std::move(v));
}

// Values with magnitude in [min_abs, max_abs] and random sign.
TensorD signed_tensor(Rng& rng, Shape shape, double min_abs, double max_abs) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) {
    x = rng.uniform(min_abs, max_abs);
    if (rng.uniform() < 0.5) x = -x;
  }
  return TensorD(std::move(shape), std::move(v));
}

// Distinct values separated by at least 0.05, randomly ordered.
TensorD distinct_tensor(Rng& rng, Shape shape) {
  const std::size_t n = shape_numel(shape);
  const auto order = rng.permutation(n);
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = -1.0 + 0.1 * static_cast<double>(order[i]) + rng.uniform(0.0, 0.04);
  }
  return TensorD(std::move(shape), std::move(v));
}

Shape matrix_shape(Rng& rng) { return {pick(rng, 1, 5), pick(rng, 1, 5)}; }
Shape cube_shape(Rng& rng) { return {pick(rng, 1, 4), pick(rng, 1, 4), pick(rng, 1, 4)}; }

// Right-hand operand in one of the three broadcast modes, chosen by seed.
TensorD rhs_for(Rng& rng, const Shape& lhs, std::uint64_t seed, double lo, double hi,
                bool away_from_zero) {
  Shape shape;
  switch (seed % 3) {
    case 0: shape = lhs; break;
    case 1: shape = {}; break;
    default: shape = {lhs.back()}; break;
  }
  return away_from_zero ? signed_tensor(rng, shape, lo, hi) : uniform_tensor(rng, shape, lo, hi);
}

std::vector<OpGradCase> build_cases() {
  std::vector<OpGradCase> cases;
  auto add_case = [&](std::string name, auto make, auto fn) {
    cases.push_back({std::move(name), make, fn});
  };

  add_case(
      "matmul",
      [](std::uint64_t s) {
        Rng r(s);
        const std::size_t m = pick(r, 1, 6), k = pick(r, 1, 6), n = pick(r, 1, 6);
        return std::vector{uniform_tensor(r, {m, k}, -1, 1), uniform_tensor(r, {k, n}, -1, 1)};
      },
      [](const std::vector<TensorD>& in) { return matmul(in[0], in[1]); });

  const auto binary_inputs = [](bool nonzero_rhs) {
    return [nonzero_rhs](std::uint64_t s) {
      Rng r(s);
      const Shape lhs = matrix_shape(r);
      auto a = uniform_tensor(r, lhs, -1, 1);
      auto b = nonzero_rhs ? rhs_for(r, lhs, s, 0.5, 2.0, true)
                           : rhs_for(r, lhs, s, -1.0, 1.0, false);
      return std::vector{a, b};
    };
  };
  add_case("add", binary_inputs(false),
           [](const std::vector<TensorD>& in) { return add(in[0], in[1]); });
  add_case("sub", binary_inputs(false),
           [](const std::vector<TensorD>& in) { return sub(in[0], in[1]); });
  add_case("mul", binary_inputs(false),
           [](const std::vector<TensorD>& in) { return mul(in[0], in[1]); });
  add_case("div", binary_inputs(true),
           [](const std::vector<TensorD>& in) { return div(in[0], in[1]); });

  const auto one_matrix = [](double lo, double hi) {
    return [lo, hi](std::uint64_t s) {
      Rng r(s);
      return std::vector{uniform_tensor(r, matrix_shape(r), lo, hi)};
    };
  };
  const auto one_cube = [](double lo, double hi) {
    return [lo, hi](std::uint64_t s) {
      Rng r(s);
      return std::vector{uniform_tensor(r, cube_shape(r), lo, hi)};
    };
  };

  add_case("add_scalar", one_matrix(-1, 1),
           [](const std::vector<TensorD>& in) { return add_scalar(in[0], 0.7); });
  add_case("mul_scalar", one_matrix(-1, 1),
           [](const std::vector<TensorD>& in) { return mul_scalar(in[0], -1.3); });
  add_case("neg", one_matrix(-1, 1), [](const std::vector<TensorD>& in) { return neg(in[0]); });

  for (std::size_t axis = 0; axis < 3; ++axis) {
    add_case(
        "concat_axis" + std::to_string(axis),
        [axis](std::uint64_t s) {
          Rng r(s);
          const Shape base = cube_shape(r);
          std::vector<TensorD> parts;
          const std::size_t count = pick(r, 2, 3);
          for (std::size_t i = 0; i < count; ++i) {
            Shape shape = base;
            shape[axis] = pick(r, 1, 3);
            parts.push_back(uniform_tensor(r, shape, -1, 1));
          }
          return parts;
        },
        [axis](const std::vector<TensorD>& in) { return concat(in, axis); });
  }

  add_case(
      "gather_rows",
      [](std::uint64_t s) {
        Rng r(s);
        return std::vector{uniform_tensor(r, cube_shape(r), -1, 1)};
      },
      [](const std::vector<TensorD>& in) {
        const std::size_t n = in[0].dim(0);
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < 2 * n + 1; ++i) idx.push_back((i * 7 + 3) % n);
        return gather_rows(in[0], idx);
      });

  add_case("reshape", one_cube(-1, 1), [](const std::vector<TensorD>& in) {
    return reshape(in[0], Shape{in[0].numel()});
  });
  add_case("transpose", one_matrix(-1, 1),
           [](const std::vector<TensorD>& in) { return transpose(in[0]); });

  add_case("reduce_sum_all", one_cube(-1, 1),
           [](const std::vector<TensorD>& in) { return reduce_sum(in[0]); });
  add_case("reduce_mean_all", one_cube(-1, 1),
           [](const std::vector<TensorD>& in) { return reduce_mean(in[0]); });
  for (std::size_t axis = 0; axis < 3; ++axis) {
    add_case("reduce_sum_axis" + std::to_string(axis), one_cube(-1, 1),
             [axis](const std::vector<TensorD>& in) { return reduce_sum(in[0], axis); });
    add_case("reduce_mean_axis" + std::to_string(axis), one_cube(-1, 1),
             [axis](const std::vector<TensorD>& in) { return reduce_mean(in[0], axis); });
    add_case(
        "reduce_max_axis" + std::to_string(axis),
        [](std::uint64_t s) {
          Rng r(s);
          return std::vector{distinct_tensor(r, cube_shape(r))};
        },
        [axis](const std::vector<TensorD>& in) { return reduce_max(in[0], axis); });
    add_case("softmax_axis" + std::to_string(axis), one_cube(-2, 2),
             [axis](const std::vector<TensorD>& in) { return softmax(in[0], axis); });
    add_case(
        "l2_norm_axis" + std::to_string(axis),
        [](std::uint64_t s) {
          Rng r(s);
          return std::vector{signed_tensor(r, cube_shape(r), 0.3, 1.0)};
        },
        [axis](const std::vector<TensorD>& in) { return l2_norm(in[0], axis); });
  }

  add_case(
      "leaky_relu",
      [](std::uint64_t s) {
        Rng r(s);
        return std::vector{signed_tensor(r, matrix_shape(r), 0.05, 1.0)};
      },
      [](const std::vector<TensorD>& in) { return leaky_relu(in[0]); });
  add_case("sigmoid", one_matrix(-3, 3),
           [](const std::vector<TensorD>& in) { return sigmoid(in[0]); });
  add_case("exp", one_matrix(-2, 2), [](const std::vector<TensorD>& in) { return exp(in[0]); });
  add_case("log", one_matrix(0.5, 3), [](const std::vector<TensorD>& in) { return log(in[0]); });
  add_case("square", one_matrix(-2, 2),
           [](const std::vector<TensorD>& in) { return square(in[0]); });
  add_case("sqrt", one_matrix(0.5, 3), [](const std::vector<TensorD>& in) { return sqrt(in[0]); });
  add_case(
      "l2_norm",
      [](std::uint64_t s) {
        Rng r(s);
        return std::vector{signed_tensor(r, cube_shape(r), 0.3, 1.0)};
      },
      [](const std::vector<TensorD>& in) { return l2_norm(in[0]); });

  add_case(
      "im2col",
      [](std::uint64_t s) {
        Rng r(s);
        const std::size_t h = pick(r, 3, 6), w = pick(r, 3, 6), c = pick(r, 1, 3);
        return std::vector{
            uniform_tensor(r, {h * w, c}, -1, 1),
            TensorD(Shape{2}, {static_cast<double>(h), static_cast<double>(w)})};
      },
      [](const std::vector<TensorD>& in) {
        // Geometry travels in the second input; its gradient is identically
        // zero and is checked as such.
        const auto h = static_cast<std::size_t>(std::lround(in[1].data()[0]));
        const auto w = static_cast<std::size_t>(std::lround(in[1].data()[1]));
        const std::size_t stride = 1 + (h + w) % 2;
        return im2col(in[0], h, w, 3, stride, 1);
      });

  return cases;
}

}  // namespace

const std::vector<OpGradCase>& op_grad_cases() {
  static const std::vector<OpGradCase> cases = build_cases();
  return cases;
}

OpSuiteReport run_op_grad_suite(std::size_t seeds_per_op, const GradCheckOptions& options) {
  OpSuiteReport report;
  for (const auto& c : op_grad_cases()) {
    GradCheckResult worst;
    worst.name = c.name;
    worst.passed = true;
    for (std::size_t s = 0; s < seeds_per_op; ++s) {
      const std::uint64_t seed = Rng::derive(0xC0FFEE, s);
      auto r = check_gradients(c.name, c.fn, c.make_inputs(seed), options);
      worst.elements += r.elements;
      worst.max_rel_error = std::max(worst.max_rel_error, r.max_rel_error);
      worst.passed = worst.passed && r.passed;
      ++report.checks;
    }
    report.passed = report.passed && worst.passed;
    report.per_op.push_back(worst);
  }
  return report;
}

}  // namespace pcup
