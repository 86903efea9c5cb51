#pragma once

// Linear assignment on dense square cost matrices.

#include <cstddef>
#include <vector>

namespace pcup {

/// Dense row-major cost matrix.
struct CostMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

/// `target[i]` is the column matched to row i.
struct AssignmentResult {
  std::vector<std::size_t> target;
  double cost = 0.0;
};

/// Sum of the matched entries, accumulated in row order.
double assignment_cost(const CostMatrix& cost, const std::vector<std::size_t>& target);

bool is_permutation(const std::vector<std::size_t>& target);

/// Exact minimum-cost bijection (shortest augmenting paths with potentials,
/// O(n^3)). Throws ContractViolation on non-square or non-finite input.
AssignmentResult hungarian_assign(const CostMatrix& cost);

struct AuctionOptions {
  // Target relative suboptimality. The final epsilon is chosen so that
  // n * epsilon <= relative_gap * (a lower bound on the optimum).
  double relative_gap = 0.01;
  // Divisor applied to epsilon between scaling phases.
  double scaling_factor = 5.0;
  // Absolute floor on epsilon, as a fraction of the largest cost.
  double min_epsilon_fraction = 1e-9;
};

/// Forward auction with epsilon scaling. The result is a bijection whose
/// cost is within n * epsilon_final of the optimum, hence never below it.
AssignmentResult auction_assign(const CostMatrix& cost, const AuctionOptions& options = {});

}  // namespace pcup
