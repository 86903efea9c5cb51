#include "pcup/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>

#include "pcup/tensor.hpp"

namespace pcup {

namespace {

constexpr std::size_t kUnassigned = std::numeric_limits<std::size_t>::max();

void validate_square(const CostMatrix& cost, const char* who) {
  if (cost.rows != cost.cols) {
    throw ContractViolation(std::string(who) + ": cost matrix must be square, got " +
                            std::to_string(cost.rows) + "x" + std::to_string(cost.cols));
  }
  if (cost.values.size() != cost.rows * cost.cols) {
    throw ContractViolation(std::string(who) + ": cost matrix storage has wrong length");
  }
  for (const double v : cost.values) {
    if (!std::isfinite(v)) throw ContractViolation(std::string(who) + ": non-finite cost");
  }
}

}  // namespace

double assignment_cost(const CostMatrix& cost, const std::vector<std::size_t>& target) {
  double total = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) total += cost(i, target[i]);
  return total;
}

bool is_permutation(const std::vector<std::size_t>& target) {
  std::vector<bool> seen(target.size(), false);
  for (const std::size_t t : target) {
    if (t >= target.size() || seen[t]) return false;
    seen[t] = true;
  }
  return true;
}

AssignmentResult hungarian_assign(const CostMatrix& cost) {
  validate_square(cost, "hungarian_assign");
  const std::size_t n = cost.rows;
  AssignmentResult result;
  if (n == 0) return result;

  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based potentials; column 0 is the virtual source.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  std::vector<double> min_slack(n + 1);
  std::vector<char> used(n + 1);

  for (std::size_t row = 1; row <= n; ++row) {
    match[0] = row;
    std::size_t col0 = 0;
    std::fill(min_slack.begin(), min_slack.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[col0] = 1;
      const std::size_t row0 = match[col0];
      double delta = kInf;
      std::size_t col1 = 0;
      for (std::size_t col = 1; col <= n; ++col) {
        if (used[col]) continue;
        const double slack = cost(row0 - 1, col - 1) - u[row0] - v[col];
        if (slack < min_slack[col]) {
          min_slack[col] = slack;
          way[col] = col0;
        }
        if (min_slack[col] < delta) {
          delta = min_slack[col];
          col1 = col;
        }
      }
      for (std::size_t col = 0; col <= n; ++col) {
        if (used[col]) {
          u[match[col]] += delta;
          v[col] -= delta;
        } else {
          min_slack[col] -= delta;
        }
      }
      col0 = col1;
    } while (match[col0] != 0);
    do {
      const std::size_t col1 = way[col0];
      match[col0] = match[col1];
      col0 = col1;
    } while (col0 != 0);
  }

  result.target.assign(n, 0);
  for (std::size_t col = 1; col <= n; ++col) result.target[match[col] - 1] = col - 1;
  result.cost = assignment_cost(cost, result.target);
  return result;
}

AssignmentResult auction_assign(const CostMatrix& cost, const AuctionOptions& options) {
  validate_square(cost, "auction_assign");
  const std::size_t n = cost.rows;
  AssignmentResult result;
  if (n == 0) return result;
  if (n == 1) {
    result.target = {0};
    result.cost = cost(0, 0);
    return result;
  }

  const double max_cost = *std::max_element(cost.values.begin(), cost.values.end());
  const double min_cost = *std::min_element(cost.values.begin(), cost.values.end());
  double row_bound = 0.0;
  std::vector<double> col_min(n, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) {
    double row_min = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      row_min = std::min(row_min, cost(i, j));
      col_min[j] = std::min(col_min[j], cost(i, j));
    }
    row_bound += row_min;
  }
  double col_bound = 0.0;
  for (const double c : col_min) col_bound += c;
  const double lower_bound = std::max(row_bound, col_bound);
  const double range = max_cost - min_cost;
  if (range == 0.0) {
    for (std::size_t i = 0; i < n; ++i) result.target.push_back(i);
    result.cost = assignment_cost(cost, result.target);
    return result;
  }

  const double eps_final =
      std::max({options.relative_gap * lower_bound / static_cast<double>(n),
                options.min_epsilon_fraction * std::max(std::abs(max_cost), range),
                std::numeric_limits<double>::min()});
  double eps = std::max(range / 4.0, eps_final);

  std::vector<double> price(n, 0.0);
  std::vector<std::size_t> owner(n), assigned(n);
  std::deque<std::size_t> queue;
  while (true) {
    std::fill(owner.begin(), owner.end(), kUnassigned);
    std::fill(assigned.begin(), assigned.end(), kUnassigned);
    queue.clear();
    for (std::size_t i = 0; i < n; ++i) queue.push_back(i);
    while (!queue.empty()) {
      const std::size_t bidder = queue.front();
      queue.pop_front();
      double best = -std::numeric_limits<double>::infinity();
      double second = best;
      std::size_t best_j = 0;
      const double* row = cost.values.data() + bidder * n;
      for (std::size_t j = 0; j < n; ++j) {
        const double value = -row[j] - price[j];
        if (value > best) {
          second = best;
          best = value;
          best_j = j;
        } else if (value > second) {
          second = value;
        }
      }
      price[best_j] += (best - second) + eps;
      if (owner[best_j] != kUnassigned) {
        assigned[owner[best_j]] = kUnassigned;
        queue.push_back(owner[best_j]);
      }
      owner[best_j] = bidder;
      assigned[bidder] = best_j;
    }
    if (eps <= eps_final) break;
    eps = std::max(eps / options.scaling_factor, eps_final);
  }

  result.target = std::move(assigned);
  result.cost = assignment_cost(cost, result.target);
  return result;
}

}  // namespace pcup
