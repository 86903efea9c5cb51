#include "pcup/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace pcup {

namespace {

void require_non_empty(const PointCloud& cloud, const char* who) {
  if (cloud.empty()) throw ContractViolation(std::string(who) + ": empty point cloud");
}

// Uniform bucket grid over the reference cloud's bounding box.
class BucketGrid {
 public:
  explicit BucketGrid(const PointCloud& ref) : ref_(ref) {
    lo_.fill(std::numeric_limits<double>::infinity());
    std::array<double, 3> hi;
    hi.fill(-std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < ref.size(); ++i) {
      const Point3 p = ref[i];
      for (int a = 0; a < 3; ++a) {
        lo_[a] = std::min(lo_[a], static_cast<double>(p[a]));
        hi[a] = std::max(hi[a], static_cast<double>(p[a]));
      }
    }
    const auto per_axis = static_cast<std::size_t>(
        std::max(1.0, std::ceil(std::cbrt(static_cast<double>(ref.size()) / 2.0))));
    for (int a = 0; a < 3; ++a) {
      const double extent = hi[a] - lo_[a];
      dims_[a] = extent > 0.0 ? per_axis : 1;
      size_[a] = extent > 0.0 ? extent / static_cast<double>(dims_[a]) : 1.0;
    }
    cells_.assign(dims_[0] * dims_[1] * dims_[2], {});
    for (std::size_t i = 0; i < ref.size(); ++i) {
      const auto c = cell_of(ref[i]);
      cells_[flat(c)].push_back(i);
    }
  }

  // Lowest-index nearest reference point to `q`.
  std::pair<std::size_t, double> nearest(const Point3& q) const {
    const auto home = cell_of(q);
    std::size_t best = std::numeric_limits<std::size_t>::max();
    double best_d = std::numeric_limits<double>::infinity();
    const std::size_t max_ring = std::max({dims_[0], dims_[1], dims_[2]});
    for (std::size_t ring = 0; ring <= max_ring; ++ring) {
      visit_ring(home, ring, [&](std::size_t cell) {
        for (const std::size_t j : cells_[cell]) {
          const double d = squared_distance(q, ref_[j]);
          if (d < best_d || (d == best_d && j < best)) {
            best_d = d;
            best = j;
          }
        }
      });
      // Every unvisited point lies outside the box of visited cells.
      double gap = std::numeric_limits<double>::infinity();
      bool covered = true;
      for (int a = 0; a < 3; ++a) {
        const auto lo_cell = static_cast<std::ptrdiff_t>(home[a]) - static_cast<std::ptrdiff_t>(ring);
        const auto hi_cell = home[a] + ring;
        if (lo_cell > 0) {
          covered = false;
          gap = std::min(gap, static_cast<double>(q[a]) -
                                  (lo_[a] + static_cast<double>(lo_cell) * size_[a]));
        }
        if (hi_cell + 1 < dims_[a]) {
          covered = false;
          gap = std::min(gap, (lo_[a] + static_cast<double>(hi_cell + 1) * size_[a]) -
                                  static_cast<double>(q[a]));
        }
      }
      if (covered) break;
      // Margin absorbs rounding in the cell assignment.
      gap -= 1e-9 * (1.0 + std::abs(gap));
      if (gap > 0.0 && gap * gap > best_d) break;
    }
    return {best, best_d};
  }

 private:
  std::array<std::size_t, 3> cell_of(const Point3& p) const {
    std::array<std::size_t, 3> c{};
    for (int a = 0; a < 3; ++a) {
      const double t = std::floor((static_cast<double>(p[a]) - lo_[a]) / size_[a]);
      const double clamped = std::clamp(t, 0.0, static_cast<double>(dims_[a] - 1));
      c[a] = static_cast<std::size_t>(clamped);
    }
    return c;
  }

  std::size_t flat(const std::array<std::size_t, 3>& c) const {
    return (c[0] * dims_[1] + c[1]) * dims_[2] + c[2];
  }

  template <class Fn>
  void visit_ring(const std::array<std::size_t, 3>& home, std::size_t ring, Fn&& fn) const {
    const auto r = static_cast<std::ptrdiff_t>(ring);
    std::array<std::ptrdiff_t, 3> lo{}, hi{};
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(home[a]) - r);
      hi[a] = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(dims_[a]) - 1,
                                       static_cast<std::ptrdiff_t>(home[a]) + r);
    }
    for (std::ptrdiff_t x = lo[0]; x <= hi[0]; ++x) {
      for (std::ptrdiff_t y = lo[1]; y <= hi[1]; ++y) {
        for (std::ptrdiff_t z = lo[2]; z <= hi[2]; ++z) {
          const std::ptrdiff_t cheb =
              std::max({std::abs(x - static_cast<std::ptrdiff_t>(home[0])),
                        std::abs(y - static_cast<std::ptrdiff_t>(home[1])),
                        std::abs(z - static_cast<std::ptrdiff_t>(home[2]))});
          if (cheb != r) continue;
          fn(flat({static_cast<std::size_t>(x), static_cast<std::size_t>(y),
                   static_cast<std::size_t>(z)}));
        }
      }
    }
  }

  const PointCloud& ref_;
  std::array<double, 3> lo_{};
  std::array<double, 3> size_{};
  std::array<std::size_t, 3> dims_{};
  std::vector<std::vector<std::size_t>> cells_;
};

}  // namespace

double squared_distance(const Point3& a, const Point3& b) {
  const double dx = static_cast<double>(a[0]) - static_cast<double>(b[0]);
  const double dy = static_cast<double>(a[1]) - static_cast<double>(b[1]);
  const double dz = static_cast<double>(a[2]) - static_cast<double>(b[2]);
  return dx * dx + dy * dy + dz * dz;
}

NearestNeighbors nearest_neighbors(const PointCloud& query, const PointCloud& reference,
                                   NeighborSearch method) {
  require_non_empty(query, "nearest_neighbors");
  require_non_empty(reference, "nearest_neighbors");
  if (method == NeighborSearch::kAuto) {
    method = reference.size() > kGridThreshold ? NeighborSearch::kGrid : NeighborSearch::kBruteForce;
  }
  NearestNeighbors nn;
  nn.index.resize(query.size());
  nn.sq_dist.resize(query.size());
  if (method == NeighborSearch::kBruteForce) {
    for (std::size_t i = 0; i < query.size(); ++i) {
      const Point3 q = query[i];
      std::size_t best = 0;
      double best_d = squared_distance(q, reference[0]);
      for (std::size_t j = 1; j < reference.size(); ++j) {
        const double d = squared_distance(q, reference[j]);
        if (d < best_d) {
          best_d = d;
          best = j;
        }
      }
      nn.index[i] = best;
      nn.sq_dist[i] = best_d;
    }
    return nn;
  }
  const BucketGrid grid(reference);
  for (std::size_t i = 0; i < query.size(); ++i) {
    const auto [j, d] = grid.nearest(query[i]);
    nn.index[i] = j;
    nn.sq_dist[i] = d;
  }
  return nn;
}

ChamferResult chamfer(const PointCloud& x, const PointCloud& y) {
  require_non_empty(x, "chamfer");
  require_non_empty(y, "chamfer");
  const auto xy = nearest_neighbors(x, y);
  const auto yx = nearest_neighbors(y, x);
  double forward = 0.0;
  for (const double d : xy.sq_dist) forward += d;
  double backward = 0.0;
  for (const double d : yx.sq_dist) backward += d;
  ChamferResult r;
  r.sum_form = forward + backward;
  r.mean_form = forward / static_cast<double>(x.size()) + backward / static_cast<double>(y.size());
  return r;
}

double hausdorff(const PointCloud& x, const PointCloud& y) {
  require_non_empty(x, "hausdorff");
  require_non_empty(y, "hausdorff");
  const auto xy = nearest_neighbors(x, y);
  const auto yx = nearest_neighbors(y, x);
  const double a = *std::max_element(xy.sq_dist.begin(), xy.sq_dist.end());
  const double b = *std::max_element(yx.sq_dist.begin(), yx.sq_dist.end());
  return std::sqrt(std::max(a, b));
}

std::vector<double> pc2pc_error(const PointCloud& pred, const PointCloud& gt) {
  require_non_empty(pred, "pc2pc_error");
  require_non_empty(gt, "pc2pc_error");
  return nearest_neighbors(pred, gt).sq_dist;
}

std::string to_string(EmdMode mode) { return mode == EmdMode::kExact ? "exact" : "approx"; }

EmdMode emd_mode_from_string(const std::string& text) {
  if (text == "exact") return EmdMode::kExact;
  if (text == "approx") return EmdMode::kApprox;
  throw ContractViolation("unknown EMD mode '" + text + "' (expected exact or approx)");
}

CostMatrix euclidean_cost(const PointCloud& x, const PointCloud& y) {
  CostMatrix c;
  c.rows = x.size();
  c.cols = y.size();
  c.values.resize(c.rows * c.cols);
  for (std::size_t i = 0; i < c.rows; ++i) {
    const Point3 p = x[i];
    for (std::size_t j = 0; j < c.cols; ++j) {
      c.values[i * c.cols + j] = std::sqrt(squared_distance(p, y[j]));
    }
  }
  return c;
}

AssignmentResult emd_assignment(const PointCloud& x, const PointCloud& y, EmdMode mode,
                                const AuctionOptions& auction) {
  require_non_empty(x, "emd");
  require_non_empty(y, "emd");
  if (x.size() != y.size()) {
    throw ContractViolation("emd: clouds must have equal sizes, got " + std::to_string(x.size()) +
                            " and " + std::to_string(y.size()));
  }
  if (mode == EmdMode::kExact && x.size() > kExactEmdCap) {
    throw ContractViolation("emd: exact mode is limited to " + std::to_string(kExactEmdCap) +
                            " points (got " + std::to_string(x.size()) +
                            "); use approx mode or subsample");
  }
  const CostMatrix cost = euclidean_cost(x, y);
  return mode == EmdMode::kExact ? hungarian_assign(cost) : auction_assign(cost, auction);
}

double emd(const PointCloud& x, const PointCloud& y, EmdMode mode, const AuctionOptions& auction) {
  return emd_assignment(x, y, mode, auction).cost;
}

}  // namespace pcup
