#pragma once

// Point-set distances used for training losses and evaluation reports.
//
// All distances are accumulated in double from float coordinates. Nearest
// neighbour search is exact: brute force for small reference sets, a uniform
// grid above kGridThreshold points. Both paths return the lowest-index
// nearest point, so results are identical.

#include <cstddef>
#include <string>
#include <vector>

#include "pcup/assignment.hpp"
#include "pcup/point_cloud.hpp"

namespace pcup {

inline constexpr std::size_t kGridThreshold = 4096;
inline constexpr std::size_t kExactEmdCap = 512;

struct NearestNeighbors {
  std::vector<std::size_t> index;
  std::vector<double> sq_dist;
};

enum class NeighborSearch { kAuto, kBruteForce, kGrid };

double squared_distance(const Point3& a, const Point3& b);

/// For every query point, its nearest reference point.
NearestNeighbors nearest_neighbors(const PointCloud& query, const PointCloud& reference,
                                   NeighborSearch method = NeighborSearch::kAuto);

struct ChamferResult {
  double sum_form = 0.0;   // sum of both directed squared-NN sums
  double mean_form = 0.0;  // each directed sum divided by its set size
};

ChamferResult chamfer(const PointCloud& x, const PointCloud& y);

/// Symmetric Hausdorff distance with the Euclidean norm.
double hausdorff(const PointCloud& x, const PointCloud& y);

/// Squared distance from every predicted point to its nearest ground-truth
/// point.
std::vector<double> pc2pc_error(const PointCloud& pred, const PointCloud& gt);

enum class EmdMode { kExact, kApprox };

std::string to_string(EmdMode mode);
EmdMode emd_mode_from_string(const std::string& text);

/// Euclidean (non-squared) distance matrix between equal-size clouds.
CostMatrix euclidean_cost(const PointCloud& x, const PointCloud& y);

/// Optimal (exact) or auction (approx) bijection between x and y.
AssignmentResult emd_assignment(const PointCloud& x, const PointCloud& y, EmdMode mode,
                                const AuctionOptions& auction = {});

/// min over bijections of the summed Euclidean distances. Requires equal
/// sizes; exact mode is limited to kExactEmdCap points.
double emd(const PointCloud& x, const PointCloud& y, EmdMode mode,
           const AuctionOptions& auction = {});

}  // namespace pcup
