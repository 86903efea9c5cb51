#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "pcup/point_cloud.hpp"

namespace pcup {

/// Greedy farthest-point order: `start`, then repeatedly the point whose
/// distance to the chosen set is largest (lowest index on ties).
std::vector<std::size_t> fps_indices(const PointCloud& cloud, std::size_t m, std::size_t start = 0);
PointCloud fps(const PointCloud& cloud, std::size_t m, std::size_t start = 0);

/// `n` distinct points drawn with a seeded stream, kept in input order.
/// n equal to the cloud size returns the cloud unchanged.
PointCloud random_subsample(const PointCloud& cloud, std::size_t n, std::uint64_t seed);

/// normalized = (p - center) / scale.
struct NormalizeTransform {
  std::array<double, 3> center{};
  double scale = 1.0;
};

struct Normalized {
  PointCloud cloud;
  NormalizeTransform transform;
};

/// Centroid to the origin and largest radius to 1. A cloud whose points
/// all coincide keeps scale 1.
Normalized normalize_unit_sphere(const PointCloud& cloud);
PointCloud apply_transform(const PointCloud& cloud, const NormalizeTransform& t);
PointCloud invert_transform(const PointCloud& cloud, const NormalizeTransform& t);

}  // namespace pcup
