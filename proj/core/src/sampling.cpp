#include "pcup/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pcup/metrics.hpp"
#include "pcup/rng.hpp"

namespace pcup {

std::vector<std::size_t> fps_indices(const PointCloud& cloud, std::size_t m, std::size_t start) {
  const std::size_t n = cloud.size();
  if (m < 1 || m > n) {
    throw ContractViolation("fps: requested " + std::to_string(m) + " points from a cloud of " +
                            std::to_string(n));
  }
  if (start >= n) throw ContractViolation("fps: start index out of range");
  std::vector<std::size_t> chosen;
  chosen.reserve(m);
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::size_t current = start;
  for (std::size_t k = 0; k < m; ++k) {
    chosen.push_back(current);
    const Point3 c = cloud[current];
    std::size_t next = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      dist[i] = std::min(dist[i], squared_distance(cloud[i], c));
      if (dist[i] > best) {
        best = dist[i];
        next = i;
      }
    }
    current = next;
  }
  return chosen;
}

PointCloud fps(const PointCloud& cloud, std::size_t m, std::size_t start) {
  return cloud.select(fps_indices(cloud, m, start));
}

PointCloud random_subsample(const PointCloud& cloud, std::size_t n, std::uint64_t seed) {
  if (n < 1 || n > cloud.size()) {
    throw ContractViolation("subsample size " + std::to_string(n) + " must be in [1, " +
                            std::to_string(cloud.size()) + "]");
  }
  if (n == cloud.size()) return cloud;
  Rng rng(seed);
  auto idx = rng.sample_without_replacement(cloud.size(), n);
  std::sort(idx.begin(), idx.end());
  return cloud.select(idx);
}

Normalized normalize_unit_sphere(const PointCloud& cloud) {
  if (cloud.empty()) throw ContractViolation("normalize_unit_sphere: empty point cloud");
  NormalizeTransform t;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point3 p = cloud[i];
    for (int a = 0; a < 3; ++a) t.center[a] += p[a];
  }
  for (auto& c : t.center) c /= static_cast<double>(cloud.size());
  double max_sq = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point3 p = cloud[i];
    double sq = 0.0;
    for (int a = 0; a < 3; ++a) sq += (p[a] - t.center[a]) * (p[a] - t.center[a]);
    max_sq = std::max(max_sq, sq);
  }
  t.scale = max_sq > 0.0 ? std::sqrt(max_sq) : 1.0;
  return {apply_transform(cloud, t), t};
}

PointCloud apply_transform(const PointCloud& cloud, const NormalizeTransform& t) {
  std::vector<float> out(cloud.coords().begin(), cloud.coords().end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>((out[i] - t.center[i % 3]) / t.scale);
  }
  PointCloud result(std::move(out));
  if (cloud.has_attribute()) {
    result.set_attribute({cloud.attribute().begin(), cloud.attribute().end()});
  }
  return result;
}

PointCloud invert_transform(const PointCloud& cloud, const NormalizeTransform& t) {
  std::vector<float> out(cloud.coords().begin(), cloud.coords().end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>(out[i] * t.scale + t.center[i % 3]);
  }
  PointCloud result(std::move(out));
  if (cloud.has_attribute()) {
    result.set_attribute({cloud.attribute().begin(), cloud.attribute().end()});
  }
  return result;
}

}  // namespace pcup
