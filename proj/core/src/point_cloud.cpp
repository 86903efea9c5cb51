#include "pcup/point_cloud.hpp"

#include <cmath>
#include <string>

namespace pcup {

PointCloud::PointCloud(std::vector<float> xyz) : xyz_(std::move(xyz)) {
  if (xyz_.size() % 3 != 0) {
    throw ContractViolation("point cloud needs 3 values per point, got " +
                            std::to_string(xyz_.size()) + " values");
  }
  for (const float v : xyz_) {
    if (!std::isfinite(v)) throw ContractViolation("point cloud contains a non-finite coordinate");
  }
}

namespace {
std::vector<float> flatten(const std::vector<Point3>& points) {
  std::vector<float> xyz;
  xyz.reserve(points.size() * 3);
  for (const auto& p : points) xyz.insert(xyz.end(), p.begin(), p.end());
  return xyz;
}
}  // namespace

PointCloud::PointCloud(const std::vector<Point3>& points) : PointCloud(flatten(points)) {}

PointCloud PointCloud::from_tensor(const Tensor& t) {
  if (t.rank() != 2 || t.dim(1) != 3) {
    throw ContractViolation("expected an N x 3 tensor, got " + shape_str(t.shape()));
  }
  return PointCloud(t.to_vector());
}

Tensor PointCloud::to_tensor(bool requires_grad) const {
  if (empty()) throw ContractViolation("cannot convert an empty point cloud to a tensor");
  return Tensor(Shape{size(), 3}, xyz_, requires_grad);
}

std::span<const float> PointCloud::attribute() const {
  if (!attribute_) return {};
  return *attribute_;
}

void PointCloud::set_attribute(std::vector<float> values) {
  if (values.size() != size()) {
    throw ContractViolation("attribute length " + std::to_string(values.size()) +
                            " does not match point count " + std::to_string(size()));
  }
  attribute_ = std::move(values);
}

PointCloud PointCloud::select(std::span<const std::size_t> indices) const {
  std::vector<float> xyz;
  xyz.reserve(indices.size() * 3);
  std::vector<float> attr;
  for (const std::size_t i : indices) {
    if (i >= size()) throw ContractViolation("point index " + std::to_string(i) + " out of range");
    xyz.insert(xyz.end(), xyz_.begin() + static_cast<std::ptrdiff_t>(3 * i),
               xyz_.begin() + static_cast<std::ptrdiff_t>(3 * i + 3));
    if (attribute_) attr.push_back((*attribute_)[i]);
  }
  PointCloud out(std::move(xyz));
  if (attribute_) out.set_attribute(std::move(attr));
  return out;
}

}  // namespace pcup
