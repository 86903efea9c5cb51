#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "pcup/tensor.hpp"

namespace pcup {

using Point3 = std::array<float, 3>;

/// N x 3 coordinates with an optional per-point scalar (exported as the
/// "error" vertex property for heatmaps).
class PointCloud {
 public:
  PointCloud() = default;
  /// `xyz` holds x0 y0 z0 x1 y1 z1 ...; every value must be finite.
  explicit PointCloud(std::vector<float> xyz);
  explicit PointCloud(const std::vector<Point3>& points);

  static PointCloud from_tensor(const Tensor& t);
  Tensor to_tensor(bool requires_grad = false) const;

  std::size_t size() const { return xyz_.size() / 3; }
  bool empty() const { return xyz_.empty(); }
  Point3 operator[](std::size_t i) const { return {xyz_[3 * i], xyz_[3 * i + 1], xyz_[3 * i + 2]}; }
  std::span<const float> coords() const { return xyz_; }
  std::span<float> coords() { return xyz_; }

  bool has_attribute() const { return attribute_.has_value(); }
  std::span<const float> attribute() const;
  void set_attribute(std::vector<float> values);
  void clear_attribute() { attribute_.reset(); }

  /// Rows `indices` in the given order (attribute carried along).
  PointCloud select(std::span<const std::size_t> indices) const;

  friend bool operator==(const PointCloud&, const PointCloud&) = default;

 private:
  std::vector<float> xyz_;
  std::optional<std::vector<float>> attribute_;
};

}  // namespace pcup
