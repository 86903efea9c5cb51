#pragma once

// Metric report for a predicted cloud against ground truth.
//
// JSON schema (fields present only for requested metrics):
//   pred_points, gt_points
//   chamfer:   { sum_form, mean_form }
//   emd:       { total, per_point, mode, points, subset_seed (null unless subsetting) }
//   hausdorff: number
//   p2p:       { squared: true, mean, max, p50, p90, p95, p99 }
// Percentiles use the nearest-rank rule on the squared errors.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pcup/metrics.hpp"
#include "pcup/point_cloud.hpp"

namespace pcup {

enum class EmdChoice { kAuto, kExact, kApprox };

struct EvaluateOptions {
  std::vector<std::string> metrics{"cd", "emd", "hd", "p2p"};
  EmdChoice emd_mode = EmdChoice::kAuto;
  /// 0 keeps every point when sizes agree; otherwise both clouds are reduced
  /// to min(subset, sizes) points by a seeded random draw.
  std::size_t emd_subset = 0;
  std::uint64_t subset_seed = 0;
};

/// Parses "cd,emd,hd,p2p" style lists; rejects unknown or repeated names.
std::vector<std::string> parse_metric_list(const std::string& text);
EmdChoice emd_choice_from_string(const std::string& text);

struct EmdReport {
  double total = 0.0;
  double per_point = 0.0;
  EmdMode mode = EmdMode::kExact;
  std::size_t points = 0;
  std::optional<std::uint64_t> subset_seed;
};

struct P2PSummary {
  double mean = 0.0;
  double max = 0.0;
  double p50 = 0.0;
  double p90 = 0.0;
  double p95 = 0.0;
  double p99 = 0.0;
};

P2PSummary summarize_errors(std::vector<double> errors);

struct EvaluationReport {
  std::size_t pred_points = 0;
  std::size_t gt_points = 0;
  std::optional<ChamferResult> chamfer;
  std::optional<EmdReport> emd;
  std::optional<double> hausdorff;
  std::optional<P2PSummary> p2p;
};

EvaluationReport evaluate_clouds(const PointCloud& pred, const PointCloud& gt, const EvaluateOptions& options = {});

/// The prediction with its per-point squared error attached as the attribute.
PointCloud error_heatmap(const PointCloud& pred, const PointCloud& gt);

std::string format_report(const EvaluationReport& report);
/// Inverse of format_report; throws std::runtime_error on malformed input.
EvaluationReport parse_report(const std::string& text);

}  // namespace pcup
