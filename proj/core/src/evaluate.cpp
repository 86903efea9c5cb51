#include "pcup/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "pcup/sampling.hpp"

namespace pcup {
namespace {

constexpr const char* kKnownMetrics[] = {"cd", "emd", "hd", "p2p"};

bool wants(const EvaluateOptions& o, const char* name) {
  return std::find(o.metrics.begin(), o.metrics.end(), name) != o.metrics.end();
}

double nearest_rank(const std::vector<double>& sorted, double pct) {
  const auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * static_cast<double>(sorted.size())));
  return sorted[std::max<std::size_t>(rank, 1) - 1];
}

EmdReport emd_report(const PointCloud& pred, const PointCloud& gt, const EvaluateOptions& o) {
  const std::size_t smaller = std::min(pred.size(), gt.size());
  const bool equal = pred.size() == gt.size();
  if (!equal && o.emd_subset == 0 && o.emd_mode == EmdChoice::kExact) {
    throw ContractViolation("exact EMD needs equal sizes, got " + std::to_string(pred.size()) + " and " +
                            std::to_string(gt.size()) + " (pass a subset size to compare random subsets)");
  }
  EmdReport r;
  r.points = o.emd_subset ? std::min(o.emd_subset, smaller) : smaller;
  PointCloud x = pred, y = gt;
  if (r.points < pred.size() || r.points < gt.size()) {
    r.subset_seed = o.subset_seed;
    x = random_subsample(pred, r.points, o.subset_seed);
    y = random_subsample(gt, r.points, o.subset_seed + 1);
  }
  switch (o.emd_mode) {
    case EmdChoice::kExact: r.mode = EmdMode::kExact; break;
    case EmdChoice::kApprox: r.mode = EmdMode::kApprox; break;
    case EmdChoice::kAuto: r.mode = r.points <= kExactEmdCap ? EmdMode::kExact : EmdMode::kApprox; break;
  }
  r.total = emd(x, y, r.mode);
  r.per_point = r.points ? r.total / static_cast<double>(r.points) : 0.0;
  return r;
}

}  // namespace

std::vector<std::string> parse_metric_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (std::find(std::begin(kKnownMetrics), std::end(kKnownMetrics), item) == std::end(kKnownMetrics)) {
      throw ContractViolation("unknown metric '" + item + "' (expected cd, emd, hd or p2p)");
    }
    if (std::find(out.begin(), out.end(), item) != out.end()) {
      throw ContractViolation("metric '" + item + "' listed twice");
    }
    out.push_back(item);
  }
  if (out.empty()) throw ContractViolation("metric list is empty");
  return out;
}

EmdChoice emd_choice_from_string(const std::string& text) {
  if (text == "auto") return EmdChoice::kAuto;
  if (text == "exact") return EmdChoice::kExact;
  if (text == "approx") return EmdChoice::kApprox;
  throw ContractViolation("EMD mode must be auto, exact or approx, got '" + text + "'");
}

P2PSummary summarize_errors(std::vector<double> errors) {
  if (errors.empty()) throw ContractViolation("no errors to summarise");
  std::sort(errors.begin(), errors.end());
  P2PSummary s;
  s.mean = std::accumulate(errors.begin(), errors.end(), 0.0) / static_cast<double>(errors.size());
  s.max = errors.back();
  s.p50 = nearest_rank(errors, 50);
  s.p90 = nearest_rank(errors, 90);
  s.p95 = nearest_rank(errors, 95);
  s.p99 = nearest_rank(errors, 99);
  return s;
}

EvaluationReport evaluate_clouds(const PointCloud& pred, const PointCloud& gt, const EvaluateOptions& options) {
  if (pred.empty() || gt.empty()) throw ContractViolation("cannot evaluate an empty cloud");
  EvaluationReport r;
  r.pred_points = pred.size();
  r.gt_points = gt.size();
  if (wants(options, "cd")) r.chamfer = chamfer(pred, gt);
  if (wants(options, "emd")) r.emd = emd_report(pred, gt, options);
  if (wants(options, "hd")) r.hausdorff = hausdorff(pred, gt);
  if (wants(options, "p2p")) r.p2p = summarize_errors(pc2pc_error(pred, gt));
  return r;
}

PointCloud error_heatmap(const PointCloud& pred, const PointCloud& gt) {
  const auto errors = pc2pc_error(pred, gt);
  PointCloud out = pred;
  out.set_attribute(std::vector<float>(errors.begin(), errors.end()));
  return out;
}

std::string format_report(const EvaluationReport& r) {
  nlohmann::ordered_json j;
  j["pred_points"] = r.pred_points;
  j["gt_points"] = r.gt_points;
  if (r.chamfer) j["chamfer"] = {{"sum_form", r.chamfer->sum_form}, {"mean_form", r.chamfer->mean_form}};
  if (r.emd) {
    nlohmann::ordered_json seed = nullptr;
    if (r.emd->subset_seed) seed = *r.emd->subset_seed;
    j["emd"] = {{"total", r.emd->total},
                {"per_point", r.emd->per_point},
                {"mode", to_string(r.emd->mode)},
                {"points", r.emd->points},
                {"subset_seed", seed}};
  }
  if (r.hausdorff) j["hausdorff"] = *r.hausdorff;
  if (r.p2p) {
    j["p2p"] = {{"squared", true}, {"mean", r.p2p->mean}, {"max", r.p2p->max}, {"p50", r.p2p->p50},
                {"p90", r.p2p->p90},  {"p95", r.p2p->p95},   {"p99", r.p2p->p99}};
  }
  return j.dump(2) + "\n";
}

EvaluationReport parse_report(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    EvaluationReport r;
    r.pred_points = j.at("pred_points").get<std::size_t>();
    r.gt_points = j.at("gt_points").get<std::size_t>();
    if (j.contains("chamfer")) {
      r.chamfer = ChamferResult{j["chamfer"].at("sum_form").get<double>(), j["chamfer"].at("mean_form").get<double>()};
    }
    if (j.contains("emd")) {
      const auto& e = j["emd"];
      EmdReport er;
      er.total = e.at("total").get<double>();
      er.per_point = e.at("per_point").get<double>();
      er.mode = emd_mode_from_string(e.at("mode").get<std::string>());
      er.points = e.at("points").get<std::size_t>();
      if (!e.at("subset_seed").is_null()) er.subset_seed = e["subset_seed"].get<std::uint64_t>();
      r.emd = er;
    }
    if (j.contains("hausdorff")) r.hausdorff = j["hausdorff"].get<double>();
    if (j.contains("p2p")) {
      const auto& p = j["p2p"];
      r.p2p = P2PSummary{p.at("mean").get<double>(), p.at("max").get<double>(), p.at("p50").get<double>(),
                         p.at("p90").get<double>(),  p.at("p95").get<double>(), p.at("p99").get<double>()};
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("malformed report: ") + e.what());
  }
}

}  // namespace pcup
