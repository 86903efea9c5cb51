#include "pcup/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pcup/metrics.hpp"
#include "pcup/ops.hpp"

namespace pcup {
namespace {

void require_scores(const Tensor& s, const char* what) {
  if (s.numel() == 0) throw ContractViolation(std::string(what) + " score batch is empty");
}

void require_cloud_tensor(const Tensor& t, const char* what) {
  if (t.rank() != 2 || t.dim(1) != 3 || t.dim(0) == 0) {
    throw ContractViolation(std::string(what) + " expects an [N, 3] tensor, got " + shape_str(t.shape()));
  }
}

}  // namespace

void LossWeights::validate() const {
  for (const double w : {gp, adv, kl, cd, emd, stage1_cd}) {
    if (!std::isfinite(w) || w < 0.0) throw ContractViolation("loss weights must be finite and >= 0");
  }
}

Tensor loss_generator_adv(const Tensor& fake_scores) {
  require_scores(fake_scores, "generator");
  return neg(reduce_mean(fake_scores));
}

Tensor loss_critic(const Tensor& fake_scores, const Tensor& real_scores, const Tensor& gp) {
  require_scores(fake_scores, "fake");
  require_scores(real_scores, "real");
  if (gp.numel() != 1) throw ContractViolation("gradient penalty must be a scalar");
  return add(sub(reduce_mean(fake_scores), reduce_mean(real_scores)), reshape(gp, {}));
}

Tensor loss_kl(const Tensor& mu, const Tensor& log_std) {
  if (mu.shape() != log_std.shape() || mu.rank() != 2 || mu.dim(0) == 0) {
    throw ContractViolation("KL expects matching [B, D] mean and log-std, got " + shape_str(mu.shape()) + " and " +
                            shape_str(log_std.shape()));
  }
  // 1/2 (mu^2 + sigma^2 - 1 - log sigma^2) with log sigma^2 = 2 log_std.
  const Tensor var = exp(mul_scalar(log_std, 2.0));
  const Tensor terms = sub(add(square(mu), var), add_scalar(mul_scalar(log_std, 2.0), 1.0));
  return mul_scalar(reduce_sum(terms), 0.5 / static_cast<double>(mu.dim(0)));
}

Tensor loss_stage2(const Tensor& adv, const Tensor& kl, const Tensor& cd, const Tensor& emd,
                   const LossWeights& w) {
  for (const Tensor* t : {&adv, &kl, &cd, &emd}) {
    if (t->numel() != 1) throw ContractViolation("stage-II loss terms must be scalars");
  }
  Tensor total = mul_scalar(reshape(adv, {}), w.adv);
  total = add(total, mul_scalar(reshape(kl, {}), w.kl));
  total = add(total, mul_scalar(reshape(cd, {}), w.cd));
  return add(total, mul_scalar(reshape(emd, {}), w.emd));
}

Tensor chamfer_loss(const Tensor& pred, const PointCloud& target) {
  require_cloud_tensor(pred, "chamfer_loss");
  if (target.empty()) throw ContractViolation("chamfer_loss target is empty");
  const PointCloud p = PointCloud::from_tensor(pred);
  const Tensor t = target.to_tensor();
  const auto forward = nearest_neighbors(p, target);
  const auto backward_nn = nearest_neighbors(target, p);
  const Tensor a = reduce_sum(square(sub(pred, gather_rows(t, forward.index))));
  const Tensor b = reduce_sum(square(sub(gather_rows(pred, backward_nn.index), t)));
  return add(a, b);
}

Tensor emd_loss(const Tensor& pred, const PointCloud& target, std::size_t subset, Rng& rng) {
  require_cloud_tensor(pred, "emd_loss");
  const std::size_t n = pred.dim(0);
  if (target.size() != n) {
    throw ContractViolation("emd_loss needs equal sizes, got " + std::to_string(n) + " and " +
                            std::to_string(target.size()));
  }
  Tensor p = pred;
  PointCloud t = target;
  double scale = 1.0;
  if (subset > 0 && subset < n) {
    auto ip = rng.sample_without_replacement(n, subset);
    auto it = rng.sample_without_replacement(n, subset);
    std::sort(ip.begin(), ip.end());
    std::sort(it.begin(), it.end());
    p = gather_rows(pred, ip);
    t = target.select(it);
    scale = static_cast<double>(n) / static_cast<double>(subset);
  }
  const auto match = emd_assignment(PointCloud::from_tensor(p), t, EmdMode::kApprox);
  const Tensor matched = gather_rows(t.to_tensor(), match.target);
  return mul_scalar(reduce_sum(l2_norm(sub(p, matched), 1)), scale);
}

}  // namespace pcup
