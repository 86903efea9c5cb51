#pragma once

// Training objectives. Every function returns a scalar tensor that carries
// gradients into whatever produced its tensor arguments.

#include <cstddef>
#include <cstdint>

#include "pcup/point_cloud.hpp"
#include "pcup/rng.hpp"
#include "pcup/tensor.hpp"

namespace pcup {

struct LossWeights {
  double gp = 10.0;
  double adv = 0.1;  // lambda_1
  double kl = 0.01;  // lambda_2
  double cd = 100.0;  // lambda_3
  double emd = 10.0;  // lambda_4
  double stage1_cd = 100.0;

  void validate() const;
};

/// -mean(fake_scores).
Tensor loss_generator_adv(const Tensor& fake_scores);
/// mean(fake) - mean(real) + gp.
Tensor loss_critic(const Tensor& fake_scores, const Tensor& real_scores, const Tensor& gp);
/// Per-row sum over latent dims of KL(N(mu, sigma) || N(0, 1)), averaged over rows.
Tensor loss_kl(const Tensor& mu, const Tensor& log_std);
/// adv*L_G + kl*L_KL + cd*L_CD + emd*L_EMD with the stage-II weights.
Tensor loss_stage2(const Tensor& adv, const Tensor& kl, const Tensor& cd, const Tensor& emd,
                   const LossWeights& w);

/// Sum-form Chamfer distance between `pred` [N, 3] and a fixed target.
/// Nearest neighbours are found once and held fixed for the backward pass.
Tensor chamfer_loss(const Tensor& pred, const PointCloud& target);

/// Sum of Euclidean distances under the approximate optimal matching, which
/// is frozen for the backward pass. With 0 < subset < N the match is solved
/// on `subset` random rows of each cloud and the sum is rescaled by N/subset.
Tensor emd_loss(const Tensor& pred, const PointCloud& target, std::size_t subset, Rng& rng);

}  // namespace pcup
