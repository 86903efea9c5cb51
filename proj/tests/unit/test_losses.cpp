#include <gtest/gtest.h>

#include <cmath>

#include "pcup/gradcheck.hpp"
#include "pcup/losses.hpp"
#include "pcup/metrics.hpp"
#include "pcup/ops.hpp"
#include "pcup/rng.hpp"

namespace pcup {
namespace {

Tensor vec(std::vector<float> v) {
  const std::size_t n = v.size();
  return Tensor({n, 1}, std::move(v));
}

Tensor random_tensor(const Shape& shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  std::vector<float> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<float>(rng.uniform(lo, hi));
  return Tensor(shape, std::move(v));
}

PointCloud random_cloud(std::size_t n, std::uint64_t seed) {
  return PointCloud::from_tensor(random_tensor({n, 3}, seed));
}

TEST(AdversarialLoss, NegativeMean) {
  EXPECT_FLOAT_EQ(loss_generator_adv(vec({1, 3})).item(), -2.0f);
  EXPECT_FLOAT_EQ(loss_generator_adv(vec({0})).item(), 0.0f);
  const Tensor s = random_tensor({17, 1}, 1, -5, 5);
  double mean = 0.0;
  for (const float v : s.data()) mean += v;
  mean /= 17.0;
  EXPECT_NEAR(loss_generator_adv(s).item(), -mean, 1e-6);
  EXPECT_THROW(loss_generator_adv(Tensor::zeros({0, 1})), ContractViolation);
}

TEST(CriticLoss, Examples) {
  EXPECT_FLOAT_EQ(loss_critic(vec({0}), vec({0}), Tensor::scalar(0)).item(), 0.0f);
  EXPECT_FLOAT_EQ(loss_critic(vec({2}), vec({1}), Tensor::scalar(0.5f)).item(), 1.5f);
  const Tensor same = random_tensor({5, 1}, 2);
  EXPECT_FLOAT_EQ(loss_critic(same, same, Tensor::scalar(0)).item(), 0.0f);
}

TEST(CriticLoss, AntisymmetricWithoutPenalty) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Tensor a = random_tensor({4, 1}, s, -3, 3), b = random_tensor({6, 1}, 100 + s, -3, 3);
    const Tensor zero = Tensor::scalar(0);
    EXPECT_NEAR(loss_critic(a, b, zero).item(), -loss_critic(b, a, zero).item(), 1e-6);
  }
}

TEST(KlLoss, Examples) {
  EXPECT_FLOAT_EQ(loss_kl(Tensor::zeros({1, 96}), Tensor::zeros({1, 96})).item(), 0.0f);
  Tensor mu = Tensor::zeros({1, 96});
  mu.data()[5] = 1.0f;
  EXPECT_FLOAT_EQ(loss_kl(mu, Tensor::zeros({1, 96})).item(), 0.5f);
  for (std::uint64_t s = 0; s < 20; ++s) {
    EXPECT_GE(loss_kl(random_tensor({3, 96}, s, -2, 2), random_tensor({3, 96}, 50 + s, -2, 2)).item(), 0.0f);
  }
  EXPECT_THROW(loss_kl(Tensor::zeros({1, 96}), Tensor::zeros({1, 95})), ContractViolation);
}

TEST(KlLoss, GradientMatchesClosedForm) {
  Tensor mu = random_tensor({2, 8}, 3), ls = random_tensor({2, 8}, 4);
  mu.set_requires_grad(true);
  ls.set_requires_grad(true);
  backward(loss_kl(mu, ls));
  for (std::size_t i = 0; i < 16; ++i) {
    const double sigma2 = std::exp(2.0 * ls.data()[i]);
    EXPECT_NEAR(mu.grad()[i], mu.data()[i] / 2.0, 1e-6);
    EXPECT_NEAR(ls.grad()[i], (sigma2 - 1.0) / 2.0, 1e-5);
  }
}

TEST(Stage2Loss, WeightedSum) {
  const Tensor a = Tensor::scalar(1), b = Tensor::scalar(2), c = Tensor::scalar(3), d = Tensor::scalar(4);
  LossWeights zero{0, 0, 0, 0, 0, 0};
  EXPECT_EQ(loss_stage2(a, b, c, d, zero).item(), 0.0f);
  LossWeights unit{0, 1, 1, 1, 1, 0};
  EXPECT_FLOAT_EQ(loss_stage2(a, b, c, d, unit).item(), 10.0f);
  LossWeights adv_only{0, 1, 0, 0, 0, 0};
  EXPECT_FLOAT_EQ(loss_stage2(a, b, c, d, adv_only).item(), 1.0f);
}

TEST(Stage2Loss, LinearInEachWeight) {
  const Tensor t[4] = {Tensor::scalar(0.7f), Tensor::scalar(-1.3f), Tensor::scalar(2.1f), Tensor::scalar(0.4f)};
  const LossWeights base{10, 0.1, 0.01, 100, 10, 100};
  const double f0 = loss_stage2(t[0], t[1], t[2], t[3], base).item();
  double LossWeights::*fields[4] = {&LossWeights::adv, &LossWeights::kl, &LossWeights::cd, &LossWeights::emd};
  for (int k = 0; k < 4; ++k) {
    LossWeights scaled = base;
    scaled.*fields[k] *= 3.0;
    const double f = loss_stage2(t[0], t[1], t[2], t[3], scaled).item();
    EXPECT_NEAR(f - f0, 2.0 * (base.*fields[k]) * t[k].item(), 1e-3 * std::max(1.0, std::abs(f0)));
  }
}

TEST(LossWeights, RejectsNegativeOrNonFinite) {
  LossWeights w;
  EXPECT_NO_THROW(w.validate());
  w.kl = -1;
  EXPECT_THROW(w.validate(), ContractViolation);
  w = LossWeights{};
  w.cd = std::nan("");
  EXPECT_THROW(w.validate(), ContractViolation);
}

TEST(ChamferLoss, ValueMatchesMetricSumForm) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Tensor pred = random_tensor({20 + s, 3}, s);
    const PointCloud gt = random_cloud(30 - s, 500 + s);
    const double expect = chamfer(PointCloud::from_tensor(pred), gt).sum_form;
    EXPECT_NEAR(chamfer_loss(pred, gt).item(), expect, 1e-5 * expect);
  }
}

TEST(ChamferLoss, GradientMatchesFiniteDifferences) {
  Tensor pred = random_tensor({15, 3}, 7);
  pred.set_requires_grad(true);
  const PointCloud gt = random_cloud(11, 8);
  GradCheckOptions opt;
  opt.step = 1e-3;
  const auto r = check_sampled_gradients("chamfer", [&] { return chamfer_loss(pred, gt); }, {pred}, 45, opt);
  EXPECT_LT(r.max_rel_error, 1e-3);
}

TEST(EmdLoss, ValueMatchesApproximateEmd) {
  const Tensor pred = random_tensor({40, 3}, 9);
  const PointCloud gt = random_cloud(40, 10);
  Rng rng(1);
  const double value = emd_loss(pred, gt, 0, rng).item();
  const double exact = emd(PointCloud::from_tensor(pred), gt, EmdMode::kExact);
  EXPECT_NEAR(value, emd(PointCloud::from_tensor(pred), gt, EmdMode::kApprox), 1e-4 * value);
  EXPECT_GE(value, exact * (1 - 1e-6));
  EXPECT_LE(value, exact * 1.01);
}

TEST(EmdLoss, ZeroForPermutedCopyAndSubsetRescales) {
  const Tensor pred = random_tensor({64, 3}, 11);
  Rng perm_rng(12);
  const PointCloud gt = PointCloud::from_tensor(pred).select(perm_rng.permutation(64));
  Rng rng(13);
  EXPECT_NEAR(emd_loss(pred, gt, 0, rng).item(), 0.0, 1e-6);
  EXPECT_NEAR(emd_loss(pred, gt, 64, rng).item(), 0.0, 1e-6);
  // Subset estimates stay on the scale of the full sum.
  const PointCloud other = random_cloud(64, 14);
  const double full = emd_loss(pred, other, 0, rng).item();
  double mean = 0.0;
  for (int i = 0; i < 20; ++i) mean += emd_loss(pred, other, 32, rng).item() / 20.0;
  EXPECT_GT(mean, 0.7 * full);
  EXPECT_LT(mean, 1.6 * full);
  EXPECT_THROW(emd_loss(pred, random_cloud(63, 15), 0, rng), ContractViolation);
}

TEST(EmdLoss, GradientFollowsFrozenMatching) {
  Tensor pred = random_tensor({16, 3}, 16);
  pred.set_requires_grad(true);
  const PointCloud gt = random_cloud(16, 17);
  Rng rng(18);
  backward(emd_loss(pred, gt, 0, rng));
  const auto match = emd_assignment(PointCloud::from_tensor(pred), gt, EmdMode::kApprox);
  for (std::size_t i = 0; i < 16; ++i) {
    double d[3], norm = 0.0;
    for (int c = 0; c < 3; ++c) {
      d[c] = pred.at(i, c) - gt[match.target[i]][c];
      norm += d[c] * d[c];
    }
    norm = std::sqrt(norm);
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(pred.grad()[i * 3 + c], d[c] / norm, 1e-5);
  }
}

}  // namespace
}  // namespace pcup
