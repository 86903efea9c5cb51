#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "pcup/metrics.hpp"

namespace pcup {
namespace {

PointCloud random_cloud(std::size_t n, std::uint64_t seed, float lo = 0.0f, float hi = 1.0f) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<float> dist(lo, hi);
  std::vector<float> xyz(3 * n);
  for (auto& v : xyz) v = dist(gen);
  return PointCloud(std::move(xyz));
}

double oracle_sq(const PointCloud& a, std::size_t i, const PointCloud& b, std::size_t j) {
  double s = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double d = static_cast<double>(a.coords()[3 * i + k]) - b.coords()[3 * j + k];
    s += d * d;
  }
  return s;
}

double oracle_directed_sum(const PointCloud& a, const PointCloud& b) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < b.size(); ++j) best = std::min(best, oracle_sq(a, i, b, j));
    total += best;
  }
  return total;
}

double oracle_directed_max(const PointCloud& a, const PointCloud& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < b.size(); ++j) best = std::min(best, oracle_sq(a, i, b, j));
    worst = std::max(worst, best);
  }
  return std::sqrt(worst);
}

double enumerate_min_cost(const CostMatrix& cost) {
  std::vector<std::size_t> perm(cost.rows);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < perm.size(); ++i) total += cost(i, perm[i]);
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

PointCloud rigid_motion(const PointCloud& c, double angle, const Point3& axis_unnorm,
                        const Point3& shift) {
  // Rodrigues rotation about a normalised axis.
  const double n = std::sqrt(static_cast<double>(axis_unnorm[0]) * axis_unnorm[0] +
                             static_cast<double>(axis_unnorm[1]) * axis_unnorm[1] +
                             static_cast<double>(axis_unnorm[2]) * axis_unnorm[2]);
  const double kx = axis_unnorm[0] / n, ky = axis_unnorm[1] / n, kz = axis_unnorm[2] / n;
  const double cs = std::cos(angle), sn = std::sin(angle), t = 1.0 - cs;
  const double r[3][3] = {{cs + kx * kx * t, kx * ky * t - kz * sn, kx * kz * t + ky * sn},
                          {ky * kx * t + kz * sn, cs + ky * ky * t, ky * kz * t - kx * sn},
                          {kz * kx * t - ky * sn, kz * ky * t + kx * sn, cs + kz * kz * t}};
  std::vector<float> out;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const Point3 p = c[i];
    for (int a = 0; a < 3; ++a) {
      out.push_back(static_cast<float>(r[a][0] * p[0] + r[a][1] * p[1] + r[a][2] * p[2] + shift[a]));
    }
  }
  return PointCloud(std::move(out));
}

PointCloud shuffled(const PointCloud& c, std::uint64_t seed) {
  std::vector<std::size_t> idx(c.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 gen(seed);
  std::shuffle(idx.begin(), idx.end(), gen);
  return c.select(idx);
}

TEST(Chamfer, IdenticalCloudsGiveZero) {
  const auto x = random_cloud(32, 1);
  const auto r = chamfer(x, x);
  EXPECT_EQ(r.sum_form, 0.0);
  EXPECT_EQ(r.mean_form, 0.0);
}

TEST(Chamfer, SinglePointPair) {
  const PointCloud x(std::vector<Point3>{{0, 0, 0}});
  const PointCloud y(std::vector<Point3>{{1, 0, 0}});
  const auto r = chamfer(x, y);
  EXPECT_EQ(r.sum_form, 2.0);
  EXPECT_EQ(r.mean_form, 2.0);
}

TEST(Chamfer, MatchesBruteForceOracleExactly) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto x = random_cloud(16, 100 + seed);
    const auto y = random_cloud(16 + seed % 5, 200 + seed);
    const auto r = chamfer(x, y);
    const double fwd = oracle_directed_sum(x, y);
    const double bwd = oracle_directed_sum(y, x);
    EXPECT_EQ(r.sum_form, fwd + bwd);
    EXPECT_EQ(r.mean_form, fwd / static_cast<double>(x.size()) + bwd / static_cast<double>(y.size()));
  }
}

TEST(Chamfer, EmptyCloudRejected) {
  const auto x = random_cloud(4, 1);
  EXPECT_THROW(chamfer(x, PointCloud{}), ContractViolation);
  EXPECT_THROW(chamfer(PointCloud{}, x), ContractViolation);
}

TEST(Hausdorff, KnownValues) {
  const auto x = random_cloud(10, 3);
  EXPECT_EQ(hausdorff(x, x), 0.0);
  const PointCloud a(std::vector<Point3>{{0, 0, 0}});
  const PointCloud b(std::vector<Point3>{{0, 3, 4}});
  EXPECT_EQ(hausdorff(a, b), 5.0);
}

TEST(Hausdorff, MatchesBruteForceOracleExactly) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto x = random_cloud(16, 300 + seed);
    const auto y = random_cloud(16, 400 + seed);
    EXPECT_EQ(hausdorff(x, y), std::max(oracle_directed_max(x, y), oracle_directed_max(y, x)));
  }
  EXPECT_THROW(hausdorff(PointCloud{}, random_cloud(2, 1)), ContractViolation);
}

TEST(Pc2Pc, ZeroOnIdentityAndSquaredDistance) {
  const auto x = random_cloud(12, 5);
  for (const double e : pc2pc_error(x, x)) EXPECT_EQ(e, 0.0);
  const PointCloud pred(std::vector<Point3>{{0.5f, 0, 0}});
  const PointCloud gt(std::vector<Point3>{{0, 0, 0}, {2, 0, 0}});
  const auto e = pc2pc_error(pred, gt);
  ASSERT_EQ(e.size(), 1u);
  EXPECT_EQ(e[0], 0.25);
  EXPECT_THROW(pc2pc_error(pred, PointCloud{}), ContractViolation);
}

TEST(Pc2Pc, SumEqualsFirstChamferTerm) {
  const auto pred = random_cloud(40, 6);
  const auto gt = random_cloud(25, 7);
  const auto e = pc2pc_error(pred, gt);
  ASSERT_EQ(e.size(), pred.size());
  double total = 0.0;
  for (const double v : e) total += v;
  EXPECT_EQ(total, oracle_directed_sum(pred, gt));
}

TEST(NearestNeighbors, GridMatchesBruteForceExactly) {
  const auto ref = random_cloud(5000, 11, -1.0f, 1.0f);
  const auto query = random_cloud(3000, 12, -1.2f, 1.2f);
  const auto brute = nearest_neighbors(query, ref, NeighborSearch::kBruteForce);
  const auto grid = nearest_neighbors(query, ref, NeighborSearch::kGrid);
  EXPECT_EQ(brute.index, grid.index);
  EXPECT_EQ(brute.sq_dist, grid.sq_dist);
}

TEST(NearestNeighbors, GridHandlesDuplicatesAndFlatClouds) {
  // Planar cloud with repeated points: ties must resolve to the lowest index.
  std::vector<Point3> pts;
  std::mt19937_64 gen(13);
  std::uniform_int_distribution<int> grid(0, 20);
  for (int i = 0; i < 6000; ++i) {
    pts.push_back({grid(gen) * 0.05f, grid(gen) * 0.05f, 0.0f});
  }
  const PointCloud ref(pts);
  const auto query = random_cloud(500, 14, -0.1f, 1.1f);
  const auto brute = nearest_neighbors(query, ref, NeighborSearch::kBruteForce);
  const auto fast = nearest_neighbors(query, ref, NeighborSearch::kGrid);
  EXPECT_EQ(brute.index, fast.index);
  EXPECT_EQ(brute.sq_dist, fast.sq_dist);
  const auto self_brute = nearest_neighbors(ref, ref, NeighborSearch::kBruteForce);
  const auto self_fast = nearest_neighbors(ref, ref, NeighborSearch::kGrid);
  EXPECT_EQ(self_brute.index, self_fast.index);
}

TEST(Hungarian, TrivialCases) {
  CostMatrix diag{3, 3, {0, 9, 9, 9, 0, 9, 9, 9, 0}};
  auto r = hungarian_assign(diag);
  EXPECT_EQ(r.target, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(r.cost, 0.0);
  CostMatrix swap{2, 2, {1, 0, 0, 1}};
  r = hungarian_assign(swap);
  EXPECT_EQ(r.target, (std::vector<std::size_t>{1, 0}));
  EXPECT_EQ(r.cost, 0.0);
  EXPECT_THROW(hungarian_assign(CostMatrix{2, 3, std::vector<double>(6, 1.0)}), ContractViolation);
}

TEST(Hungarian, MatchesEnumerationOracle) {
  std::mt19937_64 gen(21);
  std::uniform_real_distribution<double> dist(0.0, 10.0);
  for (int trial = 0; trial < 30; ++trial) {
    CostMatrix c{6, 6, std::vector<double>(36)};
    for (auto& v : c.values) v = dist(gen);
    const auto r = hungarian_assign(c);
    ASSERT_TRUE(is_permutation(r.target));
    EXPECT_NEAR(r.cost, enumerate_min_cost(c), 1e-9);
    EXPECT_EQ(r.cost, assignment_cost(c, r.target));
  }
}

TEST(Auction, NeverBelowOptimumAndWithinGap) {
  std::mt19937_64 gen(22);
  std::uniform_real_distribution<double> dist(0.0, 10.0);
  for (int trial = 0; trial < 30; ++trial) {
    CostMatrix c{6, 6, std::vector<double>(36)};
    for (auto& v : c.values) v = dist(gen);
    const auto r = auction_assign(c);
    ASSERT_TRUE(is_permutation(r.target));
    const double best = enumerate_min_cost(c);
    EXPECT_GE(r.cost, best - 1e-9);
    EXPECT_LE(r.cost, best * 1.01 + 1e-9);
  }
}

TEST(Emd, TrivialCases) {
  const auto x = random_cloud(9, 30);
  EXPECT_EQ(emd(x, x, EmdMode::kExact), 0.0);
  EXPECT_EQ(emd(x, x, EmdMode::kApprox), 0.0);
  const PointCloud a(std::vector<Point3>{{0, 0, 0}, {1, 0, 0}});
  const PointCloud b(std::vector<Point3>{{1, 0, 0}, {0, 0, 0}});
  EXPECT_EQ(emd(a, b, EmdMode::kExact), 0.0);
  EXPECT_EQ(emd(a, b, EmdMode::kApprox), 0.0);
}

TEST(Emd, ExactMatchesFactorialOracle) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto x = random_cloud(7, 500 + seed);
    const auto y = random_cloud(7, 600 + seed);
    CostMatrix c{7, 7, std::vector<double>(49)};
    for (std::size_t i = 0; i < 7; ++i) {
      for (std::size_t j = 0; j < 7; ++j) c.values[i * 7 + j] = std::sqrt(oracle_sq(x, i, y, j));
    }
    EXPECT_NEAR(emd(x, y, EmdMode::kExact), enumerate_min_cost(c), 1e-12);
  }
}

TEST(Emd, ApproxWithinOnePercentOfExact) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto x = random_cloud(64, 700 + seed);
    const auto y = random_cloud(64, 800 + seed);
    const double exact = emd(x, y, EmdMode::kExact);
    const double approx = emd(x, y, EmdMode::kApprox);
    EXPECT_GE(approx, exact - 1e-9);
    EXPECT_LE((approx - exact) / exact, 0.01);
  }
}

TEST(Emd, ContractViolations) {
  EXPECT_THROW(emd(random_cloud(4, 1), random_cloud(5, 2), EmdMode::kExact), ContractViolation);
  const auto big = random_cloud(kExactEmdCap + 1, 3);
  try {
    emd(big, big, EmdMode::kExact);
    FAIL() << "expected a contract violation";
  } catch (const ContractViolation& e) {
    EXPECT_NE(std::string(e.what()).find("approx"), std::string::npos);
  }
  EXPECT_NO_THROW(emd(big, big, EmdMode::kApprox));
  EXPECT_EQ(emd_mode_from_string("exact"), EmdMode::kExact);
  EXPECT_THROW(emd_mode_from_string("fast"), ContractViolation);
}

TEST(MetricProperties, SymmetryPermutationAndRigidMotion) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto x = random_cloud(48, 900 + seed, -1.0f, 1.0f);
    const auto y = random_cloud(48, 950 + seed, -1.0f, 1.0f);
    const auto cd = chamfer(x, y);
    const double hd = hausdorff(x, y);
    const double em = emd(x, y, EmdMode::kExact);

    EXPECT_EQ(chamfer(y, x).sum_form, cd.sum_form);
    EXPECT_EQ(hausdorff(y, x), hd);
    EXPECT_NEAR(emd(y, x, EmdMode::kExact), em, 1e-9);

    const auto xs = shuffled(x, seed), ys = shuffled(y, seed + 1);
    EXPECT_NEAR(chamfer(xs, ys).sum_form, cd.sum_form, 1e-12);
    EXPECT_EQ(hausdorff(xs, ys), hd);
    EXPECT_NEAR(emd(xs, ys, EmdMode::kExact), em, 1e-9);

    const double angle = 0.3 + 0.4 * static_cast<double>(seed);
    const Point3 axis{1.0f, 2.0f, -0.5f}, shift{0.2f, -0.1f, 0.3f};
    const auto xr = rigid_motion(x, angle, axis, shift);
    const auto yr = rigid_motion(y, angle, axis, shift);
    EXPECT_NEAR(chamfer(xr, yr).sum_form, cd.sum_form, 1e-5);
    EXPECT_NEAR(chamfer(xr, yr).mean_form, cd.mean_form, 1e-5);
    EXPECT_NEAR(hausdorff(xr, yr), hd, 1e-5);
    EXPECT_NEAR(emd(xr, yr, EmdMode::kExact), em, 1e-5);

    EXPECT_GT(cd.sum_form, 0.0);
    EXPECT_GT(hd, 0.0);
    EXPECT_GT(em, 0.0);
  }
}

}  // namespace
}  // namespace pcup
