#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

#include "pcup/gen_stage2.hpp"
#include "pcup/gradcheck.hpp"
#include "pcup/losses.hpp"
#include "pcup/ops.hpp"
#include "pcup/rng.hpp"

namespace pcup {
namespace {

Tensor random_tensor(const Shape& shape, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::vector<float> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<float>(scale * rng.normal());
  return Tensor(shape, std::move(v));
}

UpsampleConfig small_config(std::size_t ratio = 4, std::size_t c = 8) {
  UpsampleConfig cfg;
  cfg.ratio = ratio;
  cfg.feature_width = c;
  cfg.growth = 4;
  cfg.dense_blocks = 2;
  cfg.support = 3;
  cfg.recon_hidden = 5;
  return cfg;
}

std::set<std::size_t> changed_rows(const Tensor& a, const Tensor& b) {
  std::set<std::size_t> rows;
  for (std::size_t r = 0; r < a.dim(0); ++r) {
    for (std::size_t c = 0; c < a.dim(1); ++c) {
      if (a.at(r, c) != b.at(r, c)) rows.insert(r);
    }
  }
  return rows;
}

std::vector<std::array<float, 3>> sorted_rows(const Tensor& t) {
  std::vector<std::array<float, 3>> rows(t.dim(0));
  for (std::size_t r = 0; r < rows.size(); ++r) rows[r] = {t.at(r, 0), t.at(r, 1), t.at(r, 2)};
  std::sort(rows.begin(), rows.end());
  return rows;
}

double lrelu(double v) { return v > 0 ? v : kLeakySlope * v; }

// y = lrelu(x W + b) for one row, from the parameter table.
std::vector<double> dense_row(const ParameterSet& p, const std::string& name, const std::vector<double>& x) {
  const Tensor& w = p.get(name + ".weight");
  const Tensor& b = p.get(name + ".bias");
  std::vector<double> y(w.dim(1));
  for (std::size_t o = 0; o < y.size(); ++o) {
    double v = b.data()[o];
    for (std::size_t i = 0; i < x.size(); ++i) v += x[i] * w.at(i, o);
    y[o] = lrelu(v);
  }
  return y;
}

TEST(Shuffle, FollowsIndexMap) {
  EXPECT_EQ(shuffle(Tensor::matrix(1, 4, {1, 2, 3, 4}), 2).to_vector(), (std::vector<float>{1, 2, 3, 4}));
  EXPECT_EQ(shuffle(Tensor::matrix(1, 4, {1, 2, 3, 4}), 2).shape(), (Shape{2, 2}));
  const Tensor six = shuffle(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}), 3);
  EXPECT_EQ(six.shape(), (Shape{6, 1}));
  EXPECT_EQ(six.to_vector(), (std::vector<float>{1, 2, 3, 4, 5, 6}));
  const Tensor x = random_tensor({3, 6}, 1);
  EXPECT_EQ(shuffle(x, 1).to_vector(), x.to_vector());
}

TEST(Shuffle, ExplicitIndexMapAndRoundTrip) {
  const std::size_t n = 5, c = 3, r = 4;
  const Tensor f = random_tensor({n, r * c}, 2);
  const Tensor s = shuffle(f, r);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < r; ++k) {
      for (std::size_t j = 0; j < c; ++j) EXPECT_EQ(s.at(i * r + k, j), f.at(i, k * c + j));
    }
  }
  EXPECT_EQ(unshuffle(s, r).to_vector(), f.to_vector());
  auto a = f.to_vector(), b = s.to_vector();
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  EXPECT_EQ(a, b);
  EXPECT_THROW(shuffle(random_tensor({2, 5}, 3), 2), ContractViolation);
}

TEST(Stage2Config, Validates) {
  UpsampleConfig c;
  EXPECT_NO_THROW(c.validate());
  c.ratio = 1;
  EXPECT_THROW(c.validate(), ContractViolation);
  c = UpsampleConfig{};
  c.feature_width = 7;
  EXPECT_THROW(c.validate(), ContractViolation);
}

TEST(Stage2Extractor, SinglePointShape) {
  Stage2Generator g(small_config(), 1);
  EXPECT_EQ(g.extract_features(random_tensor({1, 3}, 1)).shape(), (Shape{1, 8}));
}

TEST(Stage2Extractor, PermutationEquivariant) {
  Stage2Generator g(small_config(), 2);
  const Tensor x = random_tensor({20, 3}, 3);
  Rng rng(4);
  const auto perm = rng.permutation(20);
  const Tensor a = g.extract_features(x);
  const Tensor b = g.extract_features(gather_rows(x, perm));
  for (std::size_t i = 0; i < 20; ++i) {
    for (std::size_t c = 0; c < 8; ++c) EXPECT_NEAR(b.at(i, c), a.at(perm[i], c), 1e-6);
  }
}

TEST(Stage2Extractor, MatchesNaiveRecomputation) {
  const UpsampleConfig cfg = small_config();
  Stage2Generator g(cfg, 5);
  const ParameterSet& p = g.params();
  const Tensor x = random_tensor({12, 3}, 6);
  std::vector<std::vector<double>> local(12);
  for (std::size_t i = 0; i < 12; ++i) {
    local[i] = {x.at(i, 0), x.at(i, 1), x.at(i, 2)};
    for (std::size_t k = 0; k < cfg.dense_blocks; ++k) {
      const auto h = dense_row(p, "gen2.extract.dense" + std::to_string(k), local[i]);
      local[i].insert(local[i].end(), h.begin(), h.end());
    }
  }
  std::vector<double> context(local[0].size(), -1e300);
  for (const auto& row : local) {
    for (std::size_t c = 0; c < row.size(); ++c) context[c] = std::max(context[c], row[c]);
  }
  const Tensor got = g.extract_features(x);
  for (std::size_t i = 0; i < 12; ++i) {
    std::vector<double> in = local[i];
    in.insert(in.end(), context.begin(), context.end());
    const auto expect = dense_row(p, "gen2.extract.fuse", in);
    for (std::size_t c = 0; c < expect.size(); ++c) EXPECT_NEAR(got.at(i, c), expect[c], 1e-6);
  }
}

TEST(Stage2Expansion, ShapeZeroAndLocality) {
  Stage2Generator g(small_config(4, 8), 7);
  const Tensor f = random_tensor({4, 8}, 8);
  const Tensor base = g.upsample_features(f);
  EXPECT_EQ(base.shape(), (Shape{16, 8}));
  for (std::size_t n = 0; n < 4; ++n) {
    Tensor f2 = f.clone();
    f2.at(n, 3) += 0.5f;
    EXPECT_EQ(changed_rows(base, g.upsample_features(f2)), (std::set<std::size_t>{4 * n, 4 * n + 1, 4 * n + 2, 4 * n + 3}));
  }
  for (auto& t : g.params().tensors()) std::fill(t.data().begin(), t.data().end(), 0.0f);
  const Tensor zero = g.upsample_features(f);
  EXPECT_EQ(zero.shape(), (Shape{16, 8}));
  for (const float v : zero.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Stage2Reconstruction, ShapeZeroAndRowIndependence) {
  Stage2Generator g(small_config(4, 8), 9);
  const Tensor f = random_tensor({8192, 8}, 10);
  const Tensor base = g.reconstruct_coords(f);
  EXPECT_EQ(base.shape(), (Shape{8192, 3}));
  Tensor f2 = f.clone();
  f2.at(77, 0) += 1.0f;
  EXPECT_EQ(changed_rows(base, g.reconstruct_coords(f2)), (std::set<std::size_t>{77}));
  for (auto& t : g.params().tensors()) std::fill(t.data().begin(), t.data().end(), 0.0f);
  const Tensor origin = g.reconstruct_coords(f);
  for (const float v : origin.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Stage2Upsample, OutputCardinality) {
  for (const std::size_t r : {2u, 4u, 8u}) {
    Stage2Generator g(small_config(r), 11);
    for (const std::size_t n : {64u, 256u, 2048u}) {
      EXPECT_EQ(g.upsample(random_tensor({n, 3}, n)).shape(), (Shape{r * n, 3})) << "r=" << r << " n=" << n;
    }
  }
  Stage2Generator full(UpsampleConfig{}, 12);
  EXPECT_EQ(full.upsample(random_tensor({2048, 3}, 13)).shape(), (Shape{8192, 3}));
  EXPECT_EQ(full.upsample(random_tensor({512, 3}, 14)).shape(), (Shape{2048, 3}));
  EXPECT_THROW(full.upsample(random_tensor({7, 3}, 15)), ContractViolation);
}

TEST(Stage2Upsample, ZeroOffsetsReturnDuplicatedParents) {
  Stage2Generator g(small_config(3), 16);
  for (auto& t : g.params().tensors()) std::fill(t.data().begin(), t.data().end(), 0.0f);
  const Tensor x = random_tensor({10, 3}, 17);
  const Tensor y = g.upsample(x);
  for (std::size_t i = 0; i < 30; ++i) {
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(y.at(i, c), x.at(i / 3, c));
  }
}

TEST(Stage2Upsample, PermutationGivesSameMultiset) {
  Stage2Generator g(small_config(), 18);
  const Tensor x = random_tensor({32, 3}, 19);
  Rng rng(20);
  const auto a = sorted_rows(g.upsample(x));
  const auto b = sorted_rows(g.upsample(gather_rows(x, rng.permutation(32))));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(a[i][c], b[i][c], 1e-5);
  }
}

TEST(Stage2Upsample, ChamferGradientWrtExtractorMatchesFiniteDifferences) {
  Stage2Generator g(small_config(2), 21);
  // Enlarge the offsets so the extractor visibly moves the output.
  Tensor head = g.params().get("gen2.recon1.weight");
  for (auto& w : head.data()) w *= 10.0f;
  const Tensor x = random_tensor({8, 3}, 22, 0.5);
  Rng rng(23);
  std::vector<float> target(16 * 3);
  for (auto& v : target) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  const PointCloud gt(target);
  std::vector<Tensor> extractor;
  for (std::size_t i = 0; i < g.params().size(); ++i) {
    if (g.params().names()[i].rfind("gen2.extract", 0) == 0) extractor.push_back(g.params().tensors()[i]);
  }
  ASSERT_FALSE(extractor.empty());
  const auto loss = [&] { return chamfer_loss(g.upsample(x), gt); };
  GradCheckOptions opt;
  opt.step = 1e-3;
  const auto r = check_sampled_gradients("stage2_extractor", loss, extractor, 6, opt);
  EXPECT_LT(r.max_rel_error, 1e-3) << r.elements << " elements";
  RecordProperty("rel_error", std::to_string(r.max_rel_error));
}

}  // namespace
}  // namespace pcup
