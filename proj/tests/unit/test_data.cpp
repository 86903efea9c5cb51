#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "pcup/io.hpp"
#include "pcup/metrics.hpp"
#include "pcup/rng.hpp"
#include "pcup/sampling.hpp"
#include "pcup/synth.hpp"

namespace pcup {
namespace {

namespace fs = std::filesystem;

PointCloud random_cloud(std::size_t n, std::uint64_t seed, float lo = -1.0f, float hi = 1.0f) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<float> dist(lo, hi);
  std::vector<float> xyz(3 * n);
  for (auto& v : xyz) v = dist(gen);
  return PointCloud(std::move(xyz));
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("pcup_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<Point3> sorted_points(const PointCloud& c) {
  std::vector<Point3> pts;
  for (std::size_t i = 0; i < c.size(); ++i) pts.push_back(c[i]);
  std::sort(pts.begin(), pts.end());
  return pts;
}

double min_pairwise(const PointCloud& c) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < c.size(); ++i) {
    for (std::size_t j = i + 1; j < c.size(); ++j) best = std::min(best, squared_distance(c[i], c[j]));
  }
  return best;
}

const ShapeParams kSphere{{1.0, 1.0, 1.0}, {}, 0};

TEST(Synth, UnperturbedSphereHasUnitRadius) {
  SynthOptions opt;
  opt.dense_points = 2048;
  opt.sparse_points = 128;
  const auto s = synth_shape(3, kSphere, opt);
  ASSERT_EQ(s.dense.size(), 2048u);
  ASSERT_EQ(s.sparse.size(), 128u);
  for (std::size_t i = 0; i < s.dense.size(); ++i) {
    const auto p = s.dense[i];
    const double r = std::sqrt(static_cast<double>(p[0]) * p[0] + static_cast<double>(p[1]) * p[1] +
                               static_cast<double>(p[2]) * p[2]);
    EXPECT_NEAR(r, 1.0, 1e-3);
  }
}

TEST(Synth, SameSeedIsBitIdentical) {
  const auto a = synth_shape(42, 1);
  const auto b = synth_shape(42, 1);
  EXPECT_EQ(a.dense, b.dense);
  EXPECT_EQ(a.sparse, b.sparse);
  EXPECT_EQ(a.slice.pixels, b.slice.pixels);
  EXPECT_EQ(sample_meta_json(a), sample_meta_json(b));
  const auto c = synth_shape(43, 1);
  EXPECT_NE(a.dense, c.dense);
}

TEST(Synth, SphereOctantCountsWithinMultinomialBound) {
  SynthOptions opt;
  opt.dense_points = 8192;
  opt.sparse_points = 8;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto s = synth_shape(seed, kSphere, opt);
    std::array<std::size_t, 8> counts{};
    for (std::size_t i = 0; i < s.dense.size(); ++i) {
      const auto p = s.dense[i];
      counts[(p[0] > 0) * 4 + (p[1] > 0) * 2 + (p[2] > 0)]++;
    }
    const double n = static_cast<double>(opt.dense_points);
    const double sigma = std::sqrt(n * (1.0 / 8.0) * (7.0 / 8.0));
    for (const auto c : counts) EXPECT_LE(std::abs(static_cast<double>(c) - n / 8.0), 3.0 * sigma);
  }
}

TEST(Synth, ShapesAreNormalizedAndSparseIsSubset) {
  for (int label = 0; label < 2; ++label) {
    const auto s = synth_shape(100 + label, label);
    double max_r = 0.0;
    for (std::size_t i = 0; i < s.dense.size(); ++i) {
      const auto p = s.dense[i];
      max_r = std::max(max_r, std::sqrt(squared_distance(p, {0, 0, 0})));
    }
    EXPECT_NEAR(max_r, 1.0, 1e-6);
    const auto nn = nearest_neighbors(s.sparse, s.dense);
    for (const double d : nn.sq_dist) EXPECT_EQ(d, 0.0);
    const auto [lo, hi] = std::minmax_element(s.slice.pixels.begin(), s.slice.pixels.end());
    EXPECT_EQ(*lo, 0.0f);
    EXPECT_EQ(*hi, 1.0f);
  }
}

TEST(Synth, BumpyClassDeviatesMoreFromEllipsoid) {
  double smooth = 0.0, bumpy = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (int label = 0; label < 2; ++label) {
      const auto p = draw_shape_params(seed, label);
      double dev = 0.0;
      for (int i = 0; i < 20; ++i) {
        for (int j = 0; j < 40; ++j) {
          dev += std::abs(radial_factor(p, (i + 0.5) * M_PI / 20, (j + 0.5) * M_PI / 20) - 1.0);
        }
      }
      (label == 0 ? smooth : bumpy) += dev;
    }
  }
  EXPECT_GT(bumpy, smooth);
}

TEST(Synth, DegenerateAxesRejected) {
  ShapeParams bad = kSphere;
  bad.axes[1] = 0.0;
  EXPECT_THROW(synth_shape(1, bad), ContractViolation);
  bad.axes[1] = -1.0;
  EXPECT_THROW(synth_shape(1, bad), ContractViolation);
}

TEST(Fps, FullSetIsMultisetEqual) {
  const auto c = random_cloud(50, 1);
  EXPECT_EQ(sorted_points(fps(c, 50)), sorted_points(c));
}

TEST(Fps, SquareCornersPickDiagonal) {
  const PointCloud sq(std::vector<Point3>{{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}});
  EXPECT_EQ(fps_indices(sq, 2), (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(fps_indices(sq, 1), (std::vector<std::size_t>{0}));
  EXPECT_EQ(fps_indices(sq, 1, 3), (std::vector<std::size_t>{3}));
  EXPECT_THROW(fps(sq, 5), ContractViolation);
  EXPECT_THROW(fps(sq, 0), ContractViolation);
}

TEST(Fps, SpreadBeatsRandomSubsets) {
  const auto c = random_cloud(400, 2);
  const double fps_spread = min_pairwise(fps(c, 32));
  Rng rng(5);
  for (int draw = 0; draw < 100; ++draw) {
    const auto idx = rng.sample_without_replacement(c.size(), 32);
    EXPECT_GE(fps_spread, min_pairwise(c.select(idx)));
  }
}

TEST(Subsample, IdentityAtFullSizeAndDeterministic) {
  const auto c = random_cloud(64, 3);
  EXPECT_EQ(random_subsample(c, 64, 9), c);
  const auto a = random_subsample(c, 16, 9);
  EXPECT_EQ(a.size(), 16u);
  EXPECT_EQ(a, random_subsample(c, 16, 9));
  EXPECT_THROW(random_subsample(c, 65, 9), ContractViolation);
}

TEST(Normalize, RoundTripAndInvariants) {
  const auto c = random_cloud(100, 4, 2.0f, 7.0f);
  const auto n = normalize_unit_sphere(c);
  double cx = 0, cy = 0, cz = 0, max_r = 0;
  for (std::size_t i = 0; i < n.cloud.size(); ++i) {
    const auto p = n.cloud[i];
    cx += p[0];
    cy += p[1];
    cz += p[2];
    max_r = std::max(max_r, std::sqrt(squared_distance(p, {0, 0, 0})));
  }
  EXPECT_NEAR(cx / 100, 0.0, 1e-6);
  EXPECT_NEAR(cy / 100, 0.0, 1e-6);
  EXPECT_NEAR(cz / 100, 0.0, 1e-6);
  EXPECT_NEAR(max_r, 1.0, 1e-6);
  const auto back = invert_transform(n.cloud, n.transform);
  for (std::size_t i = 0; i < c.coords().size(); ++i) EXPECT_NEAR(back.coords()[i], c.coords()[i], 1e-5);

  const auto again = normalize_unit_sphere(n.cloud);
  for (std::size_t i = 0; i < c.coords().size(); ++i) {
    EXPECT_NEAR(again.cloud.coords()[i], n.cloud.coords()[i], 1e-6);
  }
}

TEST(Normalize, SinglePointGoesToOrigin) {
  const PointCloud one(std::vector<Point3>{{3.5f, -2.0f, 8.0f}});
  const auto n = normalize_unit_sphere(one);
  EXPECT_EQ(n.cloud[0], (Point3{0, 0, 0}));
  EXPECT_EQ(n.transform.scale, 1.0);
}

TEST(PlyIo, BinaryRoundTripIsBitExact) {
  const auto dir = scratch_dir("ply_bin");
  auto c = random_cloud(257, 6);
  write_cloud(dir / "a.ply", c, CloudFormat::kPlyBinary);
  const auto back = read_cloud(dir / "a.ply");
  ASSERT_EQ(back.size(), c.size());
  EXPECT_EQ(std::memcmp(back.coords().data(), c.coords().data(), c.coords().size_bytes()), 0);
  EXPECT_FALSE(back.has_attribute());
}

TEST(PlyIo, AsciiRoundTripWithErrorAttribute) {
  const auto dir = scratch_dir("ply_ascii");
  auto c = random_cloud(64, 7);
  std::vector<float> err(64);
  for (std::size_t i = 0; i < err.size(); ++i) err[i] = 1e-4f * static_cast<float>(i) / 3.0f;
  c.set_attribute(err);
  for (const auto fmt : {CloudFormat::kPlyAscii, CloudFormat::kPlyBinary}) {
    write_cloud(dir / "b.ply", c, fmt);
    const auto back = read_cloud(dir / "b.ply");
    EXPECT_EQ(back, c);
  }
}

TEST(PlyIo, MalformedInputsReportLocation) {
  try {
    parse_ply("ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\n"
              "property float z\nend_header\n0 0 0\n1 2\n",
              "t.ply");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("t.ply:9"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_ply("ply\nformat binary_little_endian 1.0\nelement vertex 4\nproperty float x\n"
                         "property float y\nproperty float z\nend_header\nabc"),
               ParseError);
  EXPECT_THROW(parse_ply("ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nend_header\n0\n"),
               UnsupportedFormat);
  EXPECT_THROW(parse_ply("ply\nformat binary_big_endian 1.0\nend_header\n"), UnsupportedFormat);
  EXPECT_THROW(parse_ply("ply\nformat ascii 1.0\nelement vertex 1\nbogus\nend_header\n"), ParseError);
}

TEST(PlyIo, ReadsForeignLayouts) {
  // Doubles, extra properties and a trailing face element.
  std::string bytes =
      "ply\nformat binary_little_endian 1.0\ncomment made elsewhere\nelement vertex 2\n"
      "property double x\nproperty double y\nproperty double z\nproperty uchar red\n"
      "element face 0\nproperty list uchar int vertex_indices\nend_header\n";
  for (const double v : {1.0, 2.0, 3.0}) bytes.append(reinterpret_cast<const char*>(&v), 8);
  bytes.push_back('\x7f');
  for (const double v : {-1.0, 0.5, 0.25}) bytes.append(reinterpret_cast<const char*>(&v), 8);
  bytes.push_back('\x01');
  const auto c = parse_ply(bytes);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0], (Point3{1, 2, 3}));
  EXPECT_EQ(c[1], (Point3{-1, 0.5f, 0.25f}));
}

TEST(XyzIo, ParsesCommentsAndRoundTrips) {
  const auto c = parse_xyz("# header\n0 0 0\n\n1.5 -2 3e-2  # trailing\n");
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0], (Point3{0, 0, 0}));
  EXPECT_EQ(c[1], (Point3{1.5f, -2.0f, 3e-2f}));
  const auto dir = scratch_dir("xyz");
  const auto r = random_cloud(100, 8);
  write_cloud(dir / "r.xyz", r);
  EXPECT_EQ(read_cloud(dir / "r.xyz"), r);
  try {
    parse_xyz("0 0 0\n1 x 2\n", "p.xyz");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("p.xyz:2"), std::string::npos);
  }
}

TEST(PgmIo, RoundTripQuantized) {
  const auto dir = scratch_dir("pgm");
  GrayImage img{5, 3, {}};
  for (std::size_t i = 0; i < 15; ++i) img.pixels.push_back(static_cast<float>(i) / 14.0f);
  write_pgm(dir / "x.pgm", img);
  const auto back = read_pgm(dir / "x.pgm");
  ASSERT_EQ(back.width, 5u);
  ASSERT_EQ(back.height, 3u);
  for (std::size_t i = 0; i < 15; ++i) EXPECT_NEAR(back.pixels[i], img.pixels[i], 0.5 / 255.0 + 1e-7);
  std::ofstream(dir / "bad.pgm") << "P5\n5 3\n255\nab";
  EXPECT_THROW(read_pgm(dir / "bad.pgm"), ParseError);
}

TEST(Dataset, WriteThenLoad) {
  const auto dir = scratch_dir("dataset");
  DatasetSpec spec;
  spec.train = 3;
  spec.test = 2;
  spec.seed = 11;
  spec.options.dense_points = 256;
  spec.options.sparse_points = 64;
  write_dataset(dir, spec);
  EXPECT_TRUE(fs::exists(dir / "samples" / "000000" / "meta.json"));
  const auto ds = load_dataset(dir);
  ASSERT_EQ(ds.train.size(), 3u);
  ASSERT_EQ(ds.test.size(), 2u);
  EXPECT_EQ(ds.train[1].label, 1);
  EXPECT_EQ(ds.test[0].dense.size(), 256u);
  EXPECT_EQ(ds.test[0].sparse.size(), 64u);
  EXPECT_EQ(ds.test[0].slice.width, 64u);
  const auto direct = synth_shape(Rng::derive(11, 3), 0, spec.options);
  EXPECT_EQ(ds.test[0].dense, direct.dense);
}

}  // namespace
}  // namespace pcup
