#include "pcup/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include <nlohmann/json.hpp>

#include "pcup/rng.hpp"
#include "pcup/sampling.hpp"

namespace pcup {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;

double factorial_ratio(int l, int m) {
  // (l - m)! / (l + m)!
  double r = 1.0;
  for (int k = l - m + 1; k <= l + m; ++k) r /= k;
  return r;
}

// Orthonormal real spherical harmonic.
double real_harmonic(int l, int m, double theta, double phi) {
  const int am = std::abs(m);
  const double norm = std::sqrt((2.0 * l + 1.0) / (4.0 * kPi) * factorial_ratio(l, am));
  const double p = std::assoc_legendre(static_cast<unsigned>(l), static_cast<unsigned>(am), std::cos(theta));
  if (m == 0) return norm * p;
  const double trig = m > 0 ? std::cos(m * phi) : std::sin(am * phi);
  return std::numbers::sqrt2 * norm * p * trig;
}

std::array<double, 3> surface_point(const ShapeParams& s, double theta, double phi) {
  const double r = radial_factor(s, theta, phi);
  return {s.axes[0] * r * std::sin(theta) * std::cos(phi), s.axes[1] * r * std::sin(theta) * std::sin(phi),
          s.axes[2] * r * std::cos(theta)};
}

// Surface area element divided by the unit-sphere area element sin(theta).
double area_ratio(const ShapeParams& s, double theta, double phi) {
  constexpr double h = 1e-6;
  const auto tp = surface_point(s, theta + h, phi), tm = surface_point(s, theta - h, phi);
  const auto pp = surface_point(s, theta, phi + h), pm = surface_point(s, theta, phi - h);
  std::array<double, 3> dt{}, dp{};
  for (int a = 0; a < 3; ++a) {
    dt[a] = (tp[a] - tm[a]) / (2 * h);
    dp[a] = (pp[a] - pm[a]) / (2 * h);
  }
  const double cx = dt[1] * dp[2] - dt[2] * dp[1];
  const double cy = dt[2] * dp[0] - dt[0] * dp[2];
  const double cz = dt[0] * dp[1] - dt[1] * dp[0];
  return std::sqrt(cx * cx + cy * cy + cz * cz) / std::sin(theta);
}

template <class Fn>
void for_grid(Fn&& fn) {
  constexpr int kTheta = 48, kPhi = 96;
  for (int i = 0; i < kTheta; ++i) {
    const double theta = (i + 0.5) * kPi / kTheta;
    for (int j = 0; j < kPhi; ++j) fn(theta, (j + 0.5) * 2.0 * kPi / kPhi);
  }
}

void validate(const ShapeParams& s) {
  for (const double a : s.axes) {
    if (!(a > 0.0) || !std::isfinite(a)) throw ContractViolation("shape axes must be positive and finite");
  }
  for (const auto& t : s.terms) {
    if (t.l < 0 || std::abs(t.m) > t.l) throw ContractViolation("invalid harmonic term (l, m)");
  }
  double min_r = std::numeric_limits<double>::infinity();
  for_grid([&](double th, double ph) { min_r = std::min(min_r, radial_factor(s, th, ph)); });
  if (!(min_r > 0.0)) throw ContractViolation("harmonic perturbation makes the surface radius non-positive");
}

GrayImage render_slice(const ShapeParams& s, double scale, const SynthOptions& o) {
  GrayImage img;
  img.width = img.height = o.image_size;
  img.pixels.assign(o.image_size * o.image_size, 0.0f);
  const double a = s.axes[0], b = s.axes[1];
  const double pixel = 2.0 / static_cast<double>(o.image_size);
  const double sub = pixel / static_cast<double>(o.supersample);
  for (std::size_t row = 0; row < o.image_size; ++row) {
    for (std::size_t col = 0; col < o.image_size; ++col) {
      std::size_t inside = 0;
      for (std::size_t sy = 0; sy < o.supersample; ++sy) {
        for (std::size_t sx = 0; sx < o.supersample; ++sx) {
          const double x = (-1.0 + col * pixel + (sx + 0.5) * sub) * scale;
          const double y = (1.0 - row * pixel - (sy + 0.5) * sub) * scale;
          const double alpha = std::atan2(y, x);
          const double phi = std::atan2(a * std::sin(alpha), b * std::cos(alpha));
          const double boundary = radial_factor(s, kPi / 2, phi) *
                                  std::hypot(a * std::cos(phi), b * std::sin(phi));
          if (std::hypot(x, y) <= boundary) ++inside;
        }
      }
      img.pixels[row * o.image_size + col] =
          static_cast<float>(static_cast<double>(inside) / static_cast<double>(o.supersample * o.supersample));
    }
  }
  return img;
}

std::string sample_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu", index);
  return buf;
}

}  // namespace

double radial_factor(const ShapeParams& params, double theta, double phi) {
  double r = 1.0;
  for (const auto& t : params.terms) r += t.amplitude * real_harmonic(t.l, t.m, theta, phi);
  return r;
}

ShapeParams draw_shape_params(std::uint64_t seed, int label) {
  if (label != 0 && label != 1) throw ContractViolation("shape label must be 0 or 1");
  Rng rng(Rng::derive(seed, 0x5a4e));
  ShapeParams s;
  s.label = label;
  s.axes = {rng.uniform(0.85, 1.0), rng.uniform(0.7, 0.9), rng.uniform(0.6, 0.8)};
  const int max_l = label == 0 ? 2 : 4;
  const double sigma = label == 0 ? 0.12 : 0.22;
  for (int l = 2; l <= max_l; ++l) {
    for (int m = -l; m <= l; ++m) s.terms.push_back({l, m, sigma * rng.normal()});
  }
  // Keep the surface well away from self-intersection.
  double min_r = std::numeric_limits<double>::infinity();
  for_grid([&](double th, double ph) { min_r = std::min(min_r, radial_factor(s, th, ph)); });
  if (min_r < 0.5) {
    const double shrink = 0.5 / (1.0 - min_r);
    for (auto& t : s.terms) t.amplitude *= shrink;
  }
  return s;
}

SyntheticSample synth_shape(std::uint64_t seed, const ShapeParams& params, const SynthOptions& options) {
  validate(params);
  if (options.sparse_points < 1 || options.sparse_points > options.dense_points) {
    throw ContractViolation("sparse point count must be in [1, dense point count]");
  }
  if (options.image_size < 1 || options.supersample < 1) throw ContractViolation("image size must be positive");

  double max_ratio = 0.0;
  for_grid([&](double th, double ph) { max_ratio = std::max(max_ratio, area_ratio(params, th, ph)); });
  const double bound = 1.1 * max_ratio;

  // Directions uniform on the sphere, thinned by the area ratio.
  Rng rng(Rng::derive(seed, 0xd3e5));
  std::vector<std::array<double, 3>> pts;
  pts.reserve(options.dense_points);
  while (pts.size() < options.dense_points) {
    const double u = rng.uniform(-1.0, 1.0);
    const double phi = rng.uniform(0.0, 2.0 * kPi);
    const double accept = rng.uniform();
    const double theta = std::acos(u);
    if (std::sin(theta) < 1e-9) continue;
    if (accept * bound > area_ratio(params, theta, phi)) continue;
    pts.push_back(surface_point(params, theta, phi));
  }
  double max_sq = 0.0;
  for (const auto& p : pts) max_sq = std::max(max_sq, p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
  const double scale = std::sqrt(max_sq);

  std::vector<float> xyz;
  xyz.reserve(3 * pts.size());
  for (const auto& p : pts) {
    for (const double v : p) xyz.push_back(static_cast<float>(v / scale));
  }

  SyntheticSample out;
  out.params = params;
  out.seed = seed;
  out.scale = scale;
  out.dense = PointCloud(std::move(xyz));
  out.sparse = fps(out.dense, options.sparse_points);
  out.slice = render_slice(params, scale, options);
  return out;
}

SyntheticSample synth_shape(std::uint64_t seed, int label, const SynthOptions& options) {
  return synth_shape(seed, draw_shape_params(seed, label), options);
}

std::string sample_meta_json(const SyntheticSample& sample) {
  json terms = json::array();
  for (const auto& t : sample.params.terms) terms.push_back({{"l", t.l}, {"m", t.m}, {"amplitude", t.amplitude}});
  const json meta = {{"seed", sample.seed},
                     {"label", sample.params.label},
                     {"axes", sample.params.axes},
                     {"harmonics", terms},
                     {"scale", sample.scale},
                     {"dense_points", sample.dense.size()},
                     {"sparse_points", sample.sparse.size()}};
  return meta.dump(2) + "\n";
}

void write_dataset(const fs::path& dir, const DatasetSpec& spec) {
  if (spec.train + spec.test == 0) throw ContractViolation("dataset must contain at least one sample");
  json train = json::array(), test = json::array();
  const std::size_t total = spec.train + spec.test;
  for (std::size_t i = 0; i < total; ++i) {
    const bool is_train = i < spec.train;
    const std::size_t local = is_train ? i : i - spec.train;
    const int label = static_cast<int>(local % 2);
    const auto sample = synth_shape(Rng::derive(spec.seed, i), label, spec.options);
    const std::string id = sample_id(i);
    const fs::path sdir = dir / "samples" / id;
    fs::create_directories(sdir);
    write_pgm(sdir / "slice.pgm", sample.slice);
    write_cloud(sdir / "dense.ply", sample.dense, CloudFormat::kPlyBinary);
    write_cloud(sdir / "sparse.ply", sample.sparse, CloudFormat::kPlyBinary);
    write_file_atomic(sdir / "meta.json", sample_meta_json(sample));
    (is_train ? train : test).push_back(id);
  }
  const json index = {{"seed", spec.seed},
                      {"dense_points", spec.options.dense_points},
                      {"sparse_points", spec.options.sparse_points},
                      {"image_size", spec.options.image_size},
                      {"train", train},
                      {"test", test}};
  write_file_atomic(dir / "dataset.json", index.dump(2) + "\n");
}

Dataset load_dataset(const fs::path& dir) {
  const fs::path index_path = dir / "dataset.json";
  json index;
  try {
    index = json::parse(read_file(index_path));
  } catch (const json::exception& e) {
    throw ParseError(index_path.string() + ": " + e.what());
  }
  auto load_split = [&](const char* key) {
    std::vector<DatasetEntry> out;
    if (!index.contains(key) || !index[key].is_array()) {
      throw ParseError(index_path.string() + ": missing '" + key + "' list");
    }
    for (const auto& id_json : index[key]) {
      DatasetEntry e;
      e.id = id_json.get<std::string>();
      const fs::path sdir = dir / "samples" / e.id;
      e.slice = read_pgm(sdir / "slice.pgm");
      e.dense = read_cloud(sdir / "dense.ply");
      e.sparse = read_cloud(sdir / "sparse.ply");
      try {
        e.label = json::parse(read_file(sdir / "meta.json")).at("label").get<int>();
      } catch (const json::exception& ex) {
        throw ParseError((sdir / "meta.json").string() + ": " + ex.what());
      }
      out.push_back(std::move(e));
    }
    return out;
  };
  Dataset ds;
  ds.train = load_split("train");
  ds.test = load_split("test");
  return ds;
}

}  // namespace pcup
