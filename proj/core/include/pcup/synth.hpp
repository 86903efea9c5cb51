#pragma once

// Synthetic closed surfaces: ellipsoids with low-order spherical-harmonic
// radial perturbations, rendered as a z = 0 silhouette image plus dense and
// sparse surface samples.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pcup/io.hpp"
#include "pcup/point_cloud.hpp"

namespace pcup {

struct HarmonicTerm {
  int l = 0;
  int m = 0;  // -l..l; negative m selects the sine component
  double amplitude = 0.0;
};

struct ShapeParams {
  std::array<double, 3> axes{1.0, 1.0, 1.0};
  std::vector<HarmonicTerm> terms;
  int label = 0;
};

struct SynthOptions {
  std::size_t dense_points = 1024;
  std::size_t sparse_points = 256;
  std::size_t image_size = 64;
  std::size_t supersample = 4;
};

struct SyntheticSample {
  ShapeParams params;
  std::uint64_t seed = 0;
  GrayImage slice;
  PointCloud dense;
  PointCloud sparse;
  double scale = 1.0;  // surface coordinates were divided by this
};

/// Random shape for a class: 0 is smooth (degree <= 2), 1 is bumpy
/// (degree <= 4).
ShapeParams draw_shape_params(std::uint64_t seed, int label);

/// Radius multiplier 1 + sum of terms at polar angle theta, azimuth phi.
double radial_factor(const ShapeParams& params, double theta, double phi);

/// Deterministic sample of the given surface. The dense cloud is
/// area-uniform; the sparse cloud is its farthest-point subset. Both are
/// centred on the origin (the surface's frame) and scaled so the largest
/// dense radius is 1.
SyntheticSample synth_shape(std::uint64_t seed, const ShapeParams& params, const SynthOptions& options = {});
/// Draws parameters for `label` from `seed`, then samples.
SyntheticSample synth_shape(std::uint64_t seed, int label, const SynthOptions& options = {});

std::string sample_meta_json(const SyntheticSample& sample);

struct DatasetSpec {
  std::size_t train = 200;
  std::size_t test = 40;
  std::uint64_t seed = 0;
  SynthOptions options;
};

/// Writes samples/<id>/{slice.pgm,dense.ply,sparse.ply,meta.json} and a
/// dataset.json index with the split.
void write_dataset(const std::filesystem::path& dir, const DatasetSpec& spec);

struct DatasetEntry {
  std::string id;
  int label = 0;
  GrayImage slice;
  PointCloud dense;
  PointCloud sparse;
};

struct Dataset {
  std::vector<DatasetEntry> train;
  std::vector<DatasetEntry> test;
};

Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace pcup
