#pragma once

// Upsampling generator: densely connected per-point feature extraction with
// a global max-pooled context, per-point feature expansion to r*C followed by
// a shuffle into r child rows, and two-layer coordinate regression added to
// the parent point.

#include <cstddef>
#include <cstdint>

#include "pcup/params.hpp"

namespace pcup {

struct UpsampleConfig {
  std::size_t ratio = 4;
  std::size_t feature_width = 64;  // C
  std::size_t growth = 24;
  std::size_t dense_blocks = 3;
  std::size_t support = 10;        // hidden width of the expansion loop term
  std::size_t recon_hidden = 32;

  void validate() const;
};

/// out[n*r + s, c] = F[n, s*C + c]. Throws when columns are not divisible by r.
Tensor shuffle(const Tensor& features, std::size_t ratio);
/// Inverse of shuffle: [rN, C] back to [N, rC].
Tensor unshuffle(const Tensor& features, std::size_t ratio);

class Stage2Generator {
 public:
  Stage2Generator(const UpsampleConfig& config, std::uint64_t seed);

  /// [N, 3] -> [N, C].
  Tensor extract_features(const Tensor& cloud) const;
  /// [N, C] -> [rN, C]; child rows n*r .. n*r+r-1 depend only on row n.
  Tensor upsample_features(const Tensor& features) const;
  /// [M, C] -> [M, 3], row by row.
  Tensor reconstruct_coords(const Tensor& features) const;
  /// [N, 3] -> [rN, 3]: reconstructed offsets plus the parent coordinates.
  Tensor upsample(const Tensor& cloud) const;

  const UpsampleConfig& config() const { return config_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

 private:
  UpsampleConfig config_;
  ParameterSet params_;
  std::vector<Linear> dense_;
  Linear fuse_;
  Linear expand_in_;
  Linear expand_out_;
  Linear expand_self_;
  Linear recon_hidden_;
  Linear recon_out_;
};

}  // namespace pcup
