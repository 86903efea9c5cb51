#include "pcup/gen_stage2.hpp"

#include <string>

#include "pcup/ops.hpp"

namespace pcup {

void UpsampleConfig::validate() const {
  if (ratio < 2) throw ContractViolation("upsampling ratio must be >= 2, got " + std::to_string(ratio));
  if (feature_width < 8) throw ContractViolation("feature width C must be >= 8, got " + std::to_string(feature_width));
  if (growth < 1 || dense_blocks < 1 || support < 1 || recon_hidden < 1) {
    throw ContractViolation("stage-II widths must be positive");
  }
}

// Row-major [N, rC] and [rN, C] share the same element order, so the index
// map is a reshape.
Tensor shuffle(const Tensor& features, std::size_t ratio) {
  if (ratio < 1 || features.rank() != 2 || features.dim(1) % ratio != 0) {
    throw ContractViolation("shuffle: " + shape_str(features.shape()) + " columns not divisible by ratio " +
                            std::to_string(ratio));
  }
  return reshape(features, {features.dim(0) * ratio, features.dim(1) / ratio});
}

Tensor unshuffle(const Tensor& features, std::size_t ratio) {
  if (ratio < 1 || features.rank() != 2 || features.dim(0) % ratio != 0) {
    throw ContractViolation("unshuffle: " + shape_str(features.shape()) + " rows not divisible by ratio " +
                            std::to_string(ratio));
  }
  return reshape(features, {features.dim(0) / ratio, features.dim(1) * ratio});
}

Stage2Generator::Stage2Generator(const UpsampleConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const std::size_t c = config_.feature_width;
  std::size_t width = 3;
  for (std::size_t k = 0; k < config_.dense_blocks; ++k) {
    dense_.push_back(make_linear(params_, "gen2.extract.dense" + std::to_string(k), width, config_.growth, rng));
    width += config_.growth;
  }
  fuse_ = make_linear(params_, "gen2.extract.fuse", 2 * width, c, rng);
  const std::size_t rc = config_.ratio * c;
  expand_in_ = make_linear(params_, "gen2.expand.loop_in", c, config_.support, rng, 1.0, false);
  expand_out_ = make_linear(params_, "gen2.expand.loop_out", config_.support, rc, rng, 0.7);
  expand_self_ = make_linear(params_, "gen2.expand.parent", c, rc, rng, 0.7, false);
  recon_hidden_ = make_linear(params_, "gen2.recon0", c, config_.recon_hidden, rng);
  // Offsets start small so the initial output hugs the parent points.
  recon_out_ = make_linear(params_, "gen2.recon1", config_.recon_hidden, 3, rng, 0.1);
}

Tensor Stage2Generator::extract_features(const Tensor& cloud) const {
  if (cloud.rank() != 2 || cloud.dim(1) != 3 || cloud.dim(0) == 0) {
    throw ContractViolation("stage-II expects an [N, 3] cloud, got " + shape_str(cloud.shape()));
  }
  std::vector<Tensor> parts{cloud};
  for (const auto& layer : dense_) {
    const Tensor in = parts.size() == 1 ? parts.front() : concat(parts, 1);
    parts.push_back(leaky_relu(layer(in)));
  }
  const Tensor local = concat(parts, 1);
  const std::size_t n = local.dim(0), w = local.dim(1);
  const Tensor context = reshape(reduce_max(local, 0), {1, w});
  const std::vector<std::size_t> zeros(n, 0);
  return leaky_relu(fuse_(concat(std::vector<Tensor>{local, gather_rows(context, zeros)}, 1)));
}

Tensor Stage2Generator::upsample_features(const Tensor& features) const {
  if (features.rank() != 2 || features.dim(1) != config_.feature_width) {
    throw ContractViolation("upsample_features expects [N, " + std::to_string(config_.feature_width) + "], got " +
                            shape_str(features.shape()));
  }
  // Loop term plus the parent-row term; each row only sees itself.
  const Tensor widened = leaky_relu(add(expand_out_(expand_in_(features)), expand_self_(features)));
  return shuffle(widened, config_.ratio);
}

Tensor Stage2Generator::reconstruct_coords(const Tensor& features) const {
  if (features.rank() != 2 || features.dim(1) != config_.feature_width) {
    throw ContractViolation("reconstruct_coords expects [M, " + std::to_string(config_.feature_width) + "], got " +
                            shape_str(features.shape()));
  }
  return recon_out_(leaky_relu(recon_hidden_(features)));
}

Tensor Stage2Generator::upsample(const Tensor& cloud) const {
  if (cloud.rank() != 2 || cloud.dim(1) != 3 || cloud.dim(0) < 8) {
    throw ContractViolation("upsample needs an [N >= 8, 3] cloud, got " + shape_str(cloud.shape()));
  }
  const std::size_t n = cloud.dim(0), r = config_.ratio;
  const Tensor offsets = reconstruct_coords(upsample_features(extract_features(cloud)));
  std::vector<std::size_t> parent(n * r);
  for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = i / r;
  return add(offsets, gather_rows(cloud, parent));
}

}  // namespace pcup
