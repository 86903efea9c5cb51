#include "pcup/gen_stage1.hpp"

#include <cmath>
#include <string>

#include "pcup/ops.hpp"

namespace pcup {

std::size_t Stage1Config::points() const {
  std::size_t n = 1;
  for (const auto d : degrees) n *= d;
  return n;
}

void Stage1Config::validate() const {
  if (degrees.empty()) throw ContractViolation("stage-I tree needs at least one layer");
  for (const auto d : degrees) {
    if (d < 1) throw ContractViolation("branching degrees must be >= 1");
  }
  if (widths.size() != degrees.size() + 1) {
    throw ContractViolation("stage-I needs " + std::to_string(degrees.size() + 1) + " widths, got " +
                            std::to_string(widths.size()));
  }
  for (const auto w : widths) {
    if (w < 1) throw ContractViolation("stage-I widths must be positive");
  }
  if (widths.back() != 3) throw ContractViolation("stage-I output width must be 3");
  if (support < 1) throw ContractViolation("loop-term support K must be positive");
}

std::vector<std::size_t> default_stage1_widths(std::size_t layers, std::size_t latent) {
  std::vector<std::size_t> w{latent};
  for (std::size_t l = 1; l < layers; ++l) w.push_back(layers >= 3 && l == layers - 1 ? 32 : 64);
  w.push_back(3);
  return w;
}

Tensor branch_points(const Tensor& features, const Tensor& branch, std::size_t degree) {
  if (degree < 1) throw ContractViolation("branch degree must be >= 1");
  const std::size_t w = features.dim(1);
  if (branch.rank() != 2 || branch.dim(0) != w || branch.dim(1) != degree * w) {
    throw ContractViolation("branch matrix " + shape_str(branch.shape()) + " does not fit " +
                            std::to_string(degree) + " branches of width " + std::to_string(w));
  }
  return reshape(matmul(features, branch), {features.dim(0) * degree, w});
}

std::vector<std::size_t> ancestor_indices(const std::vector<std::size_t>& counts, std::size_t layer,
                                          std::size_t depth, std::size_t batch) {
  if (layer >= counts.size() || depth > layer) throw ContractViolation("ancestor depth out of range");
  const std::size_t ratio = counts[layer] / counts[depth];
  std::vector<std::size_t> idx(batch * counts[layer]);
  for (std::size_t r = 0; r < idx.size(); ++r) idx[r] = r / ratio;
  return idx;
}

Tensor gcn_block(const Tensor& points, const std::vector<Tensor>& ancestors,
                 const std::vector<std::vector<std::size_t>>& ancestor_rows, const TreeLayer& layer) {
  if (ancestors.size() != ancestor_rows.size() || ancestors.size() != layer.uplift.size()) {
    throw ContractViolation("gcn_block: " + std::to_string(ancestors.size()) + " ancestor depths, " +
                            std::to_string(ancestor_rows.size()) + " index tables and " +
                            std::to_string(layer.uplift.size()) + " mapping matrices");
  }
  const std::size_t n = points.dim(0);
  Tensor acc = matmul(matmul(points, layer.loop_in), layer.loop_out);
  for (std::size_t j = 0; j < ancestors.size(); ++j) {
    const auto& rows = ancestor_rows[j];
    if (rows.size() != n) throw ContractViolation("gcn_block: ancestor table length mismatch at depth " + std::to_string(j));
    for (const auto r : rows) {
      if (r >= ancestors[j].dim(0)) {
        throw ContractViolation("gcn_block: ancestor row " + std::to_string(r) + " out of range at depth " +
                                std::to_string(j));
      }
    }
    acc = add(acc, gather_rows(matmul(ancestors[j], layer.uplift[j]), rows));
  }
  acc = add(acc, layer.bias);
  return layer.activate ? leaky_relu(acc) : acc;
}

Stage1Generator::Stage1Generator(const Stage1Config& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const auto& w = config_.widths;
  const std::size_t L = config_.layers();
  for (std::size_t l = 1; l <= L; ++l) {
    const std::string p = "gen1.layer" + std::to_string(l);
    const std::size_t in = w[l - 1], out = w[l];
    const bool last = l == L;
    TreeLayer t;
    t.degree = config_.degrees[l - 1];
    t.activate = !last;
    t.branch = params_.add(p + ".branch", init_normal({in, t.degree * in}, std::sqrt(1.0 / in), rng));
    t.loop_in = params_.add(p + ".loop_in", init_normal({in, config_.support}, std::sqrt(1.0 / in), rng));
    const double out_gain = last ? 0.3 : 1.0;
    const double terms = static_cast<double>(l + 1);
    t.loop_out = params_.add(
        p + ".loop_out", init_normal({config_.support, out}, out_gain * std::sqrt(2.0 / (config_.support * terms)), rng));
    for (std::size_t j = 0; j < l; ++j) {
      t.uplift.push_back(params_.add(p + ".uplift" + std::to_string(j),
                                     init_normal({w[j], out}, out_gain * std::sqrt(2.0 / (w[j] * terms)), rng)));
    }
    t.bias = params_.add(p + ".bias", Tensor::zeros({out}));
    layers_.push_back(std::move(t));
  }
}

TreeState Stage1Generator::run(const Tensor& z, const LayerHook& hook) const {
  if (z.rank() != 2 || z.dim(1) != config_.widths[0] || z.dim(0) == 0) {
    throw ContractViolation("stage-I generator expects z of shape [B, " + std::to_string(config_.widths[0]) +
                            "], got " + shape_str(z.shape()));
  }
  TreeState s;
  s.batch = z.dim(0);
  s.counts = {1};
  s.layers.push_back(hook ? hook(0, z) : z);
  for (std::size_t l = 1; l <= layers_.size(); ++l) {
    const auto& layer = layers_[l - 1];
    s.counts.push_back(s.counts.back() * layer.degree);
    const Tensor children = branch_points(s.layers.back(), layer.branch, layer.degree);
    std::vector<std::vector<std::size_t>> rows;
    for (std::size_t j = 0; j < l; ++j) rows.push_back(ancestor_indices(s.counts, l, j, s.batch));
    Tensor next = gcn_block(children, s.layers, rows, layer);
    s.layers.push_back(hook ? hook(l, next) : next);
  }
  return s;
}

Tensor Stage1Generator::forward(const Tensor& z) const { return run(z).layers.back(); }

}  // namespace pcup
