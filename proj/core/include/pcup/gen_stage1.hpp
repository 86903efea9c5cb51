#pragma once

// Tree-structured graph-convolution generator: a latent vector is the root
// point; every layer branches each point into d_l children and then updates
// each child from itself and its whole ancestor chain.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "pcup/params.hpp"

namespace pcup {

struct Stage1Config {
  std::vector<std::size_t> degrees{1, 2, 2, 4, 16};
  /// widths[0] is the latent size; widths[l] the feature width after layer l.
  std::vector<std::size_t> widths{96, 64, 64, 64, 32, 3};
  std::size_t support = 10;  // hidden width K of the loop term

  std::size_t layers() const { return degrees.size(); }
  std::size_t points() const;
  void validate() const;
};

/// Hidden width 64 throughout, 32 before the output when there are at
/// least three layers, then 3.
std::vector<std::size_t> default_stage1_widths(std::size_t layers, std::size_t latent);

/// Parameters of one layer: branching maps, loop term, ancestor maps, bias.
struct TreeLayer {
  std::size_t degree = 1;
  Tensor branch;               // [w_in, degree * w_in], column block j is V_j
  Tensor loop_in;              // [w_in, K]
  Tensor loop_out;             // [K, w_out]
  std::vector<Tensor> uplift;  // U_j: [w_j, w_out] for ancestor depth j
  Tensor bias;                 // [w_out]
  bool activate = true;
};

/// Child rows n*d .. n*d+d-1 hold V_1 p_n .. V_d p_n.
Tensor branch_points(const Tensor& features, const Tensor& branch, std::size_t degree);

/// Row index of the depth-`depth` ancestor of every point at depth `layer`,
/// given cumulative point counts per depth (count[0] = 1 per tree).
std::vector<std::size_t> ancestor_indices(const std::vector<std::size_t>& counts, std::size_t layer,
                                          std::size_t depth, std::size_t batch);

/// sigma(F_K(p) + sum_j U_j q_j + b). `ancestors[j]` holds depth-j features
/// and `ancestor_rows[j]` maps every point to its row there.
Tensor gcn_block(const Tensor& points, const std::vector<Tensor>& ancestors,
                 const std::vector<std::vector<std::size_t>>& ancestor_rows, const TreeLayer& layer);

struct TreeState {
  /// layers[0] is the root [B, w_0]; layers[l] is [B * prod(d_1..d_l), w_l].
  std::vector<Tensor> layers;
  std::vector<std::size_t> counts;  // points per tree at each depth
  std::size_t batch = 1;
};

class Stage1Generator {
 public:
  /// Called on every layer's output; may return a modified tensor.
  using LayerHook = std::function<Tensor(std::size_t layer, const Tensor& features)>;

  Stage1Generator(const Stage1Config& config, std::uint64_t seed);

  TreeState run(const Tensor& z, const LayerHook& hook = {}) const;
  /// [B * N1, 3] with tree b occupying rows b*N1 .. (b+1)*N1-1.
  Tensor forward(const Tensor& z) const;

  const Stage1Config& config() const { return config_; }
  const std::vector<TreeLayer>& layers() const { return layers_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

 private:
  Stage1Config config_;
  ParameterSet params_;
  std::vector<TreeLayer> layers_;
};

}  // namespace pcup
