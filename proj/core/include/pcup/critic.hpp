#pragma once

// Permutation-invariant point-cloud critic (shared per-point MLP, max-pool,
// MLP head) and the WGAN gradient penalty.
//
// The penalty needs d/dtheta of ||dD/dx||. The engine is first-order only,
// so the input gradient is written out as an ordinary forward graph: the
// leaky-relu slopes and the max-pool routing are piecewise constant, which
// leaves a chain of matmuls by transposed weights that the tape can
// differentiate once more.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pcup/params.hpp"

namespace pcup {

struct CriticConfig {
  std::vector<std::size_t> point_widths{64, 128, 256};
  std::size_t head_hidden = 128;
};

class Critic {
 public:
  Critic(const CriticConfig& config, std::uint64_t seed, const std::string& name = "critic");

  /// Scalar score of one [N, 3] cloud, shape [1, 1].
  Tensor score(const Tensor& cloud) const;
  /// Scores of several clouds, shape [B, 1].
  Tensor scores(const std::vector<Tensor>& clouds) const;
  /// dD/dx as a [N, 3] tensor that is differentiable w.r.t. the parameters.
  Tensor input_gradient(const Tensor& cloud) const;

  const CriticConfig& config() const { return config_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

 private:
  struct Trace {
    std::vector<Tensor> pre;  // per-point pre-activations
    Tensor pooled;            // [1, last width]
    Tensor head_pre;          // [1, head_hidden]
    Tensor out;               // [1, 1]
  };
  Trace trace(const Tensor& cloud) const;

  CriticConfig config_;
  ParameterSet params_;
  std::vector<Linear> point_;
  Linear head_hidden_;
  Linear head_out_;
};

/// Maps an input cloud to dD/dx as a differentiable graph.
using InputGradientFn = std::function<Tensor(const Tensor& x)>;

struct PenaltyResult {
  Tensor penalty;  // scalar lambda * (||g|| - 1)^2
  double grad_norm = 0.0;
  double epsilon = 0.0;
};

/// x_hat = eps * real + (1 - eps) * fake with one eps ~ U[0, 1) drawn from
/// `rng`; the norm runs over all 3N coordinates.
PenaltyResult gradient_penalty(const InputGradientFn& grad, const Tensor& real, const Tensor& fake,
                               double lambda, Rng& rng);
PenaltyResult gradient_penalty(const Critic& critic, const Tensor& real, const Tensor& fake, double lambda,
                               Rng& rng);

}  // namespace pcup
