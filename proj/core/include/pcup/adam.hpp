#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pcup/tensor.hpp"

namespace pcup {

struct AdamConfig {
  float lr = 1e-4f;
  float beta1 = 0.0f;
  float beta2 = 0.9f;
  float eps = 1e-8f;
};

/// First/second moment buffers, one pair per parameter, plus the shared step
/// counter.
struct AdamState {
  std::vector<std::vector<float>> m;
  std::vector<std::vector<float>> v;
  std::int64_t timestep = 0;
};

/// One bias-corrected Adam update. `grads[i]` may be empty, meaning zero.
void adam_step(std::span<Tensor> params, std::span<const std::span<const float>> grads,
               AdamState& state, const AdamConfig& config);

/// Adam bound to a fixed parameter list; reads gradients from the tensors.
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Tensor> params, AdamConfig config);

  void step();
  void zero_grad();

  const std::vector<Tensor>& params() const { return params_; }
  AdamState& state() { return state_; }
  const AdamState& state() const { return state_; }
  const AdamConfig& config() const { return config_; }
  std::int64_t steps_taken() const { return state_.timestep; }

 private:
  std::vector<Tensor> params_;
  AdamConfig config_;
  AdamState state_;
};

}  // namespace pcup
