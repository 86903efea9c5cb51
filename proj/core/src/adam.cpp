#include "pcup/adam.hpp"

#include <cmath>
#include <string>

namespace pcup {

void adam_step(std::span<Tensor> params, std::span<const std::span<const float>> grads,
               AdamState& state, const AdamConfig& config) {
  if (grads.size() != params.size()) {
    throw ContractViolation("adam_step: " + std::to_string(params.size()) + " params but " +
                            std::to_string(grads.size()) + " gradients");
  }
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.numel(), 0.0f);
      state.v.emplace_back(p.numel(), 0.0f);
    }
  }
  if (state.m.size() != params.size()) {
    throw ContractViolation("adam_step: optimizer state does not match parameter list");
  }
  ++state.timestep;
  const double t = static_cast<double>(state.timestep);
  const float c1 = static_cast<float>(1.0 - std::pow(static_cast<double>(config.beta1), t));
  const float c2 = static_cast<float>(1.0 - std::pow(static_cast<double>(config.beta2), t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto data = params[k].data();
    auto& m = state.m[k];
    auto& v = state.v[k];
    if (m.size() != data.size() || (!grads[k].empty() && grads[k].size() != data.size())) {
      throw ContractViolation("adam_step: shape mismatch for parameter " + std::to_string(k) +
                              " " + shape_str(params[k].shape()));
    }
    const std::span<const float> g = grads[k];
    for (std::size_t i = 0; i < data.size(); ++i) {
      const float gi = g.empty() ? 0.0f : g[i];
      m[i] = config.beta1 * m[i] + (1.0f - config.beta1) * gi;
      v[i] = config.beta2 * v[i] + (1.0f - config.beta2) * gi * gi;
      const float m_hat = m[i] / c1;
      const float v_hat = v[i] / c2;
      data[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
  }
}

Adam::Adam(std::vector<Tensor> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {}

void Adam::step() {
  std::vector<std::span<const float>> grads;
  grads.reserve(params_.size());
  for (const auto& p : params_) grads.push_back(p.grad());
  adam_step(params_, grads, state_, config_);
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace pcup
