#include "pcup/critic.hpp"

#include <string>

#include "pcup/ops.hpp"

namespace pcup {
namespace {

// Derivative of leaky_relu at each pre-activation, as a constant tensor.
Tensor slope_mask(const Tensor& pre) {
  std::vector<float> m(pre.numel());
  const auto d = pre.data();
  const float k = static_cast<float>(kLeakySlope);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = d[i] > 0.0f ? 1.0f : k;
  return Tensor(pre.shape(), std::move(m));
}

// One-hot rows of the first maximum in every column, matching reduce_max.
Tensor argmax_mask(const Tensor& x) {
  const std::size_t n = x.dim(0), c = x.dim(1);
  const auto d = x.data();
  std::vector<float> m(n * c, 0.0f);
  for (std::size_t j = 0; j < c; ++j) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if (d[i * c + j] > d[best * c + j]) best = i;
    }
    m[best * c + j] = 1.0f;
  }
  return Tensor({n, c}, std::move(m));
}

void require_cloud(const Tensor& cloud) {
  if (cloud.rank() != 2 || cloud.dim(1) != 3 || cloud.dim(0) == 0) {
    throw ContractViolation("critic expects an [N, 3] cloud, got " + shape_str(cloud.shape()));
  }
}

}  // namespace

Critic::Critic(const CriticConfig& config, std::uint64_t seed, const std::string& name) : config_(config) {
  if (config_.point_widths.empty() || config_.head_hidden == 0) throw ContractViolation("critic widths must be non-empty");
  Rng rng(seed);
  std::size_t in = 3;
  for (std::size_t i = 0; i < config_.point_widths.size(); ++i) {
    point_.push_back(make_linear(params_, name + ".point" + std::to_string(i), in, config_.point_widths[i], rng));
    in = config_.point_widths[i];
  }
  head_hidden_ = make_linear(params_, name + ".head0", in, config_.head_hidden, rng);
  head_out_ = make_linear(params_, name + ".head1", config_.head_hidden, 1, rng, 0.5);
}

Critic::Trace Critic::trace(const Tensor& cloud) const {
  require_cloud(cloud);
  Trace t;
  Tensor h = cloud;
  for (const auto& layer : point_) {
    t.pre.push_back(layer(h));
    h = leaky_relu(t.pre.back());
  }
  t.pooled = reshape(reduce_max(h, 0), {1, h.dim(1)});
  t.head_pre = head_hidden_(t.pooled);
  t.out = head_out_(leaky_relu(t.head_pre));
  return t;
}

Tensor Critic::score(const Tensor& cloud) const { return trace(cloud).out; }

Tensor Critic::scores(const std::vector<Tensor>& clouds) const {
  if (clouds.empty()) throw ContractViolation("critic needs at least one cloud");
  std::vector<Tensor> s;
  s.reserve(clouds.size());
  for (const auto& c : clouds) s.push_back(score(c));
  return s.size() == 1 ? s.front() : concat(s, 0);
}

Tensor Critic::input_gradient(const Tensor& cloud) const {
  const Trace t = trace(cloud);
  Tensor g = mul(transpose(head_out_.weight), slope_mask(t.head_pre));
  g = matmul(g, transpose(head_hidden_.weight));
  // Route the pooled gradient to the winning point of every channel.
  const Tensor last = leaky_relu(t.pre.back());
  g = mul(argmax_mask(last), g);
  for (std::size_t i = point_.size(); i-- > 0;) {
    g = matmul(mul(g, slope_mask(t.pre[i])), transpose(point_[i].weight));
  }
  return g;
}

PenaltyResult gradient_penalty(const InputGradientFn& grad, const Tensor& real, const Tensor& fake,
                               double lambda, Rng& rng) {
  if (real.shape() != fake.shape()) {
    throw ContractViolation("gradient penalty needs equal shapes, got " + shape_str(real.shape()) + " and " +
                            shape_str(fake.shape()));
  }
  if (!(lambda >= 0.0)) throw ContractViolation("gradient penalty weight must be >= 0");
  PenaltyResult r;
  r.epsilon = rng.uniform();
  Tensor x_hat;
  {
    NoGradGuard guard;
    x_hat = add(mul_scalar(real, r.epsilon), mul_scalar(fake, 1.0 - r.epsilon));
  }
  const Tensor norm = l2_norm(grad(x_hat));
  r.grad_norm = norm.item();
  r.penalty = mul_scalar(square(add_scalar(norm, -1.0)), lambda);
  return r;
}

PenaltyResult gradient_penalty(const Critic& critic, const Tensor& real, const Tensor& fake, double lambda,
                               Rng& rng) {
  return gradient_penalty([&critic](const Tensor& x) { return critic.input_gradient(x); }, real, fake, lambda,
                          rng);
}

}  // namespace pcup
