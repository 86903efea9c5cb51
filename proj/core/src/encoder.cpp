#include "pcup/encoder.hpp"

#include <algorithm>
#include <string>

#include "pcup/ops.hpp"

namespace pcup {

Tensor image_tensor(const GrayImage& image) {
  if (image.pixels.size() != image.width * image.height || image.pixels.empty()) {
    throw ContractViolation("image pixel count does not match its dimensions");
  }
  return Tensor({image.width * image.height, 1}, image.pixels);
}

Encoder::Encoder(const EncoderConfig& config, std::uint64_t seed) : config_(config) {
  if (config_.widths.empty()) throw ContractViolation("encoder needs at least one stage");
  if (config_.latent_dim == 0) throw ContractViolation("latent dimension must be positive");
  std::size_t extent = conv_out_extent(config_.image_size, 3, 2, 1);
  for (std::size_t s = 1; s < config_.widths.size(); ++s) extent = conv_out_extent(extent, 3, 2, 1);
  if (config_.image_size < 1 || extent < 1) throw ContractViolation("image too small for the encoder depth");

  Rng rng(seed);
  // Stride-2 stem, as in standard residual networks.
  stem_ = make_conv(params_, "encoder.stem", 1, config_.widths[0], 3, 2, rng);
  std::size_t in = config_.widths[0];
  for (std::size_t s = 0; s < config_.widths.size(); ++s) {
    const std::size_t out = config_.widths[s];
    const std::size_t stride = s == 0 ? 1 : 2;
    const std::string p = "encoder.stage" + std::to_string(s);
    Block b;
    b.conv1 = make_conv(params_, p + ".conv1", in, out, 3, stride, rng);
    // Residual branches start small so each block is near identity.
    b.conv2 = make_conv(params_, p + ".conv2", out, out, 3, 1, rng, 0.5);
    if (stride != 1 || in != out) {
      b.has_projection = true;
      b.projection = make_conv(params_, p + ".proj", in, out, 1, stride, rng);
    }
    b.ftm = std::find(config_.ftm_stages.begin(), config_.ftm_stages.end(), s) != config_.ftm_stages.end();
    blocks_.push_back(std::move(b));
    in = out;
  }
  const double head_gain = config_.zero_heads ? 0.0 : 0.1;
  mu_head_ = make_linear(params_, "encoder.mu", in, config_.latent_dim, rng, head_gain);
  log_std_head_ = make_linear(params_, "encoder.log_std", in, config_.latent_dim, rng, head_gain);
}

Tensor Encoder::features(const Tensor& image) const {
  const std::size_t side = config_.image_size;
  if (image.rank() != 2 || image.dim(0) != side * side || image.dim(1) != 1) {
    throw ContractViolation("encoder expects a " + std::to_string(side) + "x" + std::to_string(side) +
                            " single-channel image ([" + std::to_string(side * side) + ", 1]), got " +
                            shape_str(image.shape()));
  }
  auto x = stem_(image, side, side);
  Tensor map = leaky_relu(x.map);
  std::size_t h = x.height, w = x.width;
  for (const auto& b : blocks_) {
    const auto y1 = b.conv1(map, h, w);
    const auto y2 = b.conv2(leaky_relu(y1.map), y1.height, y1.width);
    const Tensor shortcut = b.has_projection ? b.projection(map, h, w).map : map;
    map = leaky_relu(add(y2.map, shortcut));
    h = y2.height;
    w = y2.width;
    if (b.ftm) map = ftm_apply(map, config_.ftm_lambda);
  }
  return reduce_mean(map, 0);
}

void Encoder::heads(std::span<const Tensor> images, Tensor& mu, Tensor& log_std) const {
  if (images.empty()) throw ContractViolation("encoder needs at least one image");
  std::vector<Tensor> pooled;
  pooled.reserve(images.size());
  for (const auto& img : images) pooled.push_back(reshape(features(img), {1, config_.widths.back()}));
  const Tensor f = pooled.size() == 1 ? pooled.front() : concat(pooled, 0);
  mu = mu_head_(f);
  log_std = log_std_head_(f);
}

LatentCode Encoder::encode(std::span<const Tensor> images, Rng& rng) const {
  LatentCode code;
  heads(images, code.mu, code.log_std);
  std::vector<float> eps(code.mu.numel());
  for (auto& e : eps) e = static_cast<float>(rng.normal());
  code.eps = Tensor(code.mu.shape(), std::move(eps));
  code.z = add(code.mu, mul(exp(code.log_std), code.eps));
  return code;
}

LatentCode Encoder::encode_mean(std::span<const Tensor> images) const {
  LatentCode code;
  heads(images, code.mu, code.log_std);
  code.eps = Tensor::zeros(code.mu.shape());
  code.z = code.mu;
  return code;
}

}  // namespace pcup
