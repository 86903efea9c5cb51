#pragma once

// Residual convolutional image encoder producing a Normal latent code.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pcup/ftm.hpp"
#include "pcup/io.hpp"
#include "pcup/params.hpp"
#include "pcup/rng.hpp"

namespace pcup {

inline constexpr std::size_t kLatentDim = 96;

struct EncoderConfig {
  std::size_t image_size = 64;
  std::vector<std::size_t> widths{16, 32, 64, 128};
  std::size_t latent_dim = kLatentDim;
  /// Zero-based stages whose residual block output passes through the FTM.
  std::vector<std::size_t> ftm_stages{1, 2};
  double ftm_lambda = kFtmLambda;
  bool zero_heads = false;
};

/// Rows are batch entries; z = mu + exp(log_std) * eps.
struct LatentCode {
  Tensor mu;
  Tensor log_std;
  Tensor eps;
  Tensor z;
};

/// [H*W, 1] tensor of a grayscale image.
Tensor image_tensor(const GrayImage& image);

class Encoder {
 public:
  Encoder(const EncoderConfig& config, std::uint64_t seed);

  /// Deterministic mean and log-std heads for a batch of images.
  void heads(std::span<const Tensor> images, Tensor& mu, Tensor& log_std) const;
  /// Samples eps from `rng` (one row per image).
  LatentCode encode(std::span<const Tensor> images, Rng& rng) const;
  /// eps = 0, so z = mu.
  LatentCode encode_mean(std::span<const Tensor> images) const;

  /// Pooled feature vector [1, widths.back()] of one image.
  Tensor features(const Tensor& image) const;

  const EncoderConfig& config() const { return config_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

 private:
  struct Block {
    Conv2d conv1;
    Conv2d conv2;
    bool has_projection = false;
    Conv2d projection;
    bool ftm = false;
  };

  EncoderConfig config_;
  ParameterSet params_;
  Conv2d stem_;
  std::vector<Block> blocks_;
  Linear mu_head_;
  Linear log_std_head_;
};

}  // namespace pcup
