#pragma once

// Training configuration and its plain-text "key = value" file format.
// Lines starting with '#' are comments; lists are comma separated; unknown
// keys are rejected so typos do not silently fall back to defaults.

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "pcup/critic.hpp"
#include "pcup/encoder.hpp"
#include "pcup/gen_stage1.hpp"
#include "pcup/gen_stage2.hpp"
#include "pcup/losses.hpp"

namespace pcup {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class StageSelection { kStage1, kStage2, kBoth };

std::string to_string(StageSelection s);
StageSelection stage_from_string(const std::string& text);

struct TrainConfig {
  std::uint64_t seed = 1;
  std::size_t batch_size = 4;
  std::size_t iterations = 2000;
  std::size_t critic_iters = 5;
  double lr = 1e-4;
  double beta1 = 0.0;
  double beta2 = 0.9;
  StageSelection stage = StageSelection::kBoth;

  std::size_t image_size = 64;
  std::vector<std::size_t> encoder_widths{16, 32, 64, 128};
  std::vector<std::size_t> ftm_stages{1, 2};
  double ftm_lambda = kFtmLambda;
  std::size_t latent_dim = kLatentDim;

  std::vector<std::size_t> degrees{1, 2, 2, 4, 16};
  /// Empty means default_stage1_widths(degrees.size(), latent_dim).
  std::vector<std::size_t> stage1_widths;
  std::size_t support = 10;

  std::size_t ratio = 4;
  std::size_t feature_width = 64;
  std::size_t growth = 24;
  std::size_t dense_blocks = 3;
  std::size_t recon_hidden = 32;

  std::vector<std::size_t> critic_widths{64, 128, 256};
  std::size_t critic_head = 128;

  LossWeights weights;
  /// Points per cloud in the stage-II EMD loss; 0 uses whole clouds.
  std::size_t emd_subset = 256;

  std::size_t log_interval = 50;
  /// Held-out samples in every probe evaluation.
  std::size_t eval_samples = 8;
  std::size_t checkpoint_interval = 500;

  std::size_t stage1_points() const;
  std::size_t stage2_points() const { return stage1_points() * ratio; }

  EncoderConfig encoder() const;
  Stage1Config stage1() const;
  UpsampleConfig stage2() const;
  CriticConfig critic() const;

  /// Throws ConfigError naming the offending key.
  void validate() const;
};

/// Every key with its current value, with section comments.
std::string format_config(const TrainConfig& config);
/// Starts from defaults and applies the keys present in `text`.
TrainConfig parse_config(const std::string& text, const std::string& origin = "<config>");
TrainConfig load_config(const std::string& path);

/// CRC-32 over the canonical text of every key that shapes the model or the
/// optimisation; run-length and logging keys are excluded so a run can be
/// resumed with a larger iteration budget.
std::uint32_t config_digest(const TrainConfig& config);

}  // namespace pcup
