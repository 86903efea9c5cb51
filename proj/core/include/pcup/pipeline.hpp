#pragma once

// The two-stage model, its alternating adversarial training loop, and the
// inference entry points used by the command-line tool.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pcup/adam.hpp"
#include "pcup/checkpoint.hpp"
#include "pcup/config.hpp"
#include "pcup/critic.hpp"
#include "pcup/encoder.hpp"
#include "pcup/gen_stage1.hpp"
#include "pcup/gen_stage2.hpp"
#include "pcup/point_cloud.hpp"
#include "pcup/synth.hpp"

namespace pcup {

/// Training stopped on a non-finite value or unusable data.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Model {
  explicit Model(const TrainConfig& config);

  TrainConfig config;
  Encoder encoder;
  Stage1Generator gen1;
  Stage2Generator gen2;
  Critic critic1;
  Critic critic2;

  /// Every trainable tensor with its unique name, networks in a fixed order.
  std::vector<std::pair<std::string, Tensor>> parameters() const;
};

struct UpdateCounts {
  std::size_t critic1 = 0;
  std::size_t gen1 = 0;
  std::size_t critic2 = 0;
  std::size_t gen2 = 0;
  std::size_t encoder = 0;
};

/// One metrics-log row; values keep insertion order.
struct MetricsRow {
  std::size_t iteration = 0;
  std::vector<std::pair<std::string, double>> values;

  double get(const std::string& key) const;
  std::string to_json() const;
  static MetricsRow from_json(const std::string& line);
};

/// A dataset sample prepared for training: image tensor, stage-I target of
/// N1 points and stage-II target of N1 * r points (both FPS subsets).
struct TrainingSample {
  Tensor image;
  PointCloud sparse;
  PointCloud dense;
};

std::vector<TrainingSample> prepare_samples(const std::vector<DatasetEntry>& entries, const TrainConfig& config);

class Trainer {
 public:
  Trainer(const TrainConfig& config, std::vector<TrainingSample> train, std::vector<TrainingSample> probe);

  /// One outer iteration: critic-1 updates, generator-1 + encoder update,
  /// critic-2 updates, generator-2 + encoder update (per stage selection).
  void step();

  /// Held-out metrics of the current model, plus the latest training losses
  /// when at least one step has run.
  MetricsRow metrics() const;

  Checkpoint snapshot() const;
  /// Restores parameters, optimiser moments, random streams and counters.
  /// The checkpoint's config digest must match.
  void restore(const Checkpoint& ckpt);

  std::size_t iteration() const { return iteration_; }
  const UpdateCounts& updates() const { return updates_; }
  Model& model() { return model_; }
  const Model& model() const { return model_; }

 private:
  struct Batch {
    std::vector<Tensor> images;
    std::vector<Tensor> sparse;
    std::vector<PointCloud> sparse_clouds;
    std::vector<Tensor> dense;
    std::vector<PointCloud> dense_clouds;
    Tensor eps;
  };

  Batch next_batch();
  Tensor latent(const Batch& b, Tensor* mu, Tensor* log_std) const;
  std::vector<Tensor> stage2_outputs(const std::vector<Tensor>& stage1) const;
  double critic_step(Critic& critic, Adam& opt, const std::vector<Tensor>& real, const std::vector<Tensor>& fake,
                     double* gp_out);
  void stage1_step(const Batch& b);
  void stage2_step(const Batch& b);

  TrainConfig config_;
  Model model_;
  std::vector<TrainingSample> train_;
  std::vector<TrainingSample> probe_;
  Adam opt_encoder_;
  Adam opt_gen1_;
  Adam opt_gen2_;
  Adam opt_critic1_;
  Adam opt_critic2_;
  Rng data_rng_;
  Rng latent_rng_;
  Rng penalty_rng_;
  Rng emd_rng_;
  Rng generate_rng_;
  std::size_t iteration_ = 0;
  UpdateCounts updates_;
  std::vector<std::pair<std::string, double>> last_losses_;
};

struct TrainOptions {
  std::optional<StageSelection> stage;
  std::optional<std::filesystem::path> resume;
  /// Called with every metrics row as it is written.
  std::function<void(const MetricsRow&)> on_row;
};

struct TrainResult {
  std::filesystem::path checkpoint;
  std::filesystem::path log;
  std::size_t iterations = 0;
  UpdateCounts updates;
};

/// Writes <out>/metrics.jsonl, <out>/config.txt and <out>/checkpoint.sgpc.
/// A fresh run logs the untrained model as iteration 0. On NaN/Inf the run
/// aborts with TrainingError and the last checkpoint on disk is left intact.
TrainResult train(const TrainConfig& config, const std::filesystem::path& data_dir,
                  const std::filesystem::path& out_dir, const TrainOptions& options = {});

/// Rebuilds the model from a checkpoint (config text and parameters).
Model load_model(const Checkpoint& ckpt);

struct Generation {
  PointCloud stage1;
  PointCloud stage2;
  Tensor leaf_layer;  // the tree's final layer, [N1, 3]
};

/// z = mu + sigma * eps with eps drawn from the checkpoint's generation
/// stream, so the same checkpoint and image always give the same clouds.
Generation generate(const Model& model, const Checkpoint& ckpt, const GrayImage& image);

/// Optional fixed-seed random subsample to `subsample` points, then stage-II.
PointCloud upsample_cloud(const Model& model, const PointCloud& input, std::optional<std::size_t> subsample,
                          std::uint64_t seed = 0);

}  // namespace pcup
