#include "pcup/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "pcup/io.hpp"
#include "pcup/losses.hpp"
#include "pcup/metrics.hpp"
#include "pcup/ops.hpp"
#include "pcup/sampling.hpp"

namespace pcup {
namespace {

// Sub-streams of the run seed. Never renumber: checkpoints store their state.
enum Stream : std::uint64_t {
  kData = 1,
  kLatent = 2,
  kPenalty = 3,
  kEmd = 4,
  kGenerate = 5,
  kEncoderInit = 101,
  kGen1Init = 102,
  kGen2Init = 103,
  kCritic1Init = 104,
  kCritic2Init = 105,
};

std::vector<Tensor> split_rows(const Tensor& x, std::size_t parts) {
  const std::size_t n = x.dim(0) / parts;
  std::vector<Tensor> out;
  out.reserve(parts);
  for (std::size_t p = 0; p < parts; ++p) {
    std::vector<std::size_t> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = p * n + i;
    out.push_back(gather_rows(x, rows));
  }
  return out;
}

Tensor mean_of(const std::vector<Tensor>& terms) {
  Tensor total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = add(total, terms[i]);
  return mul_scalar(total, 1.0 / static_cast<double>(terms.size()));
}

AdamConfig adam_config(const TrainConfig& c) {
  AdamConfig a;
  a.lr = static_cast<float>(c.lr);
  a.beta1 = static_cast<float>(c.beta1);
  a.beta2 = static_cast<float>(c.beta2);
  return a;
}

std::string digest_hex(std::uint32_t d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08x", d);
  return buf;
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericError(std::string(what) + " is not finite");
}

// Point clouds reject NaN coordinates, so diverged generators are caught here
// rather than surfacing as contract violations deeper in the step.
void check_finite(const std::vector<Tensor>& clouds, const char* what) {
  for (const auto& c : clouds) {
    for (const float v : c.data()) {
      if (!std::isfinite(v)) throw NumericError(std::string(what) + " contains a non-finite coordinate");
    }
  }
}

struct OptimizerSlot {
  const char* name;
  Adam* opt;
  const ParameterSet* params;
};

}  // namespace

Model::Model(const TrainConfig& c)
    : config(c),
      encoder(c.encoder(), Rng::derive(c.seed, kEncoderInit)),
      gen1(c.stage1(), Rng::derive(c.seed, kGen1Init)),
      gen2(c.stage2(), Rng::derive(c.seed, kGen2Init)),
      critic1(c.critic(), Rng::derive(c.seed, kCritic1Init), "critic1"),
      critic2(c.critic(), Rng::derive(c.seed, kCritic2Init), "critic2") {}

std::vector<std::pair<std::string, Tensor>> Model::parameters() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (const ParameterSet* set :
       {&encoder.params(), &gen1.params(), &gen2.params(), &critic1.params(), &critic2.params()}) {
    for (std::size_t i = 0; i < set->size(); ++i) out.emplace_back(set->names()[i], set->tensors()[i]);
  }
  return out;
}

double MetricsRow::get(const std::string& key) const {
  for (const auto& [k, v] : values) {
    if (k == key) return v;
  }
  throw std::out_of_range("metrics row has no field '" + key + "'");
}

std::string MetricsRow::to_json() const {
  nlohmann::ordered_json j;
  j["iteration"] = iteration;
  for (const auto& [k, v] : values) j[k] = v;
  return j.dump();
}

MetricsRow MetricsRow::from_json(const std::string& line) {
  const auto j = nlohmann::ordered_json::parse(line);
  MetricsRow row;
  for (const auto& [k, v] : j.items()) {
    if (k == "iteration") {
      row.iteration = v.get<std::size_t>();
    } else {
      row.values.emplace_back(k, v.get<double>());
    }
  }
  return row;
}

std::vector<TrainingSample> prepare_samples(const std::vector<DatasetEntry>& entries, const TrainConfig& config) {
  const std::size_t n1 = config.stage1_points(), n2 = config.stage2_points();
  std::vector<TrainingSample> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    if (e.slice.width != config.image_size || e.slice.height != config.image_size) {
      throw TrainingError("sample " + e.id + ": slice is " + std::to_string(e.slice.width) + "x" +
                          std::to_string(e.slice.height) + " but image_size is " + std::to_string(config.image_size));
    }
    if (e.dense.size() < n2) {
      throw TrainingError("sample " + e.id + " has " + std::to_string(e.dense.size()) + " dense points; N1 * r = " +
                          std::to_string(n2) + " are needed");
    }
    TrainingSample s;
    s.image = image_tensor(e.slice);
    s.sparse = e.sparse.size() == n1 ? e.sparse : fps(e.dense, n1);
    s.dense = e.dense.size() == n2 ? e.dense : fps(e.dense, n2);
    out.push_back(std::move(s));
  }
  return out;
}

Trainer::Trainer(const TrainConfig& config, std::vector<TrainingSample> train, std::vector<TrainingSample> probe)
    : config_(config),
      model_(config),
      train_(std::move(train)),
      probe_(std::move(probe)),
      opt_encoder_(model_.encoder.params().tensors(), adam_config(config)),
      opt_gen1_(model_.gen1.params().tensors(), adam_config(config)),
      opt_gen2_(model_.gen2.params().tensors(), adam_config(config)),
      opt_critic1_(model_.critic1.params().tensors(), adam_config(config)),
      opt_critic2_(model_.critic2.params().tensors(), adam_config(config)),
      data_rng_(Rng::derive(config.seed, kData)),
      latent_rng_(Rng::derive(config.seed, kLatent)),
      penalty_rng_(Rng::derive(config.seed, kPenalty)),
      emd_rng_(Rng::derive(config.seed, kEmd)),
      generate_rng_(Rng::derive(config.seed, kGenerate)) {
  config_.validate();
  if (train_.empty()) throw TrainingError("training set is empty");
  if (probe_.empty()) throw TrainingError("probe set is empty");
}

Trainer::Batch Trainer::next_batch() {
  Batch b;
  for (std::size_t i = 0; i < config_.batch_size; ++i) {
    const auto& s = train_[data_rng_.below(train_.size())];
    b.images.push_back(s.image);
    b.sparse.push_back(s.sparse.to_tensor());
    b.sparse_clouds.push_back(s.sparse);
    b.dense.push_back(s.dense.to_tensor());
    b.dense_clouds.push_back(s.dense);
  }
  std::vector<float> eps(config_.batch_size * config_.latent_dim);
  for (auto& e : eps) e = static_cast<float>(latent_rng_.normal());
  b.eps = Tensor({config_.batch_size, config_.latent_dim}, std::move(eps));
  return b;
}

Tensor Trainer::latent(const Batch& b, Tensor* mu, Tensor* log_std) const {
  Tensor m, s;
  model_.encoder.heads(b.images, m, s);
  if (mu) *mu = m;
  if (log_std) *log_std = s;
  return add(m, mul(exp(s), b.eps));
}

std::vector<Tensor> Trainer::stage2_outputs(const std::vector<Tensor>& stage1) const {
  std::vector<Tensor> out;
  out.reserve(stage1.size());
  for (const auto& c : stage1) out.push_back(model_.gen2.upsample(c));
  return out;
}

double Trainer::critic_step(Critic& critic, Adam& opt, const std::vector<Tensor>& real,
                            const std::vector<Tensor>& fake, double* gp_out) {
  opt.zero_grad();
  const Tensor real_scores = critic.scores(real);
  const Tensor fake_scores = critic.scores(fake);
  std::vector<Tensor> penalties;
  for (std::size_t i = 0; i < real.size(); ++i) {
    penalties.push_back(gradient_penalty(critic, real[i], fake[i], config_.weights.gp, penalty_rng_).penalty);
  }
  const Tensor gp = mean_of(penalties);
  const Tensor loss = loss_critic(fake_scores, real_scores, gp);
  check_finite(loss.item(), "critic loss");
  backward(loss);
  opt.step();
  *gp_out = gp.item();
  return loss.item();
}

void Trainer::stage1_step(const Batch& b) {
  const std::size_t batch = b.images.size();
  std::vector<Tensor> fakes;
  {
    NoGradGuard guard;
    fakes = split_rows(model_.gen1.forward(latent(b, nullptr, nullptr)), batch);
  }
  check_finite(fakes, "stage-I output");
  double critic_loss = 0.0, gp = 0.0;
  for (std::size_t t = 0; t < config_.critic_iters; ++t) {
    critic_loss = critic_step(model_.critic1, opt_critic1_, b.sparse, fakes, &gp);
    ++updates_.critic1;
  }

  opt_gen1_.zero_grad();
  opt_encoder_.zero_grad();
  Tensor mu, log_std;
  const auto clouds = split_rows(model_.gen1.forward(latent(b, &mu, &log_std)), batch);
  check_finite(clouds, "stage-I output");
  const Tensor adv = loss_generator_adv(model_.critic1.scores(clouds));
  std::vector<Tensor> cds;
  for (std::size_t i = 0; i < batch; ++i) cds.push_back(chamfer_loss(clouds[i], b.sparse_clouds[i]));
  const Tensor cd = mean_of(cds);
  const Tensor kl = loss_kl(mu, log_std);
  const Tensor loss = add(add(adv, mul_scalar(cd, config_.weights.stage1_cd)), mul_scalar(kl, config_.weights.kl));
  check_finite(loss.item(), "stage-I generator loss");
  backward(loss);
  opt_gen1_.step();
  opt_encoder_.step();
  ++updates_.gen1;
  ++updates_.encoder;

  last_losses_.emplace_back("critic1_loss", critic_loss);
  last_losses_.emplace_back("critic1_gp", gp);
  last_losses_.emplace_back("gen1_loss", loss.item());
  last_losses_.emplace_back("gen1_adv", adv.item());
  last_losses_.emplace_back("gen1_cd_sum", cd.item());
  last_losses_.emplace_back("kl", kl.item());
}

void Trainer::stage2_step(const Batch& b) {
  const std::size_t batch = b.images.size();
  std::vector<Tensor> fakes;
  {
    NoGradGuard guard;
    fakes = stage2_outputs(split_rows(model_.gen1.forward(latent(b, nullptr, nullptr)), batch));
  }
  check_finite(fakes, "stage-II output");
  double critic_loss = 0.0, gp = 0.0;
  for (std::size_t t = 0; t < config_.critic_iters; ++t) {
    critic_loss = critic_step(model_.critic2, opt_critic2_, b.dense, fakes, &gp);
    ++updates_.critic2;
  }

  opt_gen2_.zero_grad();
  opt_encoder_.zero_grad();
  Tensor mu, log_std;
  const auto clouds = stage2_outputs(split_rows(model_.gen1.forward(latent(b, &mu, &log_std)), batch));
  check_finite(clouds, "stage-II output");
  const Tensor adv = loss_generator_adv(model_.critic2.scores(clouds));
  std::vector<Tensor> cds, emds;
  for (std::size_t i = 0; i < batch; ++i) {
    cds.push_back(chamfer_loss(clouds[i], b.dense_clouds[i]));
    emds.push_back(emd_loss(clouds[i], b.dense_clouds[i], config_.emd_subset, emd_rng_));
  }
  const Tensor cd = mean_of(cds), emd = mean_of(emds);
  const Tensor kl = loss_kl(mu, log_std);
  const Tensor loss = loss_stage2(adv, kl, cd, emd, config_.weights);
  check_finite(loss.item(), "stage-II generator loss");
  backward(loss);
  opt_gen2_.step();
  opt_encoder_.step();
  ++updates_.gen2;
  ++updates_.encoder;

  last_losses_.emplace_back("critic2_loss", critic_loss);
  last_losses_.emplace_back("critic2_gp", gp);
  last_losses_.emplace_back("gen2_loss", loss.item());
  last_losses_.emplace_back("gen2_adv", adv.item());
  last_losses_.emplace_back("gen2_cd_sum", cd.item());
  last_losses_.emplace_back("gen2_emd", emd.item());
  if (config_.stage == StageSelection::kStage2) last_losses_.emplace_back("kl", kl.item());
}

void Trainer::step() {
  last_losses_.clear();
  const Batch b = next_batch();
  if (config_.stage != StageSelection::kStage2) stage1_step(b);
  if (config_.stage != StageSelection::kStage1) stage2_step(b);
  ++iteration_;
}

MetricsRow Trainer::metrics() const {
  NoGradGuard guard;
  MetricsRow row;
  row.iteration = iteration_;
  const std::size_t n = std::min(config_.eval_samples, probe_.size());
  std::vector<Tensor> images;
  for (std::size_t i = 0; i < n; ++i) images.push_back(probe_[i].image);
  const auto code = model_.encoder.encode_mean(images);
  const auto stage1 = split_rows(model_.gen1.forward(code.z), n);
  double cd1 = 0, cd2 = 0, dup = 0, emd2 = 0;
  const std::size_t r = config_.ratio;
  for (std::size_t i = 0; i < n; ++i) {
    const PointCloud y1 = PointCloud::from_tensor(stage1[i]);
    const PointCloud y2 = PointCloud::from_tensor(model_.gen2.upsample(stage1[i]));
    std::vector<std::size_t> repeat(y1.size() * r);
    for (std::size_t k = 0; k < repeat.size(); ++k) repeat[k] = k / r;
    cd1 += chamfer(y1, probe_[i].sparse).mean_form;
    cd2 += chamfer(y2, probe_[i].dense).mean_form;
    dup += chamfer(y1.select(repeat), probe_[i].dense).mean_form;
    emd2 += emd(y2, probe_[i].dense, EmdMode::kApprox) / static_cast<double>(y2.size());
  }
  const double inv = 1.0 / static_cast<double>(n);
  row.values = {{"probe_cd1", cd1 * inv}, {"probe_cd2", cd2 * inv}, {"probe_cd_dup", dup * inv},
                {"probe_emd2", emd2 * inv}};
  row.values.insert(row.values.end(), last_losses_.begin(), last_losses_.end());
  row.values.emplace_back("updates_critic1", static_cast<double>(updates_.critic1));
  row.values.emplace_back("updates_gen1", static_cast<double>(updates_.gen1));
  row.values.emplace_back("updates_critic2", static_cast<double>(updates_.critic2));
  row.values.emplace_back("updates_gen2", static_cast<double>(updates_.gen2));
  return row;
}

Checkpoint Trainer::snapshot() const {
  Checkpoint c;
  c.set_meta("config", format_config(config_));
  c.set_meta("digest", digest_hex(config_digest(config_)));
  c.set_meta("iteration", std::to_string(iteration_));
  c.set_meta("updates.critic1", std::to_string(updates_.critic1));
  c.set_meta("updates.gen1", std::to_string(updates_.gen1));
  c.set_meta("updates.critic2", std::to_string(updates_.critic2));
  c.set_meta("updates.gen2", std::to_string(updates_.gen2));
  c.set_meta("updates.encoder", std::to_string(updates_.encoder));
  c.set_meta("rng.data", data_rng_.state());
  c.set_meta("rng.latent", latent_rng_.state());
  c.set_meta("rng.penalty", penalty_rng_.state());
  c.set_meta("rng.emd", emd_rng_.state());
  c.set_meta("rng.generate", generate_rng_.state());
  for (const auto& [name, t] : model_.parameters()) c.add_tensor(name, t);

  const OptimizerSlot slots[] = {{"encoder", const_cast<Adam*>(&opt_encoder_), &model_.encoder.params()},
                                 {"gen1", const_cast<Adam*>(&opt_gen1_), &model_.gen1.params()},
                                 {"gen2", const_cast<Adam*>(&opt_gen2_), &model_.gen2.params()},
                                 {"critic1", const_cast<Adam*>(&opt_critic1_), &model_.critic1.params()},
                                 {"critic2", const_cast<Adam*>(&opt_critic2_), &model_.critic2.params()}};
  for (const auto& s : slots) {
    const AdamState& st = s.opt->state();
    const std::string prefix = std::string("adam.") + s.name;
    c.set_meta(prefix + ".timestep", std::to_string(st.timestep));
    for (std::size_t i = 0; i < s.params->size(); ++i) {
      const Tensor& p = s.params->tensors()[i];
      const auto& name = s.params->names()[i];
      c.add_tensor(prefix + ".m." + name, p.shape(), st.m.empty() ? std::vector<float>(p.numel(), 0.0f) : st.m[i]);
      c.add_tensor(prefix + ".v." + name, p.shape(), st.v.empty() ? std::vector<float>(p.numel(), 0.0f) : st.v[i]);
    }
  }
  return c;
}

void Trainer::restore(const Checkpoint& ckpt) {
  const std::string want = digest_hex(config_digest(config_));
  if (ckpt.meta_value("digest") != want) {
    throw CheckpointError("checkpoint config digest " + ckpt.meta_value("digest") + " does not match " + want);
  }
  const auto fetch = [&ckpt](const std::string& name, const Shape& shape) -> const NamedTensor& {
    const NamedTensor* t = ckpt.find(name);
    if (!t) throw CheckpointError("checkpoint is missing tensor '" + name + "'");
    if (t->shape != shape) {
      throw CheckpointError("tensor '" + name + "' has shape " + shape_str(t->shape) + ", model expects " +
                            shape_str(shape));
    }
    return *t;
  };
  // Validate everything before touching live state.
  const auto params = model_.parameters();
  for (const auto& [name, t] : params) fetch(name, t.shape());
  const OptimizerSlot slots[] = {{"encoder", &opt_encoder_, &model_.encoder.params()},
                                 {"gen1", &opt_gen1_, &model_.gen1.params()},
                                 {"gen2", &opt_gen2_, &model_.gen2.params()},
                                 {"critic1", &opt_critic1_, &model_.critic1.params()},
                                 {"critic2", &opt_critic2_, &model_.critic2.params()}};
  for (const auto& s : slots) {
    const std::string prefix = std::string("adam.") + s.name;
    ckpt.meta_value(prefix + ".timestep");
    for (std::size_t i = 0; i < s.params->size(); ++i) {
      fetch(prefix + ".m." + s.params->names()[i], s.params->tensors()[i].shape());
      fetch(prefix + ".v." + s.params->names()[i], s.params->tensors()[i].shape());
    }
  }
  const auto count = [&ckpt](const std::string& key) {
    return static_cast<std::size_t>(std::stoull(ckpt.meta_value(key)));
  };
  const std::size_t iteration = count("iteration");
  UpdateCounts updates{count("updates.critic1"), count("updates.gen1"), count("updates.critic2"),
                       count("updates.gen2"), count("updates.encoder")};
  const std::string rng_keys[] = {"rng.data", "rng.latent", "rng.penalty", "rng.emd", "rng.generate"};
  for (const auto& k : rng_keys) ckpt.meta_value(k);

  for (auto& [name, t] : params) {
    const auto& src = fetch(name, t.shape());
    Tensor handle = t;
    std::copy(src.values.begin(), src.values.end(), handle.data().begin());
  }
  for (const auto& s : slots) {
    const std::string prefix = std::string("adam.") + s.name;
    AdamState& st = s.opt->state();
    st.m.clear();
    st.v.clear();
    for (std::size_t i = 0; i < s.params->size(); ++i) {
      st.m.push_back(fetch(prefix + ".m." + s.params->names()[i], s.params->tensors()[i].shape()).values);
      st.v.push_back(fetch(prefix + ".v." + s.params->names()[i], s.params->tensors()[i].shape()).values);
    }
    st.timestep = std::stoll(ckpt.meta_value(prefix + ".timestep"));
  }
  data_rng_.set_state(ckpt.meta_value("rng.data"));
  latent_rng_.set_state(ckpt.meta_value("rng.latent"));
  penalty_rng_.set_state(ckpt.meta_value("rng.penalty"));
  emd_rng_.set_state(ckpt.meta_value("rng.emd"));
  generate_rng_.set_state(ckpt.meta_value("rng.generate"));
  iteration_ = iteration;
  updates_ = updates;
  last_losses_.clear();
}

TrainResult train(const TrainConfig& config_in, const std::filesystem::path& data_dir,
                  const std::filesystem::path& out_dir, const TrainOptions& options) {
  TrainConfig config = config_in;
  if (options.stage) config.stage = *options.stage;
  config.validate();

  const Dataset data = load_dataset(data_dir);
  if (data.train.empty()) throw TrainingError("dataset " + data_dir.string() + " has no training samples");
  const auto& probe_entries = data.test.empty() ? data.train : data.test;
  const std::vector<DatasetEntry> probe(
      probe_entries.begin(), probe_entries.begin() + std::min(config.eval_samples, probe_entries.size()));
  Trainer trainer(config, prepare_samples(data.train, config), prepare_samples(probe, config));

  std::filesystem::create_directories(out_dir);
  TrainResult result;
  result.checkpoint = out_dir / "checkpoint.sgpc";
  result.log = out_dir / "metrics.jsonl";
  write_file_atomic(out_dir / "config.txt", format_config(config));

  std::vector<std::string> kept;
  if (options.resume) {
    trainer.restore(load_checkpoint(*options.resume));
    // Drop rows a crashed run logged after the checkpoint.
    if (std::filesystem::exists(result.log)) {
      std::ifstream in(result.log);
      std::string line;
      while (std::getline(in, line)) {
        if (!line.empty() && MetricsRow::from_json(line).iteration <= trainer.iteration()) kept.push_back(line);
      }
    }
  }
  {
    std::ofstream log(result.log, std::ios::trunc);
    for (const auto& l : kept) log << l << '\n';
  }
  std::ofstream log(result.log, std::ios::app);
  const auto emit = [&](const MetricsRow& row) {
    log << row.to_json() << '\n';
    log.flush();
    if (options.on_row) options.on_row(row);
  };
  if (!options.resume) emit(trainer.metrics());

  while (trainer.iteration() < config.iterations) {
    try {
      trainer.step();
    } catch (const NumericError& e) {
      const bool have = std::filesystem::exists(result.checkpoint);
      throw TrainingError("non-finite value at iteration " + std::to_string(trainer.iteration() + 1) + ": " +
                          e.what() + (have ? "; last good checkpoint kept at " + result.checkpoint.string()
                                           : std::string("; no checkpoint written yet")));
    }
    const std::size_t it = trainer.iteration();
    if (it % config.log_interval == 0 || it == config.iterations) emit(trainer.metrics());
    if (it % config.checkpoint_interval == 0 || it == config.iterations) {
      save_checkpoint(result.checkpoint, trainer.snapshot());
    }
  }
  if (!std::filesystem::exists(result.checkpoint)) save_checkpoint(result.checkpoint, trainer.snapshot());
  result.iterations = trainer.iteration();
  result.updates = trainer.updates();
  return result;
}

Model load_model(const Checkpoint& ckpt) {
  TrainConfig config;
  try {
    config = parse_config(ckpt.meta_value("config"), "<checkpoint config>");
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint config is invalid: ") + e.what());
  }
  if (ckpt.meta_value("digest") != digest_hex(config_digest(config))) {
    throw CheckpointError("checkpoint config digest does not match its config text");
  }
  Model model(config);
  for (auto& [name, t] : model.parameters()) {
    const NamedTensor* src = ckpt.find(name);
    if (!src) throw CheckpointError("checkpoint is missing tensor '" + name + "'");
    if (src->shape != t.shape()) {
      throw CheckpointError("tensor '" + name + "' has shape " + shape_str(src->shape) + ", model expects " +
                            shape_str(t.shape()));
    }
    Tensor handle = t;
    std::copy(src->values.begin(), src->values.end(), handle.data().begin());
  }
  return model;
}

Generation generate(const Model& model, const Checkpoint& ckpt, const GrayImage& image) {
  const std::size_t side = model.config.image_size;
  if (image.width != side || image.height != side) {
    throw ContractViolation("image is " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                            " but the model expects " + std::to_string(side) + "x" + std::to_string(side));
  }
  NoGradGuard guard;
  Rng rng;
  rng.set_state(ckpt.meta_value("rng.generate"));
  const std::vector<Tensor> images{image_tensor(image)};
  Tensor mu, log_std;
  model.encoder.heads(images, mu, log_std);
  std::vector<float> eps(mu.numel());
  for (auto& e : eps) e = static_cast<float>(rng.normal());
  const Tensor z = add(mu, mul(exp(log_std), Tensor(mu.shape(), std::move(eps))));
  Generation g;
  g.leaf_layer = model.gen1.run(z).layers.back();
  g.stage1 = PointCloud::from_tensor(g.leaf_layer);
  g.stage2 = PointCloud::from_tensor(model.gen2.upsample(g.leaf_layer));
  return g;
}

PointCloud upsample_cloud(const Model& model, const PointCloud& input, std::optional<std::size_t> subsample,
                          std::uint64_t seed) {
  if (input.size() < 8) throw ContractViolation("upsampling needs at least 8 input points, got " +
                                                std::to_string(input.size()));
  PointCloud src = input;
  if (subsample && *subsample != input.size()) {
    if (*subsample > input.size()) {
      throw ContractViolation("cannot subsample " + std::to_string(input.size()) + " points to " +
                              std::to_string(*subsample));
    }
    src = random_subsample(input, *subsample, seed);
  }
  NoGradGuard guard;
  return PointCloud::from_tensor(model.gen2.upsample(src.to_tensor()));
}

}  // namespace pcup
