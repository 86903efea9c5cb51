#include "pcup/config.hpp"

#include <zlib.h>

#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "pcup/io.hpp"

namespace pcup {
namespace {

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string format_list(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::uint64_t parse_uint(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (r.ec != std::errc{} || r.ptr != text.data() + text.size()) {
    throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

double parse_double(const std::string& key, const std::string& text) {
  double v = 0;
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (r.ec != std::errc{} || r.ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw ConfigError("key '" + key + "': expected a finite number, got '" + text + "'");
  }
  return v;
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& text) {
  std::vector<std::size_t> out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_uint(key, trim(item)));
  return out;
}

struct Key {
  const char* name;
  const char* section;  // printed before the first key of a section
  bool digested;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

#define PCUP_UINT(field)                                                                     \
  [](const TrainConfig& c) { return std::to_string(c.field); },                              \
      [](TrainConfig& c, const std::string& v) { c.field = parse_uint(#field, v); }
#define PCUP_DOUBLE(field, key)                                                              \
  [](const TrainConfig& c) { return format_double(c.field); },                               \
      [](TrainConfig& c, const std::string& v) { c.field = parse_double(key, v); }
#define PCUP_LIST(field)                                                                     \
  [](const TrainConfig& c) { return format_list(c.field); },                                 \
      [](TrainConfig& c, const std::string& v) { c.field = parse_list(#field, v); }

const std::vector<Key>& keys() {
  static const std::vector<Key> table{
      {"seed", "run", true, PCUP_UINT(seed)},
      {"batch_size", nullptr, true, PCUP_UINT(batch_size)},
      {"iterations", nullptr, false, PCUP_UINT(iterations)},
      {"critic_iters", nullptr, true, PCUP_UINT(critic_iters)},
      {"lr", nullptr, true, PCUP_DOUBLE(lr, "lr")},
      {"beta1", nullptr, true, PCUP_DOUBLE(beta1, "beta1")},
      {"beta2", nullptr, true, PCUP_DOUBLE(beta2, "beta2")},
      {"stage", nullptr, false, [](const TrainConfig& c) { return to_string(c.stage); },
       [](TrainConfig& c, const std::string& v) { c.stage = stage_from_string(v); }},
      {"image_size", "encoder", true, PCUP_UINT(image_size)},
      {"encoder_widths", nullptr, true, PCUP_LIST(encoder_widths)},
      {"ftm_stages", nullptr, true, PCUP_LIST(ftm_stages)},
      {"ftm_lambda", nullptr, true, PCUP_DOUBLE(ftm_lambda, "ftm_lambda")},
      {"latent_dim", nullptr, true, PCUP_UINT(latent_dim)},
      {"degrees", "stage-I tree generator (widths empty = default)", true, PCUP_LIST(degrees)},
      {"stage1_widths", nullptr, true, PCUP_LIST(stage1_widths)},
      {"support", nullptr, true, PCUP_UINT(support)},
      {"ratio", "stage-II upsampler", true, PCUP_UINT(ratio)},
      {"feature_width", nullptr, true, PCUP_UINT(feature_width)},
      {"growth", nullptr, true, PCUP_UINT(growth)},
      {"dense_blocks", nullptr, true, PCUP_UINT(dense_blocks)},
      {"recon_hidden", nullptr, true, PCUP_UINT(recon_hidden)},
      {"critic_widths", "critics", true, PCUP_LIST(critic_widths)},
      {"critic_head", nullptr, true, PCUP_UINT(critic_head)},
      {"lambda_gp", "loss weights", true, PCUP_DOUBLE(weights.gp, "lambda_gp")},
      {"lambda_adv", nullptr, true, PCUP_DOUBLE(weights.adv, "lambda_adv")},
      {"lambda_kl", nullptr, true, PCUP_DOUBLE(weights.kl, "lambda_kl")},
      {"lambda_cd", nullptr, true, PCUP_DOUBLE(weights.cd, "lambda_cd")},
      {"lambda_emd", nullptr, true, PCUP_DOUBLE(weights.emd, "lambda_emd")},
      {"stage1_cd", nullptr, true, PCUP_DOUBLE(weights.stage1_cd, "stage1_cd")},
      {"emd_subset", nullptr, true, PCUP_UINT(emd_subset)},
      {"log_interval", "logging", false, PCUP_UINT(log_interval)},
      {"eval_samples", nullptr, false, PCUP_UINT(eval_samples)},
      {"checkpoint_interval", nullptr, false, PCUP_UINT(checkpoint_interval)},
  };
  return table;
}

#undef PCUP_UINT
#undef PCUP_DOUBLE
#undef PCUP_LIST

}  // namespace

std::string to_string(StageSelection s) {
  switch (s) {
    case StageSelection::kStage1: return "1";
    case StageSelection::kStage2: return "2";
    case StageSelection::kBoth: return "both";
  }
  return "both";
}

StageSelection stage_from_string(const std::string& text) {
  if (text == "1") return StageSelection::kStage1;
  if (text == "2") return StageSelection::kStage2;
  if (text == "both") return StageSelection::kBoth;
  throw ConfigError("stage must be 1, 2 or both, got '" + text + "'");
}

std::size_t TrainConfig::stage1_points() const {
  std::size_t n = 1;
  for (const auto d : degrees) n *= d;
  return n;
}

EncoderConfig TrainConfig::encoder() const {
  EncoderConfig e;
  e.image_size = image_size;
  e.widths = encoder_widths;
  e.latent_dim = latent_dim;
  e.ftm_stages = ftm_stages;
  e.ftm_lambda = ftm_lambda;
  return e;
}

Stage1Config TrainConfig::stage1() const {
  Stage1Config s;
  s.degrees = degrees;
  s.widths = stage1_widths.empty() ? default_stage1_widths(degrees.size(), latent_dim) : stage1_widths;
  s.support = support;
  return s;
}

UpsampleConfig TrainConfig::stage2() const {
  UpsampleConfig u;
  u.ratio = ratio;
  u.feature_width = feature_width;
  u.growth = growth;
  u.dense_blocks = dense_blocks;
  u.support = support;
  u.recon_hidden = recon_hidden;
  return u;
}

CriticConfig TrainConfig::critic() const {
  CriticConfig c;
  c.point_widths = critic_widths;
  c.head_hidden = critic_head;
  return c;
}

void TrainConfig::validate() const {
  const auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(batch_size >= 1, "batch_size must be >= 1");
  require(iterations >= 1, "iterations must be >= 1");
  require(critic_iters >= 1, "critic_iters must be >= 1");
  require(lr > 0.0, "lr must be > 0");
  require(beta1 >= 0.0 && beta1 < 1.0, "beta1 must lie in [0, 1)");
  require(beta2 >= 0.0 && beta2 < 1.0, "beta2 must lie in [0, 1)");
  require(latent_dim >= 1, "latent_dim must be >= 1");
  require(!encoder_widths.empty(), "encoder_widths must not be empty");
  for (const auto s : ftm_stages) require(s < encoder_widths.size(), "ftm_stages entry out of range");
  require(ftm_lambda > 0.0, "ftm_lambda must be > 0");
  require(!critic_widths.empty() && critic_head >= 1, "critic widths must be non-empty");
  require(log_interval >= 1, "log_interval must be >= 1");
  require(checkpoint_interval >= 1, "checkpoint_interval must be >= 1");
  require(eval_samples >= 1, "eval_samples must be >= 1");
  require(stage1_points() >= 8, "degrees must multiply to at least 8 points");
  require(stage1_widths.empty() || stage1_widths.front() == latent_dim, "stage1_widths must start at latent_dim");
  try {
    stage1().validate();
    stage2().validate();
    weights.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
}

std::string format_config(const TrainConfig& config) {
  std::string out;
  for (const auto& k : keys()) {
    if (k.section) out += std::string(out.empty() ? "" : "\n") + "# " + k.section + "\n";
    out += std::string(k.name) + " = " + k.get(config) + "\n";
  }
  return out;
}

TrainConfig parse_config(const std::string& text, const std::string& origin) {
  std::map<std::string, const Key*> index;
  for (const auto& k : keys()) index[k.name] = &k;
  TrainConfig config;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string where = origin + ":" + std::to_string(number) + ": ";
    const std::string body = trim(line.substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = trim(body.substr(0, eq));
    const auto it = index.find(key);
    if (it == index.end()) throw ConfigError(where + "unknown key '" + key + "'");
    try {
      it->second->set(config, trim(body.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  config.validate();
  return config;
}

TrainConfig load_config(const std::string& path) { return parse_config(read_file(path), path); }

std::uint32_t config_digest(const TrainConfig& config) {
  std::string canonical;
  for (const auto& k : keys()) {
    if (k.digested) canonical += std::string(k.name) + "=" + k.get(config) + "\n";
  }
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(canonical.data()), static_cast<uInt>(canonical.size())));
}

}  // namespace pcup
