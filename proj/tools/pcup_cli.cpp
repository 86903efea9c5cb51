#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>

#include "pcup/evaluate.hpp"
#include "pcup/gradcheck.hpp"
#include "pcup/io.hpp"
#include "pcup/pipeline.hpp"
#include "pcup/synth.hpp"

namespace {

using namespace pcup;

int run_synth(const std::filesystem::path& out, std::size_t train_n, std::size_t test_n, std::uint64_t seed) {
  DatasetSpec spec;
  spec.train = train_n;
  spec.test = test_n;
  spec.seed = seed;
  write_dataset(out, spec);
  std::cerr << "wrote " << train_n << " train and " << test_n << " test samples to " << out << "\n";
  return 0;
}

int run_train(const std::string& config_path, const std::filesystem::path& data, const std::filesystem::path& out,
              const std::string& stage, const std::string& resume) {
  const TrainConfig config = load_config(config_path);
  TrainOptions options;
  if (!stage.empty()) options.stage = stage_from_string(stage);
  if (!resume.empty()) options.resume = resume;
  const auto start = std::chrono::steady_clock::now();
  options.on_row = [&](const MetricsRow& row) {
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::fprintf(stderr, "iter %6zu  cd1 %.5f  cd2 %.5f  dup %.5f  (%.0fs)\n", row.iteration, row.get("probe_cd1"),
                 row.get("probe_cd2"), row.get("probe_cd_dup"), secs);
  };
  const TrainResult r = train(config, data, out, options);
  std::cerr << "finished at iteration " << r.iterations << "; checkpoint " << r.checkpoint << "\n";
  return 0;
}

int run_generate(const std::filesystem::path& ckpt_path, const std::filesystem::path& image_path,
                 const std::filesystem::path& out) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const Model model = load_model(ckpt);
  const Generation g = generate(model, ckpt, read_pgm(image_path));
  std::filesystem::create_directories(out);
  write_cloud(out / "sparse.ply", g.stage1);
  write_cloud(out / "dense.ply", g.stage2);
  std::cerr << "wrote " << g.stage1.size() << " + " << g.stage2.size() << " points to " << out << "\n";
  return 0;
}

int run_upsample(const std::filesystem::path& ckpt_path, const std::filesystem::path& in, std::size_t ratio,
                 std::size_t subsample, std::uint64_t seed, const std::filesystem::path& out) {
  const Model model = load_model(load_checkpoint(ckpt_path));
  if (ratio != model.config.ratio) {
    throw ContractViolation("--ratio " + std::to_string(ratio) + " does not match the checkpoint's ratio " +
                            std::to_string(model.config.ratio));
  }
  const PointCloud input = read_cloud(in);
  const std::optional<std::size_t> n = subsample ? std::optional<std::size_t>(subsample) : std::nullopt;
  write_cloud(out, upsample_cloud(model, input, n, seed));
  return 0;
}

int run_evaluate(const std::filesystem::path& pred_path, const std::filesystem::path& gt_path,
                 const std::string& metrics, const std::string& heatmap, const std::string& emd_mode,
                 std::size_t emd_subset, std::uint64_t seed, const std::filesystem::path& out) {
  const PointCloud pred = read_cloud(pred_path);
  const PointCloud gt = read_cloud(gt_path);
  EvaluateOptions options;
  options.metrics = parse_metric_list(metrics);
  options.emd_mode = emd_choice_from_string(emd_mode);
  options.emd_subset = emd_subset;
  options.subset_seed = seed;
  const EvaluationReport report = evaluate_clouds(pred, gt, options);
  write_file_atomic(out, format_report(report));
  if (!heatmap.empty()) write_cloud(heatmap, error_heatmap(pred, gt));
  return 0;
}

int run_gradcheck(std::size_t seeds) {
  const OpSuiteReport report = run_op_grad_suite(seeds);
  for (const auto& r : report.per_op) {
    std::printf("%-14s %s  max rel error %.3e over %zu elements\n", r.name.c_str(), r.passed ? "ok  " : "FAIL",
                r.max_rel_error, r.elements);
  }
  std::printf("%zu checks, %s\n", report.checks, report.passed ? "all passed" : "FAILURES");
  return report.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage point cloud generation and upsampling"};
  app.require_subcommand(1);

  std::string out, data, config_path, stage, resume, ckpt, image, in, pred, gt, heatmap;
  std::string metrics = "cd,emd,hd,p2p", emd_mode = "auto";
  std::size_t train_n = 200, test_n = 40, ratio = 0, subsample = 0, emd_subset = 0, seeds = 20;
  std::uint64_t seed = 0;
  bool print_default = false;

  auto* synth = app.add_subcommand("synth-data", "Write a synthetic slice/point-cloud dataset");
  synth->add_option("--out", out, "Output directory")->required();
  synth->add_option("--train", train_n, "Training samples");
  synth->add_option("--test", test_n, "Held-out samples");
  synth->add_option("--seed", seed, "Dataset seed");

  auto* train = app.add_subcommand("train", "Train both stages");
  train->add_flag("--print-default-config", print_default, "Print the default config and exit");
  train->add_option("--config", config_path, "Config file");
  train->add_option("--data", data, "Dataset directory");
  train->add_option("--out", out, "Run directory");
  train->add_option("--stage", stage, "1, 2 or both (overrides the config)")->check(CLI::IsMember({"1", "2", "both"}));
  train->add_option("--resume", resume, "Checkpoint to resume from");

  auto* gen = app.add_subcommand("generate", "Generate sparse and dense clouds from one slice image");
  gen->add_option("--ckpt", ckpt, "Checkpoint")->required();
  gen->add_option("--image", image, "PGM slice")->required();
  gen->add_option("--out", out, "Output directory")->required();

  auto* up = app.add_subcommand("upsample", "Upsample a point cloud with the stage-II generator");
  up->add_option("--ckpt", ckpt, "Checkpoint")->required();
  up->add_option("--in", in, "Input cloud (.ply or .xyz)")->required();
  up->add_option("--ratio", ratio, "Upsampling ratio; must match the checkpoint")->required();
  up->add_option("--subsample", subsample, "Random subset size taken before upsampling");
  up->add_option("--seed", seed, "Subsample seed");
  up->add_option("--out", out, "Output cloud")->required();

  auto* eval = app.add_subcommand("evaluate", "Compare a predicted cloud with ground truth");
  eval->add_option("--pred", pred, "Predicted cloud")->required();
  eval->add_option("--gt", gt, "Ground-truth cloud")->required();
  eval->add_option("--metrics", metrics, "Comma-separated subset of cd,emd,hd,p2p");
  eval->add_option("--heatmap", heatmap, "PLY with the per-point error attribute");
  eval->add_option("--emd-mode", emd_mode, "auto, exact or approx");
  eval->add_option("--emd-subset", emd_subset, "Random subset size for EMD (0 = all points)");
  eval->add_option("--seed", seed, "EMD subset seed");
  eval->add_option("--out", out, "Report file (JSON)")->required();

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of every differentiable op");
  grad->add_option("--seeds", seeds, "Random shapes/seeds per op");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return run_synth(out, train_n, test_n, seed);
    if (*train) {
      if (print_default) {
        std::cout << format_config(TrainConfig{});
        return 0;
      }
      if (config_path.empty() || data.empty() || out.empty()) {
        std::cerr << "train: --config, --data and --out are required\n";
        return 2;
      }
      return run_train(config_path, data, out, stage, resume);
    }
    if (*gen) return run_generate(ckpt, image, out);
    if (*up) return run_upsample(ckpt, in, ratio, subsample, seed, out);
    if (*eval) return run_evaluate(pred, gt, metrics, heatmap, emd_mode, emd_subset, seed, out);
    if (*grad) return run_gradcheck(seeds);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
