#include <benchmark/benchmark.h>

#include "pcup/critic.hpp"
#include "pcup/encoder.hpp"
#include "pcup/gen_stage1.hpp"
#include "pcup/gen_stage2.hpp"
#include "pcup/metrics.hpp"
#include "pcup/ops.hpp"
#include "pcup/rng.hpp"

namespace {

using namespace pcup;

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  return Tensor(std::move(shape), std::move(v));
}

PointCloud random_cloud(std::size_t n, std::uint64_t seed) {
  return PointCloud(random_tensor({n, 3}, seed).to_vector());
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = random_tensor({n, n}, 1), b = random_tensor({n, n}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256);

void BM_EncoderForward(benchmark::State& state) {
  const Encoder enc(EncoderConfig{}, 1);
  const std::vector<Tensor> imgs{random_tensor({64 * 64, 1}, 3)};
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(enc.encode_mean(imgs).mu);
}
BENCHMARK(BM_EncoderForward)->Unit(benchmark::kMillisecond);

void BM_EncoderForwardBackward(benchmark::State& state) {
  Encoder enc(EncoderConfig{}, 1);
  const std::vector<Tensor> imgs{random_tensor({64 * 64, 1}, 3)};
  for (auto _ : state) {
    const auto code = enc.encode_mean(imgs);
    backward(reduce_sum(code.mu));
    enc.params().zero_grad();
  }
}
BENCHMARK(BM_EncoderForwardBackward)->Unit(benchmark::kMillisecond);

void BM_Chamfer(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = random_cloud(n, 4), y = random_cloud(n, 5);
  for (auto _ : state) benchmark::DoNotOptimize(chamfer(x, y));
}
BENCHMARK(BM_Chamfer)->Arg(1024)->Arg(8192)->Unit(benchmark::kMillisecond);

void BM_EmdApprox(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = random_cloud(n, 6), y = random_cloud(n, 7);
  for (auto _ : state) benchmark::DoNotOptimize(emd(x, y, EmdMode::kApprox));
}
BENCHMARK(BM_EmdApprox)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_EmdExact(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = random_cloud(n, 6), y = random_cloud(n, 7);
  for (auto _ : state) benchmark::DoNotOptimize(emd(x, y, EmdMode::kExact));
}
BENCHMARK(BM_EmdExact)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_Stage1Forward(benchmark::State& state) {
  const Stage1Generator g(Stage1Config{}, 1);
  const Tensor z = random_tensor({4, 96}, 8);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(g.forward(z));
}
BENCHMARK(BM_Stage1Forward)->Unit(benchmark::kMillisecond);

void BM_Stage2Upsample(benchmark::State& state) {
  const Stage2Generator g(UpsampleConfig{}, 1);
  const Tensor cloud = random_tensor({static_cast<std::size_t>(state.range(0)), 3}, 9);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(g.upsample(cloud));
}
BENCHMARK(BM_Stage2Upsample)->Arg(256)->Arg(2048)->Unit(benchmark::kMillisecond);

// One critic-side training pass on a dense cloud: scores, penalty, backward.
void BM_CriticPenaltyStep(benchmark::State& state) {
  Critic d(CriticConfig{}, 1);
  const Tensor real = random_tensor({1024, 3}, 10), fake = random_tensor({1024, 3}, 11);
  Rng rng(12);
  for (auto _ : state) {
    const Tensor gp = gradient_penalty(d, real, fake, 10.0, rng).penalty;
    backward(add(sub(reduce_mean(d.score(fake)), reduce_mean(d.score(real))), reshape(gp, {1, 1})));
    d.params().zero_grad();
  }
}
BENCHMARK(BM_CriticPenaltyStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
