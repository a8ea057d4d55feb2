#include <benchmark/benchmark.h>

#include <random>

#include "coad/loss.hpp"
#include "coad/model.hpp"
#include "coad/ops.hpp"

namespace {

using coad::Shape;
using coad::Tensor;

Tensor<float> random_tensor(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.f, 1.f);
  Tensor<float> t(std::move(shape));
  for (auto& v : t.data()) v = u(rng);
  return t;
}

// args: channels, extent, dilation
void BM_Conv2d(benchmark::State& state) {
  const auto c = state.range(0), s = state.range(1);
  const int dil = static_cast<int>(state.range(2));
  auto x = random_tensor({c, s, s}, 1);
  auto w = random_tensor({c, c, 3, 3}, 2);
  auto b = random_tensor({c}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(coad::conv2d(x, w, b, {1, dil, dil}).data().data());
  state.SetItemsProcessed(state.iterations() * c * c * 9 * s * s);
}
BENCHMARK(BM_Conv2d)->Args({16, 64, 1})->Args({64, 8, 1})->Args({8, 8, 7})->Unit(benchmark::kMicrosecond);

void BM_ConvTranspose2d(benchmark::State& state) {
  const auto c = state.range(0), s = state.range(1);
  auto x = random_tensor({c, s, s}, 4);
  auto w = random_tensor({c, c / 2, 4, 4}, 5);
  auto b = random_tensor({c / 2}, 6);
  for (auto _ : state) benchmark::DoNotOptimize(coad::conv_transpose2d(x, w, b, 2, 1).data().data());
}
BENCHMARK(BM_ConvTranspose2d)->Args({32, 8})->Args({16, 16})->Unit(benchmark::kMicrosecond);

std::vector<Tensor<float>> group(const coad::ModelConfig& cfg) {
  std::vector<Tensor<float>> images;
  const auto s = cfg.backbone.input_size;
  for (std::int64_t n = 0; n < cfg.group_size; ++n) {
    auto img = random_tensor({3, s, s}, 10 + static_cast<std::uint64_t>(n));
    for (auto& v : img.data()) v = 0.5f * (v + 1.f);
    images.push_back(img);
  }
  return images;
}

void BM_GasaForward(benchmark::State& state) {
  coad::ParameterSet<float> params;
  coad::Rng rng{7};
  coad::GroupAttentionAggregation<float> gasa(params, "gasa", 64, 8, rng);
  std::vector<Tensor<float>> feats;
  for (int n = 0; n < 5; ++n) feats.push_back(random_tensor({64, state.range(0), state.range(0)}, 20 + n));
  coad::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(gasa(feats).data().data());
}
BENCHMARK(BM_GasaForward)->Arg(8)->Arg(28)->Unit(benchmark::kMillisecond);

void BM_ModelForward(benchmark::State& state, const char* preset) {
  const auto cfg = coad::ModelConfig::preset(preset);
  coad::CoADNet<float> model(cfg);
  const auto images = group(cfg);
  coad::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(model.forward_group(images).maps.size());
}
BENCHMARK_CAPTURE(BM_ModelForward, tiny, "tiny")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_ModelForward, desk, "desk")->Unit(benchmark::kMillisecond);

// One training step's worth of autograd: forward, joint co-saliency loss, backward.
void BM_ModelForwardBackward(benchmark::State& state, const char* preset) {
  const auto cfg = coad::ModelConfig::preset(preset);
  coad::CoADNet<float> model(cfg);
  const auto images = group(cfg);
  std::vector<Tensor<float>> masks;
  for (const auto& img : images) {
    Tensor<float> m({1, img.dim(1), img.dim(2)});
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = img[i] > 0.5f ? 1.f : 0.f;
    masks.push_back(m);
  }
  for (auto _ : state) {
    auto pred = model.forward_group(images);
    auto terms = coad::joint_loss<float>(pred.maps, masks, {}, {}, cfg.loss_alpha, cfg.loss_beta);
    coad::backward(terms.total);
    model.parameters().zero_grad();
  }
}
BENCHMARK_CAPTURE(BM_ModelForwardBackward, tiny, "tiny")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_ModelForwardBackward, desk, "desk")->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
