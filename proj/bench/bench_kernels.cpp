// Serial reference kernels against their OpenMP counterparts, plus one
// whole training step of each model in both modes.
#include <benchmark/benchmark.h>

#include <vector>

#include "phosc/model.hpp"
#include "phosc/net/kernels.hpp"
#include "phosc/rng.hpp"

using namespace phosc;
namespace k = phosc::net::kernels;

namespace {

std::vector<float> random_vec(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  return v;
}

// Shapes of the default backbone's second convolution (16 -> 32 channels on
// a 12 x 62 map).
const k::ConvGeometry kConv{16, 12, 62, 32, 3, 1, 1, 12, 62};

template <bool Parallel>
void BM_ConvForward(benchmark::State& state) {
  const auto& g = kConv;
  const auto in = random_vec(std::size_t(g.in_c) * g.in_h * g.in_w, 1);
  const auto w = random_vec(std::size_t(g.out_c) * g.in_c * g.kernel * g.kernel, 2);
  const auto b = random_vec(g.out_c, 3);
  std::vector<float> out(std::size_t(g.out_c) * g.out_h * g.out_w);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::parallel::conv2d_forward(g, in.data(), w.data(), b.data(), out.data());
    } else {
      k::serial::conv2d_forward(g, in.data(), w.data(), b.data(), out.data());
    }
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_ConvBackward(benchmark::State& state) {
  const auto& g = kConv;
  const auto in = random_vec(std::size_t(g.in_c) * g.in_h * g.in_w, 1);
  const auto w = random_vec(std::size_t(g.out_c) * g.in_c * g.kernel * g.kernel, 2);
  const auto gout = random_vec(std::size_t(g.out_c) * g.out_h * g.out_w, 4);
  std::vector<float> gin(in.size()), gw(w.size()), gb(g.out_c);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::parallel::conv2d_backward(g, in.data(), w.data(), gout.data(), gin.data(), gw.data(), gb.data());
    } else {
      k::serial::conv2d_backward(g, in.data(), w.data(), gout.data(), gin.data(), gw.data(), gb.data());
    }
    benchmark::DoNotOptimize(gw.data());
  }
}

template <bool Parallel>
void BM_Matmul(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto a = random_vec(std::size_t(n) * n, 5), b = random_vec(std::size_t(n) * n, 6);
  std::vector<float> c(std::size_t(n) * n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::parallel::matmul_acc(a.data(), b.data(), c.data(), n, n, n);
    } else {
      k::serial::matmul_acc(a.data(), b.data(), c.data(), n, n, n);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2LL * n * n * n);
}

synth::WordImage bench_image() { return synth::render_word("benchmark", 0); }

void BM_PhoscNetStep(benchmark::State& state) {
  const k::ScopedMode mode(state.range(0) ? k::Mode::kParallel : k::Mode::kSerial);
  model::PhoscNet<float> net(model::default_arch());
  net.init(1);
  const auto image = model::image_tensor<float>(bench_image());
  const auto target = phosc_encode("benchmark", net.phos_config(), net.phoc_config());
  auto grads = net.params().zeros_like();
  for (auto _ : state) {
    const auto pass = net.forward(net.params(), image);
    const auto loss = model::phosc_loss<float>(pass.phoc.output().span(), pass.phos.output().span(), target.phoc,
                                               target.phos, 1.0, 4.5);
    net.backward(net.params(), pass, loss.grad_phoc, loss.grad_phos, grads);
    benchmark::DoNotOptimize(grads);
  }
}

void BM_CtcStep(benchmark::State& state) {
  const k::ScopedMode mode(state.range(0) ? k::Mode::kParallel : k::Mode::kSerial);
  model::PhoscCtc<float> net(model::default_arch());
  net.init(1);
  const auto image = model::image_tensor<float>(bench_image());
  auto grads = net.params().zeros_like();
  for (auto _ : state) benchmark::DoNotOptimize(net.loss_and_backward(net.params(), image, "benchmark", grads));
}

}  // namespace

BENCHMARK(BM_ConvForward<false>)->Name("conv_forward/serial")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ConvForward<true>)->Name("conv_forward/parallel")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ConvBackward<false>)->Name("conv_backward/serial")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ConvBackward<true>)->Name("conv_backward/parallel")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Matmul<false>)->Name("matmul/serial")->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Matmul<true>)->Name("matmul/parallel")->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_PhoscNetStep)->Name("phoscnet_step")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CtcStep)->Name("ctc_step")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
