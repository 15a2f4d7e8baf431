#include <benchmark/benchmark.h>

#include <vector>

#include "obflab/analytic_obf.hpp"
#include "obflab/analytic_olbf.hpp"
#include "obflab/channel.hpp"
#include "obflab/numerics.hpp"
#include "obflab/schedulers.hpp"

using namespace obflab;

namespace {

void BM_UpperIncompleteGamma(benchmark::State& state) {
  const int s = static_cast<int>(state.range(0));
  double x = 0.5;
  for (auto _ : state) {
    benchmark::DoNotOptimize(numerics::upper_incomplete_gamma(s, x));
    x = x < 20.0 ? x + 0.25 : 0.5;
  }
}
BENCHMARK(BM_UpperIncompleteGamma)->Arg(-3)->Arg(0)->Arg(4)->Arg(12);

void BM_ExpIntegralE1(benchmark::State& state) {
  double x = 0.01;
  for (auto _ : state) {
    benchmark::DoNotOptimize(numerics::exp_integral_e1(x));
    x = x < 30.0 ? x * 1.1 : 0.01;
  }
}
BENCHMARK(BM_ExpIntegralE1);

void BM_DrawChannels(benchmark::State& state) {
  const SystemParams p{3, static_cast<int>(state.range(0)), 10.0, 3};
  std::uint64_t t = 0;
  for (auto _ : state) benchmark::DoNotOptimize(draw_channels(p, {1, t++}));
}
BENCHMARK(BM_DrawChannels)->Arg(10)->Arg(20);

template <typename F>
void schedule(benchmark::State& state, F&& f) {
  const SystemParams p{static_cast<int>(state.range(0)), 10, 10.0, static_cast<int>(state.range(0))};
  std::vector<ChannelSet> hs;
  for (std::uint64_t t = 0; t < 64; ++t) hs.push_back(draw_channels(p, {2, t}));
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(f(hs[i++ % hs.size()], p));
}

void BM_AdaptiveObf(benchmark::State& state) {
  schedule(state, [](const ChannelSet& h, const SystemParams& p) {
    return adaptive_obf(h, p.power, ObfMode::force(p.scheduled)).sum_rate;
  });
}
BENCHMARK(BM_AdaptiveObf)->Arg(2)->Arg(3)->Arg(4);

void BM_Olbf(benchmark::State& state) {
  schedule(state, [](const ChannelSet& h, const SystemParams& p) { return olbf(h, p.power).sum_rate; });
}
BENCHMARK(BM_Olbf)->Arg(2)->Arg(3)->Arg(4);

void BM_Zfdp(benchmark::State& state) {
  schedule(state, [](const ChannelSet& h, const SystemParams& p) { 
    return greedy_zfdp_schedule(h, p.power, p.scheduled).sum_rate;
  });
}
BENCHMARK(BM_Zfdp)->Arg(2)->Arg(3)->Arg(4);

void BM_ObfPhi3(benchmark::State& state) {
  const ObfParams p{3, 10, 3, 10.0};
  const std::vector<double> ys{4.0, 1.5, 0.6};
  for (auto _ : state) benchmark::DoNotOptimize(obf_phi(ys, p));
}
BENCHMARK(BM_ObfPhi3);

void BM_ObfJointScheduled(benchmark::State& state) {
  const ObfParams p{3, 10, 3, 10.0};
  const std::vector<double> ys{9.0, 4.0, 1.0};
  for (auto _ : state) benchmark::DoNotOptimize(obf_joint_pdf_scheduled(ys, p));
}
BENCHMARK(BM_ObfJointScheduled);

void BM_OlbfCdf(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const OlbfParams p{4, 10, 10.0};
  std::vector<double> ts{0.8, 0.3, 0.2, 0.1};
  ts.resize(n);
  for (auto _ : state) benchmark::DoNotOptimize(olbf_cdf_z(ts, p).value);
}
BENCHMARK(BM_OlbfCdf)->DenseRange(1, 4);

void BM_OlbfJointPdf(benchmark::State& state) {
  const OlbfParams p{3, 10, 10.0};
  const std::vector<double> ts{0.8, 0.3, 0.2};
  for (auto _ : state) benchmark::DoNotOptimize(olbf_joint_pdf_t(ts, p));
}
BENCHMARK(BM_OlbfJointPdf);

void BM_ObfMarginalGrid(benchmark::State& state) {
  const ObfParams p{3, 10, 3, 31.6227766};
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(obf_marginal_grid(n, p).total_mass());
}
BENCHMARK(BM_ObfMarginalGrid)->DenseRange(1, 3)->Unit(benchmark::kMillisecond);

void BM_OlbfMarginalGrid(benchmark::State& state) {
  const OlbfParams p{3, 10, 31.6227766};
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(olbf_marginal_grid(n, p).total_mass());
}
BENCHMARK(BM_OlbfMarginalGrid)->DenseRange(1, 3)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
