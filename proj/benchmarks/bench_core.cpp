#include <vector>

#include <benchmark/benchmark.h>

#include "qjump/cascade.hpp"
#include "qjump/fit.hpp"
#include "qjump/instrument.hpp"
#include "qjump/synth.hpp"

using namespace qjump;

namespace {

CascadeParams driven() {
  CascadeParams p;
  p.gamma30 = 1.0 / 27e-9;
  p.gamma23 = 1e9;
  p.omega_eff = 2.36e7;
  p.delta_eff = 5.65e7;
  return p;
}

SynthConfig reference_regime() {
  SynthConfig c;
  c.background_rate = 10.0;
  return c;
}

void BM_Evolve(benchmark::State& state) {
  const CascadeParams p = driven();
  const double span = static_cast<double>(state.range(0)) * 1e-9;
  for (auto _ : state) benchmark::DoNotOptimize(evolve(DensityMatrix{}, p, span, 1e-9));
}
BENCHMARK(BM_Evolve)->Arg(10)->Arg(100)->Arg(1000);

void BM_SteadyState(benchmark::State& state) {
  const CascadeParams p = driven();
  for (auto _ : state) benchmark::DoNotOptimize(steady_state(p));
}
BENCHMARK(BM_SteadyState);

void BM_PairCorrelation(benchmark::State& state) {
  const CascadeParams p = driven();
  const UniformGrid grid{-5e-9, 0.05e-9, 2000};
  const auto model = state.range(0) ? ConditionalModel::kNumeric : ConditionalModel::kAnalytic;
  for (auto _ : state) benchmark::DoNotOptimize(pair_correlation(p, grid, model));
}
BENCHMARK(BM_PairCorrelation)->Arg(0)->Arg(1);

// Response support in bins on a 6000-bin histogram.
template <bool Fft>
void BM_Convolve(benchmark::State& state) {
  const double bw = 10e-12;
  const DetectorResponse g = gaussian_response(static_cast<double>(state.range(0)) * bw / 3.0, bw);
  const ConvolutionPadding pad = convolution_padding(g);
  const std::vector<double> extended(6000 + pad.before + pad.after, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(Fft ? convolve_fft(extended, bw, g) : convolve_direct(extended, bw, g));
  }
  state.counters["support_bins"] = static_cast<double>(g.size());
}
BENCHMARK_TEMPLATE(BM_Convolve, false)->Arg(15)->Arg(150)->Arg(1500);
BENCHMARK_TEMPLATE(BM_Convolve, true)->Arg(15)->Arg(150)->Arg(1500);

void BM_ModelCurve(benchmark::State& state) {
  const SynthConfig c = reference_regime();
  const DetectorResponse g = gaussian_response(50e-12, c.bin_width);
  const ParamSet p = make_params(300.0, 10.0, c.dt0, 4.7e-12, 7e-9);
  const auto oversample = static_cast<unsigned>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(model_curve(p, g, c.grid(), oversample));
}
BENCHMARK(BM_ModelCurve)->Arg(0)->Arg(1)->Arg(4);

void BM_SampleEvents(benchmark::State& state) {
  SynthConfig c = reference_regime();
  c.n_pairs = static_cast<std::uint64_t>(state.range(0));
  const DetectorResponse g = gaussian_response(50e-12, c.bin_width);
  for (auto _ : state) benchmark::DoNotOptimize(sample_events(c, g, 1));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SampleEvents)->Arg(100'000)->Arg(1'000'000)->Unit(benchmark::kMillisecond);

void BM_Fit(benchmark::State& state) {
  const SynthConfig c = reference_regime();
  const DetectorResponse g = gaussian_response(50e-12, c.bin_width);
  const Histogram h = sample_events(c, g, 1);
  const FitSpec spec = default_fit_spec(h, g);
  for (auto _ : state) benchmark::DoNotOptimize(fit(h, g, spec));
}
BENCHMARK(BM_Fit)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
