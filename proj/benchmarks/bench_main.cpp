#include <benchmark/benchmark.h>

#include <algorithm>
#include <random>
#include <vector>

#include "superbunch/analytic.hpp"
#include "superbunch/correlator.hpp"
#include "superbunch/detection.hpp"
#include "superbunch/fit.hpp"
#include "superbunch/rng.hpp"
#include "superbunch/signal.hpp"
#include "superbunch/speckle.hpp"

using namespace superbunch;

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kBandwidth = 2 * kPi * 1e4;

std::vector<std::uint64_t> poisson_stream(double rate, double duration, std::uint64_t seed) {
  Rng rng(seed);
  std::exponential_distribution<double> gap(rate);
  std::vector<std::uint64_t> v;
  for (double t = gap(rng); t < duration; t += gap(rng)) {
    v.push_back(static_cast<std::uint64_t>(t * 1e9));
  }
  return v;
}

void BM_SpeckleSynthesis(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::uint64_t seed = 1;
  for (auto _ : state) {
    auto field = generate_speckle_field({kBandwidth, 1.0, seed++}, 0.0, 1e-6, n);
    benchmark::DoNotOptimize(field.samples.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SpeckleSynthesis)->Arg(1 << 16)->Arg(1 << 20)->Unit(benchmark::kMillisecond);

void BM_BandNoiseSynthesis(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto model = BandNoiseModulation::realistic(1.0, 200.0);
  std::uint64_t seed = 1;
  for (auto _ : state) {
    auto trace = sample_intensity(model, 0.0, 2e-6, n, seed++);
    benchmark::DoNotOptimize(trace.samples.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BandNoiseSynthesis)->Arg(1 << 20)->Unit(benchmark::kMillisecond);

void BM_Detection(benchmark::State& state) {
  const std::size_t n = 1 << 20;
  const auto field = generate_speckle_field({kBandwidth, 1.0, 7}, 0.0, 1e-6, n);
  const auto trace = field.intensity();
  DetectorConfig cfg;
  cfg.rate = static_cast<double>(state.range(0));
  std::uint64_t seed = 1;
  for (auto _ : state) {
    auto stream = detect_photons(trace, cfg, seed++);
    benchmark::DoNotOptimize(stream.d1.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Detection)->Arg(10'000)->Arg(100'000)->Unit(benchmark::kMillisecond);

void BM_CrossCorrelation(benchmark::State& state) {
  const double rate = static_cast<double>(state.range(0));
  const auto d1 = poisson_stream(rate, 10.0, 1);
  const auto d2 = poisson_stream(rate, 10.0, 2);
  const auto geometry = HistogramGeometry::from_seconds(1e-6, 200e-6);
  for (auto _ : state) {
    auto hist = coincidence_histogram(d1, d2, geometry, 10.0);
    benchmark::DoNotOptimize(hist.counts.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(d1.size()));
}
BENCHMARK(BM_CrossCorrelation)->Arg(10'000)->Arg(50'000)->Unit(benchmark::kMillisecond);

void BM_Autocorrelation(benchmark::State& state) {
  const auto field = generate_speckle_field({kBandwidth, 1.0, 3}, 0.0, 1e-6, 1 << 20);
  const auto trace = field.intensity();
  for (auto _ : state) {
    auto curve = modulation_autocorrelation(trace, 200e-6);
    benchmark::DoNotOptimize(curve.value.data());
  }
}
BENCHMARK(BM_Autocorrelation)->Unit(benchmark::kMillisecond);

void BM_FitSinusoid(benchmark::State& state) {
  const auto truth = TheoryModel::sinusoid_speckle(0.8, 2 * kPi * 5e4, kBandwidth);
  Rng rng(5);
  std::normal_distribution<double> gauss(0.0, 0.01);
  G2Curve curve;
  for (int i = 0; i < 1000; ++i) {
    const double tau = -500e-6 + 1e-6 * (i + 0.5);
    const double g = truth(tau);
    curve.lag.push_back(tau);
    curve.value.push_back(g * (1.0 + gauss(rng)));
    curve.stderr_.push_back(0.01 * g);
  }
  FitSpec spec;
  spec.initial = TheoryModel::sinusoid_speckle(0.6, 2 * kPi * 5.02e4, 0.8 * kBandwidth);
  spec.bin_width = 1e-6;
  for (auto _ : state) {
    auto fit = fit_g2(curve, spec);
    benchmark::DoNotOptimize(fit.chi_square);
  }
}
BENCHMARK(BM_FitSinusoid)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
