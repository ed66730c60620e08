#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "superbunch/correlator.hpp"
#include "superbunch/detection.hpp"
#include "superbunch/errors.hpp"
#include "superbunch/pipeline.hpp"
#include "superbunch/signal.hpp"
#include "superbunch/speckle.hpp"

using namespace superbunch;

namespace {

constexpr double kPi = std::numbers::pi;

IntensityTrace constant_trace(double level, double duration, double dt = 1e-5) {
  IntensityTrace t;
  t.dt = dt;
  t.samples.assign(static_cast<std::size_t>(std::llround(duration / dt)), level);
  t.declared_mean = 1.0;
  return t;
}

std::set<std::pair<std::uint64_t, int>> as_set(const PhotonStream& s) {
  std::set<std::pair<std::uint64_t, int>> out;
  for (auto t : s.d1) out.insert({t, 1});
  for (auto t : s.d2) out.insert({t, 2});
  return out;
}

}  // namespace

TEST(Detection, HomogeneousCountsArePoisson) {
  // r T = 10^5 per channel.
  DetectorConfig cfg;
  cfg.rate = 1e4;
  const auto stream = detect_photons(constant_trace(1.0, 10.0), cfg, 3);
  const double expect = 1e5;
  EXPECT_LT(std::abs(static_cast<double>(stream.d1.size()) - expect), 3 * std::sqrt(expect));
  EXPECT_LT(std::abs(static_cast<double>(stream.d2.size()) - expect), 3 * std::sqrt(expect));
}

TEST(Detection, DoublingIntensityDoublesCounts) {
  DetectorConfig cfg;
  cfg.rate = 1e4;
  const auto one = detect_photons(constant_trace(1.0, 10.0), cfg, 4);
  const auto two = detect_photons(constant_trace(2.0, 10.0), cfg, 5);
  const double n1 = static_cast<double>(one.total());
  const double n2 = static_cast<double>(two.total());
  const double ratio = n2 / n1;
  const double sigma = ratio * std::sqrt(1 / n1 + 1 / n2);
  EXPECT_LT(std::abs(ratio - 2.0), 3 * sigma);
}

TEST(Detection, ConservationAndSymmetry) {
  DetectorConfig cfg;
  cfg.rate = 2e4;
  const auto input = sample_intensity(ConstantModulation{1.0}, 0.0, 1e-6, 2000000, 1);
  const auto field = generate_speckle_field({2 * kPi * 1e4, 1.0, 9}, 0.0, 1e-6, 2000000);
  const auto stream = detect_photons(apply_speckle(input, field), cfg, 6);
  EXPECT_EQ(stream.d1.size() + stream.d2.size(), stream.accepted);
  const double total = static_cast<double>(stream.total());
  EXPECT_LT(std::abs(static_cast<double>(stream.d1.size()) -
                     static_cast<double>(stream.d2.size())),
            4 * std::sqrt(total / 4));
  EXPECT_TRUE(std::is_sorted(stream.d1.begin(), stream.d1.end()));
  EXPECT_TRUE(std::is_sorted(stream.d2.begin(), stream.d2.end()));
  EXPECT_LE(stream.d1.back(), 2000000000u);
}

TEST(Detection, DarkCountsAddToTheSignal) {
  DetectorConfig cfg;
  cfg.rate = 1e3;
  cfg.dark_rate = 500;
  const auto stream = detect_photons(constant_trace(1.0, 20.0), cfg, 7);
  EXPECT_EQ(stream.total(), stream.accepted + stream.dark);
  EXPECT_LT(std::abs(static_cast<double>(stream.dark) - 2e4), 3 * std::sqrt(2e4));
}

TEST(Detection, MonotoneThinning) {
  // I_a <= I_b pointwise with the same seed: accepted(I_a) is a subset of accepted(I_b).
  const auto field = generate_speckle_field({2 * kPi * 1e4, 1.0, 31}, 0.0, 1e-6, 500000);
  IntensityTrace b = field.intensity();
  IntensityTrace a = b;
  for (std::size_t i = 0; i < a.size(); ++i) {
    a.samples[i] *= 0.5 + 0.5 * std::sin(1e-3 * static_cast<double>(i)) * std::sin(1e-3 * i);
  }
  DetectorConfig cfg;
  cfg.rate = 5e4;
  const auto sa = as_set(detect_photons(a, cfg, 77));
  const auto sb = as_set(detect_photons(b, cfg, 77));
  EXPECT_LT(sa.size(), sb.size());
  EXPECT_TRUE(std::includes(sb.begin(), sb.end(), sa.begin(), sa.end()));
}

TEST(Detection, IndependentOfThreadCount) {
  const auto field = generate_speckle_field({2 * kPi * 1e4, 1.0, 32}, 0.0, 1e-6, 300000);
  DetectorConfig cfg;
  const auto one = detect_photons(field.intensity(), cfg, 1, 1);
  const auto four = detect_photons(field.intensity(), cfg, 1, 4);
  EXPECT_EQ(one.d1, four.d1);
  EXPECT_EQ(one.d2, four.d2);
}

TEST(Detection, TimestampsAreQuantized) {
  DetectorConfig cfg;
  cfg.rate = 1e4;
  cfg.resolution = 8e-9;
  const auto stream = detect_photons(constant_trace(1.0, 1.0), cfg, 8);
  for (auto t : stream.d1) ASSERT_EQ(t % 8, 0u);
}

TEST(Detection, Errors) {
  DetectorConfig cfg;
  cfg.rate = 2e8;
  EXPECT_THROW(detect_photons(constant_trace(1.0, 1e-3), cfg, 1), ResolutionError);
  cfg.rate = 1e3;
  EXPECT_THROW(detect_photons(IntensityTrace{}, cfg, 1), DomainError);
  auto negative = constant_trace(1.0, 1e-3);
  negative.samples[3] = -1.0;
  EXPECT_THROW(detect_photons(negative, cfg, 1), DomainError);
  cfg.resolution = 1.5e-9;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Detection, SpeckleOnlyBunchingIsTwo) {
  PipelineConfig p;
  p.modulation = ConstantModulation{1.0};
  p.duration = 5.0;
  p.frame_samples = 1000000;
  p.detector.rate = 5e4;
  p.window = 100e-6;
  p.bin_width = 1e-6;
  p.seed = 2024;
  const auto result = run_pipeline(p);
  EXPECT_GE(result.histogram.total(), 1000000u);
  const auto curve = normalize_g2(result.histogram);
  const std::size_t h = result.histogram.geometry.half();
  // Central four bins span |tau| <= 2 us where sinc^2 > 0.998.
  const double g0 = (curve.value[h - 2] + curve.value[h - 1] + curve.value[h] + curve.value[h + 1]) / 4;
  EXPECT_NEAR(g0, 2.0, 0.05);
}

TEST(Detection, PhotonEstimateConvergesToTraceCorrelation) {
  // Same intensity trace, two count levels 16x apart in pairs: the rms gap
  // between photon g2 and the trace-level correlation shrinks ~4x.
  const std::size_t n = 1000000;
  const double dt = 1e-6;
  const auto input = sample_intensity(ConstantModulation{1.0}, 0.0, dt, n, 1);
  const auto field = generate_speckle_field({2 * kPi * 1e4, 1.0, 41}, 0.0, dt, n);
  const auto trace = apply_speckle(input, field);
  const auto gamma = modulation_autocorrelation(trace, 100e-6);
  const auto geometry = HistogramGeometry::from_seconds(10e-6, 100e-6);

  auto rms_gap = [&](double rate, std::uint64_t seed) {
    DetectorConfig cfg;
    cfg.rate = rate;
    const auto stream = detect_photons(trace, cfg, seed);
    const auto curve = normalize_g2(coincidence_histogram(stream.d1, stream.d2, geometry, 1.0));
    double sq = 0.0;
    for (std::size_t b = 0; b < curve.size(); ++b) {
      // Bin average of the trace correlation over its lag samples (trapezoid).
      const double a = std::abs(curve.lag[b]) - 5e-6;
      const auto k0 = static_cast<std::size_t>(std::llround(a / dt));
      double acc = 0.5 * (gamma.value[k0] + gamma.value[k0 + 10]);
      for (std::size_t k = k0 + 1; k < k0 + 10; ++k) acc += gamma.value[k];
      sq += std::pow(curve.value[b] - acc / 10.0, 2);
    }
    return std::sqrt(sq / static_cast<double>(curve.size()));
  };
  const double low = rms_gap(1e4, 100);
  const double high = rms_gap(4e4, 101);
  EXPECT_GT(low / high, 2.0);
  EXPECT_LT(low / high, 8.0);
}

TEST(PhotonStream, RecordsRoundTrip) {
  PhotonStream s;
  s.d1 = {1, 5, 9};
  s.d2 = {2, 5, 10};
  s.duration = 1e-6;
  const auto records = s.records();
  ASSERT_EQ(records.size(), 6u);
  EXPECT_EQ(records[2].timestamp_ns, 5u);
  EXPECT_EQ(records[2].channel, Channel::D1);
  const auto back = PhotonStream::from_records(records, 1e-6);
  EXPECT_EQ(back.d1, s.d1);
  EXPECT_EQ(back.d2, s.d2);
  std::vector<PhotonRecord> unsorted = {{5, Channel::D1}, {4, Channel::D2}};
  EXPECT_THROW(PhotonStream::from_records(unsorted, 1.0), DomainError);
}

TEST(PhotonStream, AppendRequiresTimeOrder) {
  PhotonStream a;
  a.d1 = {1, 2};
  a.duration = 1.0;
  PhotonStream b;
  b.d1 = {3};
  b.duration = 2.0;
  a.append(b);
  EXPECT_EQ(a.d1, (std::vector<std::uint64_t>{1, 2, 3}));
  EXPECT_DOUBLE_EQ(a.duration, 3.0);
  PhotonStream c;
  c.d1 = {0};
  EXPECT_THROW(a.append(c), DomainError);
}
