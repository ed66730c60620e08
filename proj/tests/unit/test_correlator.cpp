#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "superbunch/correlator.hpp"
#include "superbunch/errors.hpp"
#include "superbunch/pipeline.hpp"
#include "superbunch/rng.hpp"

using namespace superbunch;

namespace {

std::vector<std::uint64_t> poisson_times(double rate, double duration, std::uint64_t seed,
                                         std::uint64_t quantum = 1) {
  Rng rng(seed);
  std::exponential_distribution<double> gap(rate);
  std::vector<std::uint64_t> out;
  for (double t = gap(rng); t < duration; t += gap(rng)) {
    out.push_back(static_cast<std::uint64_t>(t * 1e9) / quantum * quantum);
  }
  return out;
}

}  // namespace

TEST(HistogramGeometry, Validation) {
  const auto g = HistogramGeometry::from_seconds(1e-6, 100e-6);
  EXPECT_EQ(g.bins(), 200u);
  EXPECT_EQ(g.half(), 100u);
  EXPECT_DOUBLE_EQ(g.bin_center(100), 0.5e-6);
  EXPECT_DOUBLE_EQ(g.bin_center(99), -0.5e-6);
  EXPECT_THROW(HistogramGeometry::from_seconds(1.5e-9, 100e-6), DomainError);
  EXPECT_THROW(HistogramGeometry::from_seconds(3e-6, 100e-6), DomainError);
  EXPECT_THROW(HistogramGeometry::from_seconds(20e-6, 100e-6), DomainError);
}

TEST(Coincidence, MatchesAllPairsOracle) {
  const auto a = poisson_times(2e5, 0.02, 1, 5);  // coarse quanta force zero-lag ties
  const auto b = poisson_times(2e5, 0.02, 2, 5);
  const auto g = HistogramGeometry::from_seconds(100e-9, 2e-6);
  const auto hist = coincidence_histogram(a, b, g, 0.02);
  EXPECT_EQ(hist.counts, oracle::all_pairs_histogram(a, b, 100, 2000, false));
  std::uint64_t pairs = 0;
  for (auto t1 : a) {
    for (auto t2 : b) pairs += std::llabs(static_cast<long long>(t1 - t2)) <= 2000;
  }
  EXPECT_EQ(hist.total(), pairs);
}

TEST(Coincidence, AutocorrelationIsSymmetricAndMatchesOracle) {
  const auto a = poisson_times(3e5, 0.02, 3, 10);
  const auto g = HistogramGeometry::from_seconds(50e-9, 1e-6);
  const auto hist = autocorrelation_histogram(a, g, 0.02);
  const auto n = hist.size();
  for (std::size_t b = 0; b < n; ++b) EXPECT_EQ(hist.counts[b], hist.counts[n - 1 - b]);
  EXPECT_EQ(hist.counts, oracle::all_pairs_histogram(a, a, 50, 1000, true));
}

TEST(Coincidence, IndependentStreamsAreFlat) {
  const double rate = 5e4, duration = 20.0;
  const auto a = poisson_times(rate, duration, 4);
  const auto b = poisson_times(rate, duration, 5);
  const auto g = HistogramGeometry::from_seconds(1e-6, 100e-6);
  const auto hist = coincidence_histogram(a, b, g, duration);
  const double expect = static_cast<double>(a.size()) * static_cast<double>(b.size()) *
                        1e-6 / duration;
  double chi2 = 0.0;
  for (auto c : hist.counts) chi2 += std::pow(static_cast<double>(c) - expect, 2) / expect;
  const double dof = static_cast<double>(hist.size());
  EXPECT_LT(std::abs(chi2 - dof), 5 * std::sqrt(2 * dof));
  const auto curve = normalize_g2(hist);
  EXPECT_GT(hist.total(), 1000000u);
  const double mean = std::accumulate(curve.value.begin(), curve.value.end(), 0.0) / dof;
  EXPECT_NEAR(mean, 1.0, 0.01);
}

TEST(Coincidence, ShiftedCopyLandsInOneBin) {
  const auto a = poisson_times(1e3, 1.0, 6);
  std::vector<std::uint64_t> b(a);
  for (auto& t : b) t += 5000;  // +5 bin widths of 1 us
  const auto g = HistogramGeometry::from_seconds(1e-6, 20e-6);
  const auto hist = coincidence_histogram(a, b, g, 1.0);
  const std::size_t target = g.half() - 5;  // lag -5 us sits on the closed edge of [-5, -4) us
  EXPECT_GE(hist.counts[target], a.size());
  const auto accidental = hist.total() - a.size();
  EXPECT_LT(accidental, 100u);  // ~ N^2 2W / T = 40
}

TEST(Coincidence, ThreadCountDoesNotChangeCounts) {
  const auto a = poisson_times(2e5, 2.0, 7);
  const auto b = poisson_times(2e5, 2.0, 8);
  const auto g = HistogramGeometry::from_seconds(1e-6, 50e-6);
  EXPECT_EQ(coincidence_histogram(a, b, g, 2.0, 1).counts,
            coincidence_histogram(a, b, g, 2.0, 3).counts);
}

TEST(Coincidence, MergeOverStartSegments) {
  const auto a = poisson_times(1e5, 1.0, 9);
  const auto b = poisson_times(1e5, 1.0, 10);
  const auto g = HistogramGeometry::from_seconds(1e-6, 50e-6);
  const auto whole = coincidence_histogram(a, b, g, 1.0);
  CoincidenceHistogram merged;
  const std::size_t cut1 = a.size() / 3, cut2 = 2 * a.size() / 3;
  const std::span<const std::uint64_t> all(a);
  for (auto [lo, hi] : {std::pair{std::size_t{0}, cut1}, std::pair{cut1, cut2},
                        std::pair{cut2, a.size()}}) {
    auto part = coincidence_histogram(all.subspan(lo, hi - lo), b, g, 1.0);
    part.singles2 = 0;
    part.acquisition_time = lo == 0 ? 1.0 : 0.0;
    if (lo == 0) {
      merged = part;
      merged.singles2 = b.size();
    } else {
      merged += part;
    }
  }
  EXPECT_EQ(merged.counts, whole.counts);
  EXPECT_EQ(merged.singles1, whole.singles1);
  EXPECT_EQ(merged.singles2, whole.singles2);
}

TEST(Coincidence, SegmentHistogramsPartitionTheStream) {
  PhotonStream s;
  s.d1 = poisson_times(1e5, 1.0, 11);
  s.d2 = poisson_times(1e5, 1.0, 12);
  s.duration = 1.0;
  const auto parts = segment_histograms(s, 1e-6, 20e-6, 4);
  ASSERT_EQ(parts.size(), 4u);
  CoincidenceHistogram sum = parts[0];
  for (std::size_t k = 1; k < 4; ++k) sum += parts[k];
  const auto whole = coincidence_histogram(s, 1e-6, 20e-6);
  EXPECT_EQ(sum.singles1, whole.singles1);
  EXPECT_EQ(sum.singles2, whole.singles2);
  EXPECT_DOUBLE_EQ(sum.acquisition_time, 1.0);
  EXPECT_LE(sum.total(), whole.total());
  EXPECT_GT(sum.total(), whole.total() * 99 / 100);
}

TEST(Coincidence, Errors) {
  const auto g = HistogramGeometry::from_seconds(1e-6, 20e-6);
  std::vector<std::uint64_t> sorted = {1, 2, 3}, unsorted = {3, 1, 2}, empty;
  EXPECT_THROW(coincidence_histogram(unsorted, sorted, g, 1.0), DomainError);
  EXPECT_THROW(coincidence_histogram(sorted, unsorted, g, 1.0), DomainError);
  EXPECT_THROW(coincidence_histogram(empty, sorted, g, 1.0), DegenerateInputError);
  EXPECT_THROW(coincidence_histogram(sorted, sorted, g, 0.0), DomainError);
}

TEST(NormalizeG2, FormulaAndEmptyBins) {
  CoincidenceHistogram h;
  h.geometry = HistogramGeometry::from_seconds(1e-6, 10e-6);
  h.counts.assign(20, 100);
  h.counts[3] = 0;
  h.counts[16] = 300;
  h.singles1 = 1000;
  h.singles2 = 2000;
  h.acquisition_time = 20.0;
  const double scale = 20.0 / (1000.0 * 2000.0 * 1e-6);
  const auto c = normalize_g2(h);
  EXPECT_DOUBLE_EQ(c.value[0], 100 * scale);
  EXPECT_DOUBLE_EQ(c.stderr_[0], 100 * scale / 10.0);
  EXPECT_EQ(c.value[3], 0.0);
  EXPECT_DOUBLE_EQ(c.stderr_[3], scale);
  const auto s = normalize_g2(h, true);
  EXPECT_DOUBLE_EQ(s.value[3], 300 * scale / 2);  // pooled with bin 16
  EXPECT_DOUBLE_EQ(s.value[16], s.value[3]);
  h.singles1 = 0;
  EXPECT_THROW(normalize_g2(h), DegenerateInputError);
}

TEST(RPb, FlatAndPeaked) {
  CoincidenceHistogram h;
  h.geometry = HistogramGeometry::from_seconds(1e-6, 20e-6);
  h.counts.assign(40, 1000);
  h.singles1 = 100000;
  h.singles2 = 100000;
  h.acquisition_time = 10.0;  // accidental level = 1000 per bin
  auto flat = r_pb(h);
  EXPECT_DOUBLE_EQ(flat.ratio, 1.0);
  EXPECT_FALSE(flat.background_unreliable);
  h.counts[20] = 2000;
  const auto peaked = r_pb(h);
  EXPECT_DOUBLE_EQ(peaked.ratio, 2.0);
  EXPECT_EQ(peaked.peak_bin, 20u);
  EXPECT_TRUE(r_pb(h, 6e-6).background_unreliable);   // > window / 4
  EXPECT_FALSE(r_pb(h, 4e-6).background_unreliable);
  for (auto& c : h.counts) c += 500;  // background 1.5x the accidental level
  EXPECT_TRUE(r_pb(h).background_unreliable);
  h.geometry = HistogramGeometry::from_seconds(1e-6, 10e-6);
  h.counts.assign(20, 0);
  EXPECT_THROW(r_pb(h), DegenerateInputError);
}

TEST(RPb, SlowNoiseModulationUnderestimates) {
  // 1/nu0 = 5 ms is far beyond the 1 ms window: the outer bins are still bunched.
  PipelineConfig p;
  p.modulation = BandNoiseModulation{1.0, 200.0, {}, {}};
  p.sample_interval = 2e-6;
  p.frame_samples = 2000000;
  p.duration = 16.0;
  p.detector.rate = 2e4;
  p.window = 1e-3;
  p.bin_width = 10e-6;
  p.seed = 5;
  const auto result = run_pipeline(p);
  const auto pb = r_pb(result.histogram);
  EXPECT_TRUE(pb.background_unreliable);
  EXPECT_LT(pb.ratio, 3.0);  // true g2(0) is 4
}

TEST(Csv, Headers) {
  CoincidenceHistogram h;
  h.geometry = HistogramGeometry::from_seconds(1e-6, 10e-6);
  h.counts.assign(20, 1);
  h.singles1 = h.singles2 = 10;
  h.acquisition_time = 1.0;
  std::ostringstream hist_out, g2_out;
  write_histogram_csv(hist_out, h);
  write_g2_csv(g2_out, normalize_g2(h));
  EXPECT_EQ(hist_out.str().substr(0, 13), "tau_s,counts\n");
  EXPECT_EQ(g2_out.str().substr(0, 16), "tau_s,g2,stderr\n");
}
