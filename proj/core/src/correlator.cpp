#include "superbunch/correlator.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "superbunch/errors.hpp"
#include "superbunch/parallel.hpp"
#include "superbunch/rng.hpp"

namespace superbunch {
namespace {

std::int64_t whole_ns(double seconds, const char* name) {
  const double ns = seconds * 1e9;
  const double rounded = std::round(ns);
  if (!(rounded >= 1.0) || std::abs(ns - rounded) > 1e-3) {
    throw DomainError(fmt::format("correlator: {} must be a positive whole number of ns", name));
  }
  return static_cast<std::int64_t>(rounded);
}

void require_sorted(std::span<const std::uint64_t> v, const char* name) {
  if (!std::is_sorted(v.begin(), v.end())) {
    throw DomainError(fmt::format("correlator: {} timestamps are not sorted", name));
  }
}

// Self-correlation ties split by index order, which keeps the histogram symmetric.
// Cross ties split by a hash of the timestamp so the result does not depend on how
// the start channel is segmented.
bool zero_lag_upper(std::uint64_t t, std::size_t i, std::size_t j, bool self) {
  return self ? i < j : (splitmix64(t) & 1U) != 0;
}

// Counts pairs (i, j) for i in [first, last). `skip_self` drops j == i.
void count_range(std::span<const std::uint64_t> starts, std::span<const std::uint64_t> stops,
                 const HistogramGeometry& g, std::size_t first, std::size_t last,
                 bool skip_self, std::vector<std::uint64_t>& counts) {
  const std::int64_t w = g.bin_width_ns;
  const std::int64_t window = g.window_ns;
  const auto half = static_cast<std::int64_t>(g.half());
  const auto window_u = static_cast<std::uint64_t>(window);

  auto lo = static_cast<std::size_t>(
      std::lower_bound(stops.begin(), stops.end(),
                       starts[first] > window_u ? starts[first] - window_u : 0) -
      stops.begin());
  for (std::size_t i = first; i < last; ++i) {
    const std::uint64_t t1 = starts[i];
    while (lo < stops.size() && stops[lo] + window_u < t1) ++lo;
    for (std::size_t j = lo; j < stops.size() && stops[j] <= t1 + window_u; ++j) {
      if (skip_self && j == i) continue;
      const auto d = static_cast<std::int64_t>(t1) - static_cast<std::int64_t>(stops[j]);
      std::int64_t bin;
      if (d > 0) {
        bin = half + (d - 1) / w;
      } else if (d < 0) {
        bin = half - 1 - (-d - 1) / w;
      } else {
        bin = zero_lag_upper(t1, i, j, skip_self) ? half : half - 1;
      }
      ++counts[static_cast<std::size_t>(bin)];
    }
  }
}

CoincidenceHistogram correlate(std::span<const std::uint64_t> starts,
                               std::span<const std::uint64_t> stops,
                               const HistogramGeometry& geometry, double acquisition_time,
                               int threads, bool skip_self) {
  if (starts.empty() || stops.empty()) {
    throw DegenerateInputError("correlator: empty channel");
  }
  require_sorted(starts, "start");
  require_sorted(stops, "stop");
  if (!(acquisition_time > 0.0)) {
    throw DomainError("correlator: acquisition time must be positive");
  }

  CoincidenceHistogram hist;
  hist.geometry = geometry;
  hist.singles1 = starts.size();
  hist.singles2 = stops.size();
  hist.acquisition_time = acquisition_time;

  // Fixed chunking so the partial sums, and thus the result, never depend
  // on the worker count.
  constexpr std::size_t kChunk = 1 << 16;
  const std::size_t chunks = (starts.size() + kChunk - 1) / kChunk;
  std::vector<std::vector<std::uint64_t>> partial(
      chunks, std::vector<std::uint64_t>(geometry.bins(), 0));
  parallel_for(chunks, threads, [&](std::size_t c) {
    const std::size_t first = c * kChunk;
    const std::size_t last = std::min(first + kChunk, starts.size());
    count_range(starts, stops, geometry, first, last, skip_self, partial[c]);
  });
  hist.counts.assign(geometry.bins(), 0);
  for (const auto& p : partial) {
    for (std::size_t b = 0; b < p.size(); ++b) hist.counts[b] += p[b];
  }
  return hist;
}

}  // namespace

HistogramGeometry HistogramGeometry::from_seconds(double bin_width, double window) {
  HistogramGeometry g{whole_ns(bin_width, "bin width"), whole_ns(window, "window")};
  if (g.window_ns % g.bin_width_ns != 0) {
    throw DomainError("correlator: window must be a whole number of bin widths");
  }
  if (g.window_ns < 10 * g.bin_width_ns) {
    throw DomainError("correlator: window must span at least ten bin widths");
  }
  return g;
}

double HistogramGeometry::bin_center(std::size_t b) const {
  return (static_cast<double>(b) - static_cast<double>(half()) + 0.5) * bin_width();
}

std::uint64_t CoincidenceHistogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

CoincidenceHistogram& CoincidenceHistogram::operator+=(const CoincidenceHistogram& other) {
  if (!(geometry == other.geometry)) {
    throw DomainError("CoincidenceHistogram: cannot merge histograms with different bins");
  }
  for (std::size_t b = 0; b < counts.size(); ++b) counts[b] += other.counts[b];
  singles1 += other.singles1;
  singles2 += other.singles2;
  acquisition_time += other.acquisition_time;
  return *this;
}

CoincidenceHistogram coincidence_histogram(const PhotonStream& stream, double bin_width,
                                           double window, int threads) {
  return coincidence_histogram(stream.d1, stream.d2,
                               HistogramGeometry::from_seconds(bin_width, window),
                               stream.duration, threads);
}

CoincidenceHistogram coincidence_histogram(std::span<const std::uint64_t> starts,
                                           std::span<const std::uint64_t> stops,
                                           const HistogramGeometry& geometry,
                                           double acquisition_time, int threads) {
  return correlate(starts, stops, geometry, acquisition_time, threads, false);
}

std::vector<CoincidenceHistogram> segment_histograms(const PhotonStream& stream,
                                                     double bin_width, double window,
                                                     std::size_t segments, int threads) {
  if (segments == 0) throw DomainError("segment_histograms: need at least one segment");
  if (!(stream.duration > 0.0)) {
    throw DomainError("segment_histograms: stream duration must be positive");
  }
  const auto geometry = HistogramGeometry::from_seconds(bin_width, window);
  const double slice = stream.duration / static_cast<double>(segments);
  auto edge = [&](std::size_t s) {
    return static_cast<std::uint64_t>(std::llround(1e9 * slice * static_cast<double>(s)));
  };
  auto cut = [](const std::vector<std::uint64_t>& v, std::uint64_t lo, std::uint64_t hi) {
    const auto first = std::lower_bound(v.begin(), v.end(), lo);
    const auto last = std::lower_bound(first, v.end(), hi);
    return std::span<const std::uint64_t>(v.data() + (first - v.begin()),
                                          static_cast<std::size_t>(last - first));
  };
  std::vector<CoincidenceHistogram> out;
  out.reserve(segments);
  for (std::size_t s = 0; s < segments; ++s) {
    const std::uint64_t lo = edge(s);
    const std::uint64_t hi = s + 1 == segments ? std::numeric_limits<std::uint64_t>::max()
                                               : edge(s + 1);
    out.push_back(coincidence_histogram(cut(stream.d1, lo, hi), cut(stream.d2, lo, hi),
                                        geometry, slice, threads));
  }
  return out;
}

CoincidenceHistogram autocorrelation_histogram(std::span<const std::uint64_t> timestamps,
                                               const HistogramGeometry& geometry,
                                               double acquisition_time) {
  return correlate(timestamps, timestamps, geometry, acquisition_time, 1, true);
}

G2Curve normalize_g2(const CoincidenceHistogram& hist, bool symmetrize) {
  if (hist.singles1 == 0 || hist.singles2 == 0) {
    throw DegenerateInputError("normalize_g2: a channel has no singles");
  }
  const auto& g = hist.geometry;
  const double scale = hist.acquisition_time /
                       (static_cast<double>(hist.singles1) *
                        static_cast<double>(hist.singles2) * g.bin_width());
  const std::size_t n = hist.size();

  G2Curve curve;
  curve.lag.resize(n);
  curve.value.resize(n);
  curve.stderr_.resize(n);
  for (std::size_t b = 0; b < n; ++b) {
    double c = static_cast<double>(hist.counts[b]);
    double pooled = 1.0;
    if (symmetrize) {
      c += static_cast<double>(hist.counts[n - 1 - b]);
      pooled = 2.0;
    }
    curve.lag[b] = g.bin_center(b);
    curve.value[b] = c * scale / pooled;
    curve.stderr_[b] = c > 0.0 ? curve.value[b] / std::sqrt(c) : scale / pooled;
  }
  return curve;
}

PeakBackground r_pb(const CoincidenceHistogram& hist, std::optional<double> correlation_time) {
  const std::size_t n = hist.size();
  if (n < 20) throw DomainError("r_pb: histogram needs at least 20 bins");
  const std::size_t outer = std::max<std::size_t>(1, (n + 5) / 10);  // per side

  std::uint64_t outer_sum = 0;
  for (std::size_t b = 0; b < outer; ++b) outer_sum += hist.counts[b] + hist.counts[n - 1 - b];
  if (outer_sum == 0) throw DegenerateInputError("r_pb: empty background bins");
  const double background = static_cast<double>(outer_sum) / static_cast<double>(2 * outer);

  PeakBackground out;
  out.peak_bin = static_cast<std::size_t>(
      std::max_element(hist.counts.begin(), hist.counts.end()) - hist.counts.begin());
  out.ratio = static_cast<double>(hist.counts[out.peak_bin]) / background;

  if (hist.singles1 > 0 && hist.singles2 > 0 && hist.acquisition_time > 0.0) {
    const double accidental = static_cast<double>(hist.singles1) *
                              static_cast<double>(hist.singles2) *
                              hist.geometry.bin_width() / hist.acquisition_time;
    out.background_g2 = background / accidental;
    out.background_sigma = out.background_g2 / std::sqrt(static_cast<double>(outer_sum));
    const double excess = out.background_g2 - 1.0;
    out.background_unreliable = excess > std::max(3.0 * out.background_sigma, 0.05);
  }
  if (correlation_time && *correlation_time > hist.geometry.window() / 4.0) {
    out.background_unreliable = true;
  }
  return out;
}

void write_histogram_csv(std::ostream& out, const CoincidenceHistogram& hist) {
  out << "tau_s,counts\n";
  for (std::size_t b = 0; b < hist.size(); ++b) {
    fmt::print(out, "{:.10e},{}\n", hist.geometry.bin_center(b), hist.counts[b]);
  }
}

void write_g2_csv(std::ostream& out, const G2Curve& curve) {
  out << "tau_s,g2,stderr\n";
  for (std::size_t i = 0; i < curve.size(); ++i) {
    fmt::print(out, "{:.10e},{:.10e},{:.10e}\n", curve.lag[i], curve.value[i],
               curve.stderr_[i]);
  }
}

}  // namespace superbunch
