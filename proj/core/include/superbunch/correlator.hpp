#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "superbunch/curve.hpp"
#include "superbunch/detection.hpp"

namespace superbunch {

/// Bin layout over t1 - t2 in [-window, +window], in whole nanoseconds.
/// Bin b >= half covers (k w, (k+1) w] with k = b - half; bin b < half
/// covers [-(half-b) w, -(half-b-1) w). In a self-correlation, zero-lag
/// pairs go to bin `half` when the first index is below the second and to
/// `half - 1` otherwise, which keeps the histogram exactly symmetric. In a
/// cross-correlation the low bit of splitmix64(t) picks `half` (set) or
/// `half - 1` (clear), so the split is independent of segmentation.
struct HistogramGeometry {
  std::int64_t bin_width_ns = 0;
  std::int64_t window_ns = 0;

  /// Converts seconds to nanoseconds. Throws DomainError when either value
  /// is not a whole number of nanoseconds, the window is not a multiple of
  /// the bin width, or the window spans fewer than ten bins.
  static HistogramGeometry from_seconds(double bin_width, double window);

  std::size_t bins() const { return static_cast<std::size_t>(2 * window_ns / bin_width_ns); }
  std::size_t half() const { return bins() / 2; }
  double bin_width() const { return 1e-9 * static_cast<double>(bin_width_ns); }
  double window() const { return 1e-9 * static_cast<double>(window_ns); }
  double bin_center(std::size_t b) const;

  friend bool operator==(const HistogramGeometry&, const HistogramGeometry&) = default;
};

/// Pair counts over lag t1 - t2 plus the singles needed to normalize them.
struct CoincidenceHistogram {
  HistogramGeometry geometry;
  std::vector<std::uint64_t> counts;
  std::uint64_t singles1 = 0;
  std::uint64_t singles2 = 0;
  double acquisition_time = 0.0;  // s

  std::size_t size() const { return counts.size(); }
  std::uint64_t total() const;

  /// Sums counts, singles and acquisition time of histograms taken on
  /// disjoint data with the same geometry.
  CoincidenceHistogram& operator+=(const CoincidenceHistogram& other);
};

/// All D1/D2 pairs with |t1 - t2| <= window (multi-start, multi-stop),
/// counted with a two-pointer sweep. Parallel workers split the D1 range;
/// counts do not depend on `threads`.
/// Throws DomainError on unsorted input, DegenerateInputError on an empty channel.
CoincidenceHistogram coincidence_histogram(const PhotonStream& stream, double bin_width,
                                           double window, int threads = 1);

CoincidenceHistogram coincidence_histogram(std::span<const std::uint64_t> starts,
                                           std::span<const std::uint64_t> stops,
                                           const HistogramGeometry& geometry,
                                           double acquisition_time, int threads = 1);

/// Histograms of `segments` equal, disjoint time slices of the stream
/// (pairs straddling a slice edge are dropped). Their scatter gives a
/// batch-means error that includes intensity-realization noise, which the
/// per-bin Poisson errors of normalize_g2 do not.
std::vector<CoincidenceHistogram> segment_histograms(const PhotonStream& stream,
                                                     double bin_width, double window,
                                                     std::size_t segments, int threads = 1);

/// Correlates one channel with itself, skipping each photon's pairing with
/// itself. The result is exactly mirror-symmetric.
CoincidenceHistogram autocorrelation_histogram(std::span<const std::uint64_t> timestamps,
                                               const HistogramGeometry& geometry,
                                               double acquisition_time);

/// g(tau) = counts T / (N1 N2 dtau), standard error g / sqrt(counts).
/// Empty bins get value 0 and the one-count level as an upper-bound error.
/// With `symmetrize`, each bin is pooled with its mirror bin.
G2Curve normalize_g2(const CoincidenceHistogram& hist, bool symmetrize = false);

struct PeakBackground {
  double ratio = 0.0;           // peak bin / mean of the outer 20% of bins
  std::size_t peak_bin = 0;
  double background_g2 = 0.0;   // outer-bin level in singles-normalized units
  double background_sigma = 0.0;
  /// Background is not the accidental floor, so `ratio` underestimates g2(0).
  bool background_unreliable = false;
};

/// Peak-to-background ratio of a raw histogram (>= 20 bins). The flag is
/// raised when `correlation_time` exceeds window/4, or when the outer bins
/// sit above the accidental level by more than max(3 sigma, 5%).
PeakBackground r_pb(const CoincidenceHistogram& hist,
                    std::optional<double> correlation_time = std::nullopt);

/// CSV with header `tau_s,counts`.
void write_histogram_csv(std::ostream& out, const CoincidenceHistogram& hist);

}  // namespace superbunch
