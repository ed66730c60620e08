#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "superbunch/signal.hpp"

namespace superbunch {

enum class Channel : std::uint8_t { D1 = 1, D2 = 2 };

/// One detection event. Timestamps are whole nanoseconds.
struct PhotonRecord {
  std::uint64_t timestamp_ns = 0;
  Channel channel = Channel::D1;

  friend bool operator==(const PhotonRecord&, const PhotonRecord&) = default;
};

/// Time-tagged events of both HBT detectors over an acquisition of length
/// `duration`. Each channel is sorted ascending.
struct PhotonStream {
  std::vector<std::uint64_t> d1;
  std::vector<std::uint64_t> d2;
  double duration = 0.0;           // acquisition time T, s
  std::uint64_t accepted = 0;      // signal photons before the beam splitter
  std::uint64_t dark = 0;          // dark counts over both channels

  std::size_t total() const { return d1.size() + d2.size(); }

  /// Both channels merged by timestamp; D1 precedes D2 on ties.
  std::vector<PhotonRecord> records() const;

  /// Splits time-ordered records into channels. Throws DomainError when the
  /// records are not sorted by timestamp.
  static PhotonStream from_records(std::span<const PhotonRecord> records, double duration);

  /// Appends a stream that starts no earlier than this one ends.
  void append(const PhotonStream& later);
};

struct DetectorConfig {
  double rate = 5.0e4;        // mean counts/s per detector at the trace's declared mean
  double split_ratio = 0.5;   // fraction of photons routed to D1
  double resolution = 1e-9;   // timestamp quantum, s (whole nanoseconds)
  double dark_rate = 0.0;     // additive counts/s per detector

  void validate() const;
  std::uint64_t resolution_ns() const;
};

/// Samples photon arrivals from the inhomogeneous Poisson process with
/// per-detector rate  rate * I(t) / declared_mean  (linear interpolation
/// between samples), routes each to D1 or D2, and quantizes timestamps.
///
/// Thinning is done on a marked Poisson process in the (time, intensity)
/// plane whose points depend only on the seed and the sample grid, so for
/// two traces with I_a <= I_b pointwise (same grid, same declared mean) the
/// accepted set under I_a is a subset of that under I_b. Output does not
/// depend on `threads`.
///
/// Throws DomainError for an empty or negative trace and ResolutionError
/// when the peak rate times the resolution exceeds 0.1.
PhotonStream detect_photons(const IntensityTrace& intensity, const DetectorConfig& cfg,
                            std::uint64_t seed, int threads = 1);

}  // namespace superbunch
