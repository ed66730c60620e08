#pragma once

#include <cstddef>
#include <cstdint>

#include "superbunch/correlator.hpp"
#include "superbunch/detection.hpp"
#include "superbunch/signal.hpp"
#include "superbunch/speckle.hpp"

namespace superbunch {

/// One end-to-end simulation: modulation -> groundglass -> HBT detection ->
/// coincidence histogram.
struct PipelineConfig {
  ModulationModel modulation = ConstantModulation{};
  double speckle_bandwidth = 2.0 * 3.14159265358979323846 * 1e4;  // rad/s
  double speckle_gain = 1.0;
  double sample_interval = 1e-6;     // s
  std::size_t frame_samples = 1u << 20;
  double duration = 100.0;           // s, rounded up to whole frames
  DetectorConfig detector{};
  double bin_width = 0.0;            // s; 0 selects window / 500
  double window = 200e-6;            // s
  std::uint64_t seed = 1;
  int threads = 1;

  void validate() const;
  std::size_t frame_count() const;
  double frame_duration() const;
  /// frame_count() * frame_duration(): the T used to normalize g2.
  double acquisition_time() const;
  double effective_bin_width() const;
};

struct PipelineResult {
  PhotonStream photons;
  CoincidenceHistogram histogram;
  /// Some frame is shorter than ten modulation correlation times.
  bool short_frames = false;
};

/// Seeds per frame f: derive_seed(seed, "signal", f), derive_seed(seed,
/// "speckle", f) and derive_seed(seed, "detect", f). Frames are simulated
/// in parallel and concatenated in order, so the result depends only on
/// the configuration, never on `threads`.
PipelineResult run_pipeline(const PipelineConfig& config);

/// Intensity seen by the detectors in frame f (modulation times speckle).
IntensityTrace simulate_frame(const PipelineConfig& config, std::size_t frame);

}  // namespace superbunch
