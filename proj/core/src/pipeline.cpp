#include "superbunch/pipeline.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "superbunch/errors.hpp"
#include "superbunch/parallel.hpp"
#include "superbunch/rng.hpp"

namespace superbunch {

void PipelineConfig::validate() const {
  superbunch::validate(modulation);
  detector.validate();
  if (!(speckle_bandwidth > 0.0) || !std::isfinite(speckle_bandwidth)) {
    throw ConfigError("speckle: bandwidth must be positive");
  }
  if (!(speckle_gain > 0.0)) throw ConfigError("speckle: gain must be positive");
  if (!(sample_interval > 0.0)) throw ConfigError("detection: sample_interval must be positive");
  if (frame_samples < 16) throw ConfigError("detection: frame_samples must be at least 16");
  if (!(duration > 0.0) || !std::isfinite(duration)) {
    throw ConfigError("detection: duration must be positive");
  }
  if (!(window > 0.0)) throw ConfigError("correlator: window must be positive");
  if (bin_width < 0.0) throw ConfigError("correlator: bin_width must be nonnegative");
  if (window > 0.5 * acquisition_time()) {
    throw ConfigError("correlator: window exceeds half the acquisition time");
  }
  if (threads < 1) throw ConfigError("run: threads must be at least 1");
}

double PipelineConfig::frame_duration() const {
  return sample_interval * static_cast<double>(frame_samples);
}

std::size_t PipelineConfig::frame_count() const {
  const double frames = duration / frame_duration();
  // Tolerate rounding in duration = k * frame_duration.
  return static_cast<std::size_t>(std::max(1.0, std::ceil(frames - 1e-9)));
}

double PipelineConfig::acquisition_time() const {
  return frame_duration() * static_cast<double>(frame_count());
}

double PipelineConfig::effective_bin_width() const {
  return bin_width > 0.0 ? bin_width : window / 500.0;
}

IntensityTrace simulate_frame(const PipelineConfig& config, std::size_t frame) {
  const double t0 = config.frame_duration() * static_cast<double>(frame);
  const IntensityTrace input =
      sample_intensity(config.modulation, t0, config.sample_interval, config.frame_samples,
                       derive_seed(config.seed, "signal", frame));
  const SpeckleParams speckle{config.speckle_bandwidth, config.speckle_gain,
                              derive_seed(config.seed, "speckle", frame)};
  const ComplexFieldTrace field =
      generate_speckle_field(speckle, t0, config.sample_interval, config.frame_samples);
  return apply_speckle(input, field);
}

PipelineResult run_pipeline(const PipelineConfig& config) {
  config.validate();
  const std::size_t frames = config.frame_count();

  std::vector<PhotonStream> parts(frames);
  std::vector<char> short_flags(frames, 0);
  parallel_for(frames, config.threads, [&](std::size_t f) {
    const IntensityTrace trace = simulate_frame(config, f);
    short_flags[f] = trace.short_trace ? 1 : 0;
    parts[f] = detect_photons(trace, config.detector, derive_seed(config.seed, "detect", f));
  });

  PipelineResult result;
  for (std::size_t f = 0; f < frames; ++f) {
    result.photons.append(parts[f]);
    parts[f] = PhotonStream{};
    result.short_frames = result.short_frames || short_flags[f] != 0;
  }
  result.photons.duration = config.acquisition_time();
  result.histogram = coincidence_histogram(result.photons, config.effective_bin_width(),
                                           config.window, config.threads);
  return result;
}

}  // namespace superbunch
