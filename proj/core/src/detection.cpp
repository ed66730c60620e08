#include "superbunch/detection.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "superbunch/errors.hpp"
#include "superbunch/parallel.hpp"
#include "superbunch/rng.hpp"

namespace superbunch {
namespace {

constexpr std::size_t kBlockSamples = 1024;

struct BlockEvents {
  std::vector<std::uint64_t> d1;
  std::vector<std::uint64_t> d2;
  std::uint64_t accepted = 0;
  std::uint64_t dark = 0;
};

}  // namespace

std::vector<PhotonRecord> PhotonStream::records() const {
  std::vector<PhotonRecord> out;
  out.reserve(total());
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < d1.size() || j < d2.size()) {
    if (j == d2.size() || (i < d1.size() && d1[i] <= d2[j])) {
      out.push_back({d1[i++], Channel::D1});
    } else {
      out.push_back({d2[j++], Channel::D2});
    }
  }
  return out;
}

PhotonStream PhotonStream::from_records(std::span<const PhotonRecord> records, double duration) {
  PhotonStream stream;
  stream.duration = duration;
  std::uint64_t previous = 0;
  for (std::size_t k = 0; k < records.size(); ++k) {
    const auto& r = records[k];
    if (k > 0 && r.timestamp_ns < previous) {
      throw DomainError(fmt::format("photon stream not sorted at record {}", k));
    }
    previous = r.timestamp_ns;
    (r.channel == Channel::D1 ? stream.d1 : stream.d2).push_back(r.timestamp_ns);
  }
  stream.accepted = stream.total();
  return stream;
}

void PhotonStream::append(const PhotonStream& later) {
  auto starts_after = [](const std::vector<std::uint64_t>& a,
                         const std::vector<std::uint64_t>& b) {
    return a.empty() || b.empty() || b.front() >= a.back();
  };
  if (!starts_after(d1, later.d1) || !starts_after(d2, later.d2)) {
    throw DomainError("PhotonStream::append: streams overlap in time");
  }
  d1.insert(d1.end(), later.d1.begin(), later.d1.end());
  d2.insert(d2.end(), later.d2.begin(), later.d2.end());
  duration += later.duration;
  accepted += later.accepted;
  dark += later.dark;
}

void DetectorConfig::validate() const {
  if (!(rate > 0.0) || !std::isfinite(rate)) throw ConfigError("detection: rate must be positive");
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) {
    throw ConfigError("detection: split_ratio must lie in (0, 1)");
  }
  if (!(dark_rate >= 0.0)) throw ConfigError("detection: dark_rate must be nonnegative");
  const double ns = resolution * 1e9;
  if (!(ns >= 1.0 - 1e-9) || std::abs(ns - std::round(ns)) > 1e-6) {
    throw ConfigError("detection: resolution must be a whole number of nanoseconds");
  }
}

std::uint64_t DetectorConfig::resolution_ns() const {
  return static_cast<std::uint64_t>(std::llround(resolution * 1e9));
}

PhotonStream detect_photons(const IntensityTrace& intensity, const DetectorConfig& cfg,
                            std::uint64_t seed, int threads) {
  cfg.validate();
  const auto& samples = intensity.samples;
  if (samples.empty()) throw DomainError("detect_photons: empty trace");
  if (!(intensity.dt > 0.0)) throw DomainError("detect_photons: dt must be positive");
  if (!(intensity.t0 >= 0.0)) throw DomainError("detect_photons: negative start time");
  if (!(intensity.declared_mean > 0.0)) {
    throw DomainError("detect_photons: declared mean must be positive");
  }
  const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
  if (!(*lo >= 0.0)) throw DomainError("detect_photons: negative intensity sample");

  const double inv_ref = 1.0 / intensity.declared_mean;
  const double peak_rate = cfg.rate * (*hi) * inv_ref + cfg.dark_rate;
  if (peak_rate * cfg.resolution > 0.1) {
    throw ResolutionError(fmt::format(
        "detect_photons: peak rate {:g}/s with {:g} s resolution risks pile-up", peak_rate,
        cfg.resolution));
  }

  const std::size_t n = samples.size();
  const std::size_t blocks = (n + kBlockSamples - 1) / kBlockSamples;
  const double dt = intensity.dt;
  const double t0 = intensity.t0;
  const std::uint64_t res_ns = cfg.resolution_ns();
  const double pre_split_density = 2.0 * cfg.rate;  // events per s per unit of I/declared_mean

  auto to_ns = [&](double t) {
    return static_cast<std::uint64_t>(std::floor(t / cfg.resolution)) * res_ns;
  };
  auto level_at = [&](double t) {
    const double pos = (t - t0) / dt;
    auto i = static_cast<std::size_t>(pos);
    if (i >= n - 1) return samples[n - 1] * inv_ref;
    const double frac = pos - static_cast<double>(i);
    return (samples[i] + frac * (samples[i + 1] - samples[i])) * inv_ref;
  };

  std::vector<BlockEvents> results(blocks);
  parallel_for(blocks, threads, [&](std::size_t b) {
    BlockEvents& ev = results[b];
    const std::size_t first = b * kBlockSamples;
    const std::size_t last = std::min(first + kBlockSamples, n);
    const double block_start = t0 + dt * static_cast<double>(first);
    const double block_len = dt * static_cast<double>(last - first);

    const std::size_t envelope_end = std::min(last + 1, n);
    const double level_max =
        *std::max_element(samples.begin() + first, samples.begin() + envelope_end) * inv_ref;
    const auto strips = static_cast<std::uint64_t>(std::ceil(level_max));

    const std::uint64_t block_seed = derive_seed(seed, "detect.block", b);
    const double strip_mean = pre_split_density * block_len;
    for (std::uint64_t k = 0; k < strips; ++k) {
      // Fresh distribution per strip: no cached state leaks between strips.
      Rng rng(derive_seed(block_seed, "detect.strip", k));
      const std::uint64_t points = std::poisson_distribution<std::uint64_t>(strip_mean)(rng);
      for (std::uint64_t p = 0; p < points; ++p) {
        const double t = block_start + block_len * rng.uniform();
        const double height = static_cast<double>(k) + rng.uniform();
        const bool to_d1 = rng.uniform() < cfg.split_ratio;
        if (height < level_at(t)) {
          ++ev.accepted;
          (to_d1 ? ev.d1 : ev.d2).push_back(to_ns(t));
        }
      }
    }

    if (cfg.dark_rate > 0.0) {
      Rng rng(derive_seed(block_seed, "detect.dark"));
      for (auto* channel : {&ev.d1, &ev.d2}) {
        const std::uint64_t count =
            std::poisson_distribution<std::uint64_t>(cfg.dark_rate * block_len)(rng);
        for (std::uint64_t p = 0; p < count; ++p) {
          channel->push_back(to_ns(block_start + block_len * rng.uniform()));
        }
        ev.dark += count;
      }
    }
    std::sort(ev.d1.begin(), ev.d1.end());
    std::sort(ev.d2.begin(), ev.d2.end());
  });

  PhotonStream stream;
  stream.duration = intensity.duration();
  std::size_t total1 = 0;
  std::size_t total2 = 0;
  for (const auto& ev : results) {
    total1 += ev.d1.size();
    total2 += ev.d2.size();
  }
  stream.d1.reserve(total1);
  stream.d2.reserve(total2);
  for (const auto& ev : results) {
    stream.d1.insert(stream.d1.end(), ev.d1.begin(), ev.d1.end());
    stream.d2.insert(stream.d2.end(), ev.d2.begin(), ev.d2.end());
    stream.accepted += ev.accepted;
    stream.dark += ev.dark;
  }
  return stream;
}

}  // namespace superbunch
