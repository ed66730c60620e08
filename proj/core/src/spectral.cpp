#include "superbunch/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <utility>

#include "superbunch/errors.hpp"
#include "superbunch/rng.hpp"

namespace superbunch::spectral {
namespace {

// fftw_malloc alignment keeps FFTW's codelet choice, and therefore the
// rounding of every output sample, the same from call to call.
struct FftwFree {
  void operator()(void* p) const noexcept { fftw_free(p); }
};
template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <typename T>
FftwBuffer<T> fftw_alloc(std::size_t count) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * count));
  if (p == nullptr) throw std::bad_alloc();
  return FftwBuffer<T>(p);
}

// Planning is not thread-safe in FFTW; execution on fresh aligned buffers is.
std::mutex plan_mutex;

enum class PlanKind { ComplexBackward, RealForward, RealBackward };

fftw_plan cached_plan(PlanKind kind, std::size_t n) {
  static std::map<std::pair<PlanKind, std::size_t>, fftw_plan> plans;
  std::lock_guard lock(plan_mutex);
  auto key = std::make_pair(kind, n);
  if (auto it = plans.find(key); it != plans.end()) return it->second;

  const int size = static_cast<int>(n);
  fftw_plan plan = nullptr;
  switch (kind) {
    case PlanKind::ComplexBackward: {
      auto buf = fftw_alloc<fftw_complex>(n);
      plan = fftw_plan_dft_1d(size, buf.get(), buf.get(), FFTW_BACKWARD, FFTW_ESTIMATE);
      break;
    }
    case PlanKind::RealForward: {
      auto in = fftw_alloc<double>(n);
      auto out = fftw_alloc<fftw_complex>(n / 2 + 1);
      plan = fftw_plan_dft_r2c_1d(size, in.get(), out.get(), FFTW_ESTIMATE);
      break;
    }
    case PlanKind::RealBackward: {
      auto in = fftw_alloc<fftw_complex>(n / 2 + 1);
      auto out = fftw_alloc<double>(n);
      plan = fftw_plan_dft_c2r_1d(size, in.get(), out.get(), FFTW_ESTIMATE);
      break;
    }
  }
  if (plan == nullptr) throw Error("FFTW planning failed");
  plans.emplace(key, plan);
  return plan;
}

std::size_t padded_size(std::size_t minimum) {
  std::size_t m = 1;
  while (m < minimum) m <<= 1;
  return m;
}

}  // namespace

BinRange band_bins(std::size_t n, double dt, Band band) {
  const double df = 1.0 / (static_cast<double>(n) * dt);
  return {std::llround(band.low_hz / df), std::llround(band.high_hz / df)};
}

std::vector<std::complex<double>> synthesize_band_field(std::size_t n, double dt,
                                                        Band band, double mean_power,
                                                        std::uint64_t seed) {
  if (n == 0) throw DomainError("synthesize_band_field: empty grid");
  if (!(dt > 0.0)) throw ConfigError("synthesize_band_field: dt must be positive");
  if (!(band.high_hz > band.low_hz)) throw ConfigError("synthesize_band_field: empty band");

  const BinRange bins = band_bins(n, dt, band);
  const long long half = static_cast<long long>(n / 2);
  if (bins.count() == 0) {
    throw ConfigError("synthesize_band_field: band narrower than the frequency step; "
                      "lengthen the trace");
  }
  if (bins.first <= -half || bins.last > half) {
    throw ConfigError("synthesize_band_field: band reaches the Nyquist frequency");
  }

  auto buf = fftw_alloc<fftw_complex>(n);
  for (std::size_t i = 0; i < n; ++i) buf[i][0] = buf[i][1] = 0.0;

  // Per-quadrature variance so that sum_k E|c_k|^2 = mean_power.
  const double sigma = std::sqrt(mean_power / (2.0 * static_cast<double>(bins.count())));
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  const auto size = static_cast<long long>(n);
  for (long long k = bins.first; k < bins.last; ++k) {
    const auto idx = static_cast<std::size_t>(((k % size) + size) % size);
    buf[idx][0] = normal(rng);
    buf[idx][1] = normal(rng);
  }

  fftw_execute_dft(cached_plan(PlanKind::ComplexBackward, n), buf.get(), buf.get());

  std::vector<std::complex<double>> field(n);
  for (std::size_t i = 0; i < n; ++i) field[i] = {buf[i][0], buf[i][1]};
  return field;
}

std::vector<double> lag_products(std::span<const double> x, std::size_t max_lag) {
  const std::size_t n = x.size();
  if (n == 0) throw DomainError("lag_products: empty input");
  if (max_lag >= n) throw DomainError("lag_products: lag exceeds input length");

  const std::size_t m = padded_size(n + max_lag + 1);
  auto in = fftw_alloc<double>(m);
  auto spec = fftw_alloc<fftw_complex>(m / 2 + 1);
  for (std::size_t i = 0; i < n; ++i) in[i] = x[i];
  for (std::size_t i = n; i < m; ++i) in[i] = 0.0;

  fftw_execute_dft_r2c(cached_plan(PlanKind::RealForward, m), in.get(), spec.get());
  for (std::size_t k = 0; k <= m / 2; ++k) {
    spec[k][0] = spec[k][0] * spec[k][0] + spec[k][1] * spec[k][1];
    spec[k][1] = 0.0;
  }
  fftw_execute_dft_c2r(cached_plan(PlanKind::RealBackward, m), spec.get(), in.get());

  std::vector<double> out(max_lag + 1);
  for (std::size_t k = 0; k <= max_lag; ++k) {
    out[k] = in[k] / static_cast<double>(m) / static_cast<double>(n - k);
  }
  return out;
}

}  // namespace superbunch::spectral
