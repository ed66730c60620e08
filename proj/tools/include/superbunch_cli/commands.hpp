#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "superbunch/correlator.hpp"
#include "superbunch/fit.hpp"
#include "superbunch_cli/config.hpp"

namespace superbunch::cli {

/// Exit codes of the `superbunch` tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitData = 3,
  kExitNonConvergence = 4,
};

/// Flags shared by every subcommand; set values override the config file.
struct GlobalOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<int> threads;
  std::optional<std::string> format;  // text or binary
};

/// What one analysis produced, for manifests and sweep tables.
struct AnalysisSummary {
  std::uint64_t coincidences = 0;
  std::uint64_t singles1 = 0;
  std::uint64_t singles2 = 0;
  double acquisition_time = 0.0;
  PeakBackground peak;
  std::optional<FitResult> fit;
  /// Fitted g2(0) when a fit ran, else the zero-lag bin of the curve.
  double g2_zero = 0.0;
  double g2_zero_sigma = 0.0;
  bool converged = true;
};

/// Loads the config named in `options` (or an empty one) and applies the
/// seed, threads and format overrides.
RunConfig resolve_config(const GlobalOptions& options);

/// signal -> speckle -> detection -> correlator -> fit, writing g2.csv,
/// histogram.csv, theory.csv, fit.txt, run.ini, manifest.json and the
/// photon file into `dir`.
AnalysisSummary simulate(const RunConfig& config, const std::filesystem::path& dir);

/// Correlates a recorded photon file with the config's correlator and
/// analysis settings. The acquisition time comes from the config's
/// detection section, else `duration`, else the last timestamp.
AnalysisSummary analyze(const RunConfig& config, const std::filesystem::path& photons,
                        const std::filesystem::path& dir,
                        std::optional<double> duration = std::nullopt);

/// Runs every sweep point into dir/point_NNN and writes dir/sweep.csv.
/// Failed points are recorded in the table; the sweep carries on.
void sweep(const RunConfig& config, const std::filesystem::path& dir);

/// Writes a gnuplot script with the data inlined.
void plot(const std::filesystem::path& g2_csv,
          const std::optional<std::filesystem::path>& theory_csv,
          const std::filesystem::path& script);

/// Full command line handling; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace superbunch::cli
