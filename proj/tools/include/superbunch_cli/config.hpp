#pragma once

#include <boost/property_tree/ptree.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "superbunch/analytic.hpp"
#include "superbunch/pipeline.hpp"

namespace superbunch::cli {

struct AnalysisConfig {
  std::string model = "auto";  // auto, none, speckle, sinusoid, noise
  std::optional<double> depth;
  std::optional<double> frequency_hz;
  std::optional<double> bandwidth_hz;
  std::optional<double> cutoff_hz;
  std::vector<std::string> fixed;
  bool bin_average = true;
};

struct SweepSpec {
  std::string parameter;  // section.key
  std::vector<std::string> values;
};

/// Parsed configuration file. `tree` keeps the validated key/value text so
/// the run can be written back out verbatim (with overrides applied).
struct RunConfig {
  boost::property_tree::ptree tree;
  bool has_modulation = false;
  bool has_speckle = false;
  bool has_detection = false;
  bool has_duration = false;
  bool has_correlator = false;
  PipelineConfig pipeline;
  bool symmetrize = false;
  AnalysisConfig analysis;
  std::string output_directory = "out";
  std::string timestamps = "text";  // text, binary, none
  std::optional<SweepSpec> sweep;

  std::uint64_t seed() const { return pipeline.seed; }
  /// Theory family and starting point implied by the analysis and
  /// modulation sections; nullopt when nothing should be fitted.
  std::optional<TheoryModel> theory() const;
};

/// Validates every section and key; unknown names and malformed values
/// throw ConfigError naming the offending field.
RunConfig parse_config(const boost::property_tree::ptree& tree);
RunConfig load_config(const std::filesystem::path& path);

/// Sets `section.key` after checking it against the schema.
void set_config_value(boost::property_tree::ptree& tree, const std::string& path,
                      const std::string& value);

/// Throws ConfigError naming the first missing section.
void require_sections(const RunConfig& config, const std::vector<std::string>& sections);

/// INI text of a tree, sections and keys in insertion order.
std::string to_ini(const boost::property_tree::ptree& tree);

/// Peak-to-peak over mean-sum of the EOM intensity swing, (max - min) / (max + min).
double eom_effective_depth(const EomDrivenModulation& m);

}  // namespace superbunch::cli
