#include "superbunch_cli/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "superbunch/errors.hpp"

namespace superbunch::cli {
namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"run", {"seed", "threads"}},
      {"modulation",
       {"model", "base_intensity", "depth", "frequency_hz", "phase", "mean_intensity",
        "cutoff_hz", "clip_level", "quantization_bits", "realistic", "drive", "v_pp",
        "drive_frequency_hz", "drive_bits"}},
      {"speckle", {"bandwidth_hz", "gain"}},
      {"detection",
       {"rate", "duration", "resolution_ns", "dark_rate", "sample_interval", "frame_samples"}},
      {"correlator", {"window", "bin_width", "symmetrize"}},
      {"analysis",
       {"model", "depth", "frequency_hz", "bandwidth_hz", "cutoff_hz", "fixed", "bin_average"}},
      {"output", {"directory", "timestamps"}},
      {"sweep", {"parameter", "values"}},
  };
  return keys;
}

// Keys each modulation model accepts besides `model`.
const std::map<std::string, std::set<std::string>>& modulation_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"constant", {"base_intensity"}},
      {"sinusoid", {"base_intensity", "depth", "frequency_hz", "phase"}},
      {"band_noise",
       {"mean_intensity", "cutoff_hz", "clip_level", "quantization_bits", "realistic"}},
      {"eom", {"drive", "v_pp", "drive_frequency_hz", "phase", "drive_bits"}},
  };
  return keys;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

[[noreturn]] void bad_value(const std::string& path, const std::string& text,
                            std::string_view expected) {
  throw ConfigError(fmt::format("config: {} = '{}' is not {}", path, text, expected));
}

double to_double(const std::string& path, const std::string& raw) {
  const std::string text = trim(raw);
  double value = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
    bad_value(path, text, "a finite number");
  }
  return value;
}

std::int64_t to_integer(const std::string& path, const std::string& raw) {
  const std::string text = trim(raw);
  std::int64_t value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) bad_value(path, text, "an integer");
  return value;
}

std::uint64_t to_unsigned(const std::string& path, const std::string& raw) {
  const std::string text = trim(raw);
  std::uint64_t value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) bad_value(path, text, "an unsigned integer");
  return value;
}

bool to_bool(const std::string& path, const std::string& raw) {
  std::string text = trim(raw);
  std::transform(text.begin(), text.end(), text.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (text == "true" || text == "yes" || text == "on" || text == "1") return true;
  if (text == "false" || text == "no" || text == "off" || text == "0") return false;
  bad_value(path, text, "a boolean");
}

// Typed access to one section with the dotted path kept for messages.
class Section {
 public:
  Section(const pt::ptree& tree, std::string name) : name_(std::move(name)) {
    if (auto child = tree.get_child_optional(name_)) node_ = &*child;
  }

  bool present() const { return node_ != nullptr; }
  bool has(const std::string& key) const { return node_ && node_->count(key) > 0; }
  std::string path(const std::string& key) const { return name_ + "." + key; }

  std::optional<std::string> text(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return trim(node_->get<std::string>(key));
  }
  std::string text_or(const std::string& key, std::string fallback) const {
    return text(key).value_or(std::move(fallback));
  }
  std::optional<double> number(const std::string& key) const {
    if (auto t = text(key)) return to_double(path(key), *t);
    return std::nullopt;
  }
  double number_or(const std::string& key, double fallback) const {
    return number(key).value_or(fallback);
  }
  double required(const std::string& key) const {
    if (auto v = number(key)) return *v;
    throw ConfigError(fmt::format("config: missing {}", path(key)));
  }
  std::optional<std::int64_t> integer(const std::string& key) const {
    if (auto t = text(key)) return to_integer(path(key), *t);
    return std::nullopt;
  }
  bool flag_or(const std::string& key, bool fallback) const {
    if (auto t = text(key)) return to_bool(path(key), *t);
    return fallback;
  }
  /// Number, or nullopt for the literal "none".
  std::optional<double> number_or_none(const std::string& key, std::optional<double> fallback) const {
    auto t = text(key);
    if (!t) return fallback;
    if (*t == "none") return std::nullopt;
    return to_double(path(key), *t);
  }
  void require_positive(const std::string& key, double value) const {
    if (!(value > 0.0)) {
      throw ConfigError(fmt::format("config: {} must be positive (got {:g})", path(key), value));
    }
  }

 private:
  std::string name_;
  const pt::ptree* node_ = nullptr;
};

void check_schema(const pt::ptree& tree) {
  for (const auto& [section, node] : tree) {
    auto it = schema().find(section);
    if (it == schema().end()) {
      if (node.empty()) {
        throw ConfigError(fmt::format("config: key '{}' outside any section", section));
      }
      throw ConfigError(fmt::format("config: unknown section [{}]", section));
    }
    for (const auto& [key, value] : node) {
      if (!it->second.contains(key)) {
        throw ConfigError(fmt::format("config: unknown key {}.{}", section, key));
      }
    }
  }
}

ModulationModel parse_modulation(const Section& s) {
  const std::string model = s.text_or("model", "");
  auto allowed = modulation_keys().find(model);
  if (allowed == modulation_keys().end()) {
    throw ConfigError(fmt::format(
        "config: modulation.model = '{}' is not one of constant, sinusoid, band_noise, eom",
        model));
  }
  for (const auto& key : schema().at("modulation")) {
    if (key != "model" && s.has(key) && !allowed->second.contains(key)) {
      throw ConfigError(
          fmt::format("config: {} does not apply to model {}", s.path(key), model));
    }
  }

  auto bits_of = [&](const std::string& key,
                     std::optional<int> fallback) -> std::optional<int> {
    auto t = s.text(key);
    if (!t) return fallback;
    if (*t == "none") return std::nullopt;
    const auto bits = to_integer(s.path(key), *t);
    if (bits < 1 || bits > 32) {
      throw ConfigError(fmt::format("config: {} must lie in [1, 32]", s.path(key)));
    }
    return static_cast<int>(bits);
  };

  if (model == "constant") {
    ConstantModulation m;
    m.base_intensity = s.number_or("base_intensity", 1.0);
    s.require_positive("base_intensity", m.base_intensity);
    return m;
  }
  if (model == "sinusoid") {
    SinusoidModulation m;
    m.base_intensity = s.number_or("base_intensity", 1.0);
    m.depth = s.required("depth");
    const double f = s.required("frequency_hz");
    s.require_positive("base_intensity", m.base_intensity);
    s.require_positive("frequency_hz", f);
    if (!(m.depth >= 0.0 && m.depth <= 1.0)) {
      throw ConfigError("config: modulation.depth must lie in [0, 1]");
    }
    m.angular_frequency = 2.0 * std::numbers::pi * f;
    m.phase = s.number_or("phase", 0.0);
    return m;
  }
  if (model == "band_noise") {
    BandNoiseModulation m;
    m.mean_intensity = s.number_or("mean_intensity", 1.0);
    m.cutoff_hz = s.required("cutoff_hz");
    s.require_positive("mean_intensity", m.mean_intensity);
    s.require_positive("cutoff_hz", m.cutoff_hz);
    const bool realistic = s.flag_or("realistic", false);
    const auto base = realistic ? BandNoiseModulation::realistic(m.mean_intensity, m.cutoff_hz)
                                : BandNoiseModulation{m.mean_intensity, m.cutoff_hz, {}, {}};
    m.clip_level = s.number_or_none("clip_level", base.clip_level);
    if (m.clip_level) s.require_positive("clip_level", *m.clip_level);
    m.quantization_bits = bits_of("quantization_bits", base.quantization_bits);
    return m;
  }
  EomDrivenModulation m;
  const std::string drive = s.text_or("drive", "sinusoid");
  if (drive == "sinusoid") {
    m.shape = DriveShape::Sinusoid;
  } else if (drive == "band_noise") {
    m.shape = DriveShape::BandNoise;
  } else {
    throw ConfigError(fmt::format(
        "config: modulation.drive = '{}' is not one of sinusoid, band_noise", drive));
  }
  m.v_pp = s.required("v_pp");
  if (!(m.v_pp >= 0.0)) throw ConfigError("config: modulation.v_pp must be nonnegative");
  m.frequency_hz = s.required("drive_frequency_hz");
  s.require_positive("drive_frequency_hz", m.frequency_hz);
  m.phase = s.number_or("phase", 0.0);
  m.drive_bits = bits_of("drive_bits", std::nullopt);
  return m;
}

void write_ini_value(std::ostream& out, const std::string& key, const std::string& value) {
  out << key << " = " << value << '\n';
}

}  // namespace

RunConfig parse_config(const pt::ptree& tree) {
  check_schema(tree);
  RunConfig cfg;
  cfg.tree = tree;
  auto& p = cfg.pipeline;

  const Section run(tree, "run");
  if (auto seed = run.text("seed")) p.seed = to_unsigned(run.path("seed"), *seed);
  if (auto threads = run.integer("threads")) {
    if (*threads < 1 || *threads > 1024) {
      throw ConfigError("config: run.threads must lie in [1, 1024]");
    }
    p.threads = static_cast<int>(*threads);
  }

  const Section mod(tree, "modulation");
  cfg.has_modulation = mod.present();
  if (cfg.has_modulation) {
    p.modulation = parse_modulation(mod);
    try {
      validate(p.modulation);
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("config: [modulation] {}", e.what()));
    }
  }

  const Section speckle(tree, "speckle");
  cfg.has_speckle = speckle.present();
  if (cfg.has_speckle) {
    const double hz = speckle.required("bandwidth_hz");
    speckle.require_positive("bandwidth_hz", hz);
    p.speckle_bandwidth = 2.0 * std::numbers::pi * hz;
    p.speckle_gain = speckle.number_or("gain", 1.0);
    speckle.require_positive("gain", p.speckle_gain);
  }

  const Section det(tree, "detection");
  cfg.has_detection = det.present();
  cfg.has_duration = det.has("duration");
  p.detector.rate = det.number_or("rate", p.detector.rate);
  det.require_positive("rate", p.detector.rate);
  p.duration = det.number_or("duration", p.duration);
  det.require_positive("duration", p.duration);
  const double res_ns = det.number_or("resolution_ns", 1.0);
  if (!(res_ns >= 1.0) || res_ns != std::floor(res_ns)) {
    throw ConfigError("config: detection.resolution_ns must be a whole number >= 1");
  }
  p.detector.resolution = res_ns * 1e-9;
  p.detector.dark_rate = det.number_or("dark_rate", 0.0);
  if (!(p.detector.dark_rate >= 0.0)) {
    throw ConfigError("config: detection.dark_rate must be nonnegative");
  }
  p.sample_interval = det.number_or("sample_interval", p.sample_interval);
  det.require_positive("sample_interval", p.sample_interval);
  if (auto frames = det.integer("frame_samples")) {
    if (*frames < 16) throw ConfigError("config: detection.frame_samples must be at least 16");
    p.frame_samples = static_cast<std::size_t>(*frames);
  }

  const Section corr(tree, "correlator");
  cfg.has_correlator = corr.present();
  p.window = corr.number_or("window", p.window);
  corr.require_positive("window", p.window);
  p.bin_width = corr.number_or("bin_width", 0.0);
  if (corr.has("bin_width")) corr.require_positive("bin_width", p.bin_width);
  cfg.symmetrize = corr.flag_or("symmetrize", false);

  const Section ana(tree, "analysis");
  auto& a = cfg.analysis;
  a.model = ana.text_or("model", "auto");
  static const std::set<std::string> models = {"auto", "none", "speckle", "sinusoid", "noise"};
  if (!models.contains(a.model)) {
    throw ConfigError(fmt::format(
        "config: analysis.model = '{}' is not one of auto, none, speckle, sinusoid, noise",
        a.model));
  }
  a.depth = ana.number("depth");
  a.frequency_hz = ana.number("frequency_hz");
  a.bandwidth_hz = ana.number("bandwidth_hz");
  a.cutoff_hz = ana.number("cutoff_hz");
  if (auto fixed = ana.text("fixed")) a.fixed = split_list(*fixed);
  a.bin_average = ana.flag_or("bin_average", true);

  const Section out(tree, "output");
  cfg.output_directory = out.text_or("directory", cfg.output_directory);
  cfg.timestamps = out.text_or("timestamps", cfg.timestamps);
  if (cfg.timestamps != "text" && cfg.timestamps != "binary" && cfg.timestamps != "none") {
    throw ConfigError(fmt::format(
        "config: output.timestamps = '{}' is not one of text, binary, none", cfg.timestamps));
  }

  const Section sweep(tree, "sweep");
  if (sweep.present()) {
    SweepSpec spec;
    spec.parameter = sweep.text_or("parameter", "");
    spec.values = split_list(sweep.text_or("values", ""));
    const auto dot = spec.parameter.find('.');
    const auto section = spec.parameter.substr(0, dot);
    const auto key = dot == std::string::npos ? "" : spec.parameter.substr(dot + 1);
    auto it = schema().find(section);
    if (dot == std::string::npos || it == schema().end() || !it->second.contains(key) ||
        section == "sweep") {
      throw ConfigError(fmt::format(
          "config: sweep.parameter = '{}' does not name a section.key", spec.parameter));
    }
    if (spec.values.empty()) throw ConfigError("config: sweep.values is empty");
    cfg.sweep = spec;
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("config: cannot open {}", path.string()));
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(fmt::format("config: {}:{}: {}", path.string(), e.line(), e.message()));
  }
  return parse_config(tree);
}

void set_config_value(pt::ptree& tree, const std::string& path, const std::string& value) {
  const auto dot = path.find('.');
  const auto section = path.substr(0, dot);
  auto it = schema().find(section);
  if (dot == std::string::npos || it == schema().end() ||
      !it->second.contains(path.substr(dot + 1))) {
    throw ConfigError(fmt::format("config: '{}' does not name a section.key", path));
  }
  tree.put(pt::ptree::path_type(path, '.'), value);
}

void require_sections(const RunConfig& config, const std::vector<std::string>& sections) {
  for (const auto& name : sections) {
    if (!config.tree.get_child_optional(name)) {
      throw ConfigError(fmt::format("config: missing section [{}]", name));
    }
  }
}

std::string to_ini(const pt::ptree& tree) {
  std::ostringstream out;
  bool first = true;
  for (const auto& [section, node] : tree) {
    if (!first) out << '\n';
    first = false;
    out << '[' << section << "]\n";
    for (const auto& [key, value] : node) write_ini_value(out, key, value.data());
  }
  return out.str();
}

double eom_effective_depth(const EomDrivenModulation& m) {
  // Extremes of the transfer over the drive swing [-V_pp/2, V_pp/2].
  constexpr int kPoints = 4097;
  double lo = m.transfer.maximum();
  double hi = m.transfer.minimum();
  for (int i = 0; i < kPoints; ++i) {
    const double v = m.v_pp * (static_cast<double>(i) / (kPoints - 1) - 0.5);
    const double level = m.transfer(v);
    lo = std::min(lo, level);
    hi = std::max(hi, level);
  }
  return (hi - lo) / (hi + lo);
}

std::optional<TheoryModel> RunConfig::theory() const {
  const auto& a = analysis;
  if (a.model == "none") return std::nullopt;

  std::string kind = a.model;
  double depth = a.depth.value_or(0.5);
  double omega0 = 2.0 * std::numbers::pi * a.frequency_hz.value_or(0.0);
  double nu0 = a.cutoff_hz.value_or(0.0);
  if (has_modulation) {
    if (const auto* s = std::get_if<SinusoidModulation>(&pipeline.modulation)) {
      if (kind == "auto") kind = "sinusoid";
      if (!a.depth) depth = s->depth;
      if (!a.frequency_hz) omega0 = s->angular_frequency;
    } else if (const auto* n = std::get_if<BandNoiseModulation>(&pipeline.modulation)) {
      if (kind == "auto") kind = "noise";
      if (!a.cutoff_hz) nu0 = n->cutoff_hz;
    } else if (const auto* e = std::get_if<EomDrivenModulation>(&pipeline.modulation)) {
      if (e->shape == DriveShape::Sinusoid) {
        if (kind == "auto") kind = "sinusoid";
        if (!a.depth) depth = eom_effective_depth(*e);
        if (!a.frequency_hz) omega0 = 2.0 * std::numbers::pi * e->frequency_hz;
      } else {
        if (kind == "auto") kind = "noise";
        if (!a.cutoff_hz) nu0 = e->frequency_hz;
      }
    } else if (kind == "auto") {
      kind = "speckle";
    }
  }
  if (kind == "auto") {
    if (!has_speckle && !a.bandwidth_hz) return std::nullopt;
    kind = "speckle";
  }

  if (!has_speckle && !a.bandwidth_hz) {
    throw ConfigError("config: fitting needs speckle.bandwidth_hz or analysis.bandwidth_hz");
  }
  const double delta_omega = a.bandwidth_hz ? 2.0 * std::numbers::pi * *a.bandwidth_hz
                                            : pipeline.speckle_bandwidth;
  depth = std::clamp(depth, 0.0, 1.0);
  TheoryModel model;
  if (kind == "speckle") {
    model = TheoryModel::speckle_only(delta_omega);
  } else if (kind == "sinusoid") {
    if (!(omega0 > 0.0)) {
      throw ConfigError("config: sinusoid fit needs analysis.frequency_hz");
    }
    model = TheoryModel::sinusoid_speckle(depth, omega0, delta_omega);
  } else {
    if (!(nu0 > 0.0)) throw ConfigError("config: noise fit needs analysis.cutoff_hz");
    model = TheoryModel::noise_speckle(nu0, delta_omega);
  }
  try {
    model.validate();
  } catch (const DomainError& e) {
    throw ConfigError(fmt::format("config: [analysis] {}", e.what()));
  }
  return model;
}

}  // namespace superbunch::cli
