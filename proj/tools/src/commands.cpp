#include "superbunch_cli/commands.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "superbunch/errors.hpp"
#include "superbunch/photon_io.hpp"
#include "superbunch/rng.hpp"

namespace superbunch::cli {
namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

constexpr const char* kVersion = "1.0.0";

std::ofstream open_output(const fs::path& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw DomainError(fmt::format("cannot write {}", path.string()));
  return out;
}

// Tree as written to run.ini and the manifest: worker count is excluded so
// artifacts do not depend on it.
pt::ptree artifact_tree(const RunConfig& config) {
  pt::ptree tree = config.tree;
  if (auto run = tree.get_child_optional("run")) run->erase("threads");
  return tree;
}

nlohmann::ordered_json tree_json(const pt::ptree& tree) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [section, node] : tree) {
    nlohmann::ordered_json s = nlohmann::ordered_json::object();
    for (const auto& [key, value] : node) s[key] = value.data();
    j[section] = s;
  }
  return j;
}

// Longest decay time of the fitted (or nominal) model, for the R_PB flag.
double correlation_time(const TheoryModel& model) {
  double t = 2.0 * std::numbers::pi / model.delta_omega;
  if (model.kind == TheoryKind::NoiseSpeckle) t = std::max(t, 1.0 / model.nu0);
  return t;
}

const char* headline_parameter(TheoryKind kind) {
  switch (kind) {
    case TheoryKind::SinusoidSpeckle:
      return "C";
    case TheoryKind::NoiseSpeckle:
      return "nu0";
    case TheoryKind::SpeckleOnly:
      break;
  }
  return "delta_omega";
}

AnalysisSummary analyze_histogram(const RunConfig& config, const CoincidenceHistogram& hist,
                                  const fs::path& dir) {
  AnalysisSummary summary;
  summary.coincidences = hist.total();
  summary.singles1 = hist.singles1;
  summary.singles2 = hist.singles2;
  summary.acquisition_time = hist.acquisition_time;

  const G2Curve curve = normalize_g2(hist, config.symmetrize);
  {
    auto out = open_output(dir / "histogram.csv");
    write_histogram_csv(out, hist);
  }
  {
    auto out = open_output(dir / "g2.csv");
    write_g2_csv(out, curve);
  }

  const std::size_t half = hist.geometry.half();
  summary.g2_zero = 0.5 * (curve.value[half - 1] + curve.value[half]);
  summary.g2_zero_sigma =
      0.5 * std::hypot(curve.stderr_[half - 1], curve.stderr_[half]);

  const auto theory = config.theory();
  std::optional<double> tau_c;
  if (theory) {
    std::vector<double> values(curve.size());
    for (std::size_t i = 0; i < curve.size(); ++i) values[i] = (*theory)(curve.lag[i]);
    auto out = open_output(dir / "theory.csv");
    write_theory_csv(out, curve.lag, values);

    FitSpec spec;
    spec.initial = *theory;
    spec.fixed = config.analysis.fixed;
    if (config.analysis.bin_average) spec.bin_width = hist.geometry.bin_width();
    FitResult fit = fit_g2(curve, spec);
    summary.converged = fit.converged;
    summary.g2_zero = fit.g2_zero();
    summary.g2_zero_sigma = fit.g2_zero_sigma();
    tau_c = correlation_time(fit.converged ? fit.model : *theory);

    auto report = open_output(dir / "fit.txt");
    fmt::print(report, "# seed {}\n", config.seed());
    write_fit_report(report, fit);
    summary.fit = std::move(fit);
  }
  summary.peak = r_pb(hist, tau_c);
  return summary;
}

nlohmann::ordered_json summary_json(const AnalysisSummary& s) {
  nlohmann::ordered_json j;
  j["singles_d1"] = s.singles1;
  j["singles_d2"] = s.singles2;
  j["coincidences"] = s.coincidences;
  j["acquisition_time_s"] = s.acquisition_time;
  j["g2_zero"] = s.g2_zero;
  j["g2_zero_sigma"] = s.g2_zero_sigma;
  j["r_pb"] = s.peak.ratio;
  j["r_pb_background_unreliable"] = s.peak.background_unreliable;
  if (s.fit) {
    j["fit_model"] = std::string(to_string(s.fit->model.kind));
    j["fit_converged"] = s.fit->converged;
    j["fit_iterations"] = s.fit->iterations;
    nlohmann::ordered_json params = nlohmann::ordered_json::object();
    for (const auto& p : s.fit->parameters) {
      params[p.name] = {{"value", p.value}, {"sigma", p.sigma}, {"free", p.free}};
    }
    j["fit_parameters"] = params;
  }
  return j;
}

void write_manifest(const fs::path& dir, const std::string& command, const RunConfig& config,
                    const nlohmann::ordered_json& inputs, const std::vector<std::string>& outputs,
                    const AnalysisSummary& summary) {
  nlohmann::ordered_json m;
  m["program"] = "superbunch";
  m["version"] = kVersion;
  m["command"] = command;
  m["seed"] = config.seed();
  m["inputs"] = inputs;
  m["config"] = tree_json(artifact_tree(config));
  m["outputs"] = outputs;
  m["results"] = summary_json(summary);
  auto out = open_output(dir / "manifest.json");
  out << m.dump(2) << '\n';
}

std::vector<std::string> analysis_outputs(const AnalysisSummary& summary) {
  std::vector<std::string> files = {"histogram.csv", "g2.csv"};
  if (summary.fit) {
    files.emplace_back("theory.csv");
    files.emplace_back("fit.txt");
  }
  return files;
}

std::string csv_field(std::string text) {
  for (char& c : text) {
    if (c == ',' || c == '\n' || c == '"') c = ' ';
  }
  return text;
}

// Rows of a CSV with a fixed header; every row must have as many fields.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

Table read_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DomainError(fmt::format("cannot open {}", path.string()));
  Table table;
  std::string line;
  std::uint64_t line_no = 0;
  auto split = [](const std::string& text) {
    std::vector<std::string> fields;
    std::stringstream ss(text);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    return fields;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (table.header.empty()) {
      table.header = split(line);
      continue;
    }
    const auto fields = split(line);
    if (fields.size() != table.header.size()) {
      throw ParseError(fmt::format("{}:{}: expected {} columns, found {}", path.string(),
                                   line_no, table.header.size(), fields.size()),
                       line_no);
    }
    std::vector<double> row;
    for (const auto& f : fields) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(f, &used));
        if (used != f.size()) throw std::invalid_argument(f);
      } catch (const std::exception&) {
        throw ParseError(fmt::format("{}:{}: '{}' is not a number", path.string(), line_no, f),
                         line_no);
      }
    }
    table.rows.push_back(std::move(row));
  }
  if (table.header.empty()) {
    throw DegenerateInputError(fmt::format("{} is empty", path.string()));
  }
  return table;
}

}  // namespace

RunConfig resolve_config(const GlobalOptions& options) {
  pt::ptree tree;
  if (options.config) tree = load_config(*options.config).tree;
  if (options.seed) set_config_value(tree, "run.seed", std::to_string(*options.seed));
  if (options.format) {
    if (*options.format != "text" && *options.format != "binary") {
      throw ConfigError(fmt::format("--format {} is not one of text, binary", *options.format));
    }
    set_config_value(tree, "output.timestamps", *options.format);
  }
  RunConfig config = parse_config(tree);
  if (options.threads) {
    if (*options.threads < 1) throw ConfigError("--threads must be at least 1");
    config.pipeline.threads = *options.threads;
  }
  return config;
}

AnalysisSummary simulate(const RunConfig& config, const fs::path& dir) {
  require_sections(config, {"modulation", "speckle", "detection", "correlator"});
  fs::create_directories(dir);

  const PipelineResult result = run_pipeline(config.pipeline);
  AnalysisSummary summary = analyze_histogram(config, result.histogram, dir);

  std::vector<std::string> outputs = analysis_outputs(summary);
  if (config.timestamps != "none") {
    const std::string name = config.timestamps == "binary" ? "photons.bin" : "photons.txt";
    write_photon_file(dir / name, result.photons);
    outputs.push_back(name);
  }
  {
    auto out = open_output(dir / "run.ini");
    out << to_ini(artifact_tree(config));
  }
  outputs.emplace_back("run.ini");
  outputs.emplace_back("manifest.json");

  nlohmann::ordered_json inputs = nlohmann::ordered_json::object();
  inputs["frames"] = config.pipeline.frame_count();
  inputs["short_frames"] = result.short_frames;
  inputs["accepted_photons"] = result.photons.accepted;
  write_manifest(dir, "simulate", config, inputs, outputs, summary);
  return summary;
}

AnalysisSummary analyze(const RunConfig& config, const fs::path& photons, const fs::path& dir,
                        std::optional<double> duration) {
  const auto records = read_photon_file(photons);
  if (records.empty()) {
    throw DegenerateInputError(fmt::format("{} contains no photon records", photons.string()));
  }
  double acquisition = 0.0;
  if (config.has_duration) {
    acquisition = config.pipeline.acquisition_time();
  } else if (duration) {
    if (!(*duration > 0.0)) throw ConfigError("--duration must be positive");
    acquisition = *duration;
  } else {
    acquisition = 1e-9 * static_cast<double>(records.back().timestamp_ns + 1);
  }
  const PhotonStream stream = PhotonStream::from_records(records, acquisition);
  const CoincidenceHistogram hist =
      coincidence_histogram(stream, config.pipeline.effective_bin_width(),
                            config.pipeline.window, config.pipeline.threads);

  fs::create_directories(dir);
  AnalysisSummary summary = analyze_histogram(config, hist, dir);
  std::vector<std::string> outputs = analysis_outputs(summary);
  outputs.emplace_back("manifest.json");
  nlohmann::ordered_json inputs = nlohmann::ordered_json::object();
  inputs["photon_file"] = photons.filename().string();
  inputs["records"] = records.size();
  write_manifest(dir, "analyze", config, inputs, outputs, summary);
  return summary;
}

void sweep(const RunConfig& config, const fs::path& dir) {
  if (!config.sweep) throw ConfigError("config: missing section [sweep]");
  const SweepSpec& spec = *config.sweep;
  fs::create_directories(dir);

  std::ostringstream table;
  fmt::print(table, "index,{},g2_zero,g2_zero_sigma,fit_parameter,fit_value,fit_sigma,r_pb,status\n",
             spec.parameter);
  for (std::size_t i = 0; i < spec.values.size(); ++i) {
    const std::string& value = spec.values[i];
    const fs::path point_dir = dir / fmt::format("point_{:03d}", i);
    std::string row;
    try {
      pt::ptree tree = config.tree;
      tree.erase("sweep");
      set_config_value(tree, spec.parameter, value);
      set_config_value(tree, "run.seed", std::to_string(derive_seed(config.seed(), "sweep", i)));
      RunConfig point = parse_config(tree);
      point.pipeline.threads = config.pipeline.threads;
      const AnalysisSummary s = simulate(point, point_dir);
      std::string name = "-";
      double fit_value = 0.0;
      double fit_sigma = 0.0;
      if (s.fit) {
        name = headline_parameter(s.fit->model.kind);
        const auto& p = s.fit->parameter(name);
        fit_value = p.value;
        fit_sigma = p.sigma;
      }
      row = fmt::format("{},{},{:.6f},{:.6f},{},{:.8e},{:.8e},{:.6f},{}", i, value, s.g2_zero,
                        s.g2_zero_sigma, name, fit_value, fit_sigma, s.peak.ratio,
                        s.converged ? "ok" : "not_converged");
    } catch (const std::exception& e) {
      row = fmt::format("{},{},nan,nan,-,nan,nan,nan,error: {}", i, value,
                        csv_field(e.what()));
    }
    table << row << '\n';
  }
  auto out = open_output(dir / "sweep.csv");
  out << table.str();
}

void plot(const fs::path& g2_csv, const std::optional<fs::path>& theory_csv,
          const fs::path& script) {
  const Table data = read_table(g2_csv);
  if (data.header.size() < 2 || data.header[0] != "tau_s" || data.header[1] != "g2") {
    throw DomainError(
        fmt::format("{}: expected columns tau_s,g2[,stderr]", g2_csv.string()));
  }
  const bool has_errors = data.header.size() >= 3 && data.header[2] == "stderr";
  std::optional<Table> theory;
  if (theory_csv) {
    theory = read_table(*theory_csv);
    if (theory->header.size() != 2 || theory->header[0] != "tau_s") {
      throw DomainError(
          fmt::format("{}: expected columns tau_s,g2_theory", theory_csv->string()));
    }
  }

  std::ostringstream s;
  s << "# gnuplot script; data inlined\n";
  s << "set datafile separator ','\n";
  auto block = [&](const char* name, const Table& t, std::size_t columns) {
    fmt::print(s, "${} << EOD\n", name);
    for (const auto& row : t.rows) {
      for (std::size_t c = 0; c < columns; ++c) {
        fmt::print(s, "{}{:.10e}", c ? "," : "", row[c]);
      }
      s << '\n';
    }
    s << "EOD\n";
  };
  block("g2", data, has_errors ? 3 : 2);
  if (theory) block("theory", *theory, 2);

  s << "set terminal png size 900,600\n";
  s << "set output 'g2.png'\n";
  s << "set xlabel 'tau (us)'\n";
  s << "set ylabel 'g2(tau)'\n";
  s << "set key top right\n";
  s << "plot $g2 using ($1*1e6):2" << (has_errors ? ":3 with yerrorbars" : " with points")
    << " pt 7 ps 0.5 title 'simulation'";
  if (theory) s << ", \\\n     $theory using ($1*1e6):2 with lines lw 2 title 'theory'";
  s << '\n';

  if (script.has_parent_path()) fs::create_directories(script.parent_path());
  auto out = open_output(script);
  out << s.str();
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Monte Carlo simulator of superbunching pseudothermal light", "superbunch"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  GlobalOptions options;
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string format;
  app.add_option("--config", config_path, "Config file (INI)");
  app.add_option("--seed", seed, "Master seed, overrides run.seed");
  app.add_option("--out", out_dir, "Output directory (or script path for plot)");
  app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--format", format, "Timestamp file format")
      ->check(CLI::IsMember({"text", "binary"}));

  auto* sim = app.add_subcommand("simulate", "Run the full simulation pipeline");
  auto* ana = app.add_subcommand("analyze", "Correlate a recorded photon file");
  std::string photon_file;
  double duration = 0.0;
  ana->add_option("photons", photon_file, "Photon file (.bin for binary)")->required();
  auto* duration_opt =
      ana->add_option("--duration", duration, "Acquisition time in seconds");
  auto* swp = app.add_subcommand("sweep", "Run a parameter sweep");
  auto* plt = app.add_subcommand("plot", "Emit a gnuplot script");
  std::string g2_file;
  std::string theory_file;
  plt->add_option("g2", g2_file, "g2 CSV")->required();
  plt->add_option("theory", theory_file, "Theory CSV");
  for (auto* sub : {sim, ana, swp, plt}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (!config_path.empty()) options.config = config_path;
  if (app.count("--seed")) options.seed = seed;
  if (app.count("--threads")) options.threads = threads;
  if (!format.empty()) options.format = format;

  try {
    if (*plt) {
      const fs::path script = out_dir.empty() ? fs::path("plot.gp") : fs::path(out_dir);
      plot(g2_file, theory_file.empty() ? std::nullopt : std::optional<fs::path>(theory_file),
           script.extension() == ".gp" ? script : script / "plot.gp");
      return kExitOk;
    }
    const RunConfig config = resolve_config(options);
    const fs::path dir = out_dir.empty() ? fs::path(config.output_directory) : fs::path(out_dir);
    if (*sim) {
      const auto summary = simulate(config, dir);
      fmt::print(out, "g2(0) = {:.4f} +/- {:.4f}, R_PB = {:.4f}, coincidences = {}\n",
                 summary.g2_zero, summary.g2_zero_sigma, summary.peak.ratio,
                 summary.coincidences);
      if (!summary.converged) throw ConvergenceError("fit did not converge; see fit.txt");
    } else if (*ana) {
      const auto summary =
          analyze(config, photon_file, dir,
                  duration_opt->count() ? std::optional<double>(duration) : std::nullopt);
      fmt::print(out, "g2(0) = {:.4f} +/- {:.4f}, R_PB = {:.4f}, coincidences = {}\n",
                 summary.g2_zero, summary.g2_zero_sigma, summary.peak.ratio,
                 summary.coincidences);
      if (!summary.converged) throw ConvergenceError("fit did not converge; see fit.txt");
    } else if (*swp) {
      sweep(config, dir);
      fmt::print(out, "wrote {}\n", (dir / "sweep.csv").string());
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitConfig;
  } catch (const ParseError& e) {
    fmt::print(err, "error: {} (at {})\n", e.what(), e.position());
    return kExitData;
  } catch (const DomainError& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitData;
  } catch (const ConvergenceError& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitNonConvergence;
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitData;
  }
}

}  // namespace superbunch::cli
