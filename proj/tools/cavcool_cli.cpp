#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "cavcool/analysis.hpp"
#include "cavcool/ensemble.hpp"
#include "cavcool/io.hpp"
#include "cavcool/oracle.hpp"

namespace fs = std::filesystem;
using namespace cavcool;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUser = 1;
constexpr int kExitNumerical = 2;

class UserError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string command_line(int argc, char** argv) {
  std::string out;
  for (int i = 0; i < argc; ++i) {
    if (i) out += ' ';
    out += argv[i];
  }
  return out;
}

void print_warnings(const PhysParams& params, RunKind kind) {
  for (const auto& w : validate_timescales(params, kind)) std::cerr << "warning: " << w << "\n";
}

std::pair<double, double> parse_window(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw UserError("--window expects A:B");
  try {
    std::size_t used_a = 0, used_b = 0;
    const std::string a = text.substr(0, colon), b = text.substr(colon + 1);
    const double lo = std::stod(a, &used_a);
    const double hi = std::stod(b, &used_b);
    if (used_a != a.size() || used_b != b.size() || !(hi > lo)) throw UserError("");
    return {lo, hi};
  } catch (const std::exception&) {
    throw UserError("--window expects A:B with A < B (got '" + text + "')");
  }
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t used = 0;
    try {
      out.push_back(std::stod(item, &used));
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw UserError("--values: cannot parse '" + item + "'");
  }
  if (out.empty()) throw UserError("--values must list at least one value");
  return out;
}

int cmd_run(const RunConfig& loaded, const std::string& cmdline) {
  const RunConfig cfg = resolve(loaded);
  print_warnings(cfg.params, RunKind::motion);
  const EnsembleConfig ens = ensemble_config(cfg);
  validate_ensemble(ens);

  ManifestInfo info;
  info.command = cmdline;
  const auto t0 = std::chrono::steady_clock::now();
  const EnsembleResult result = run_ensemble(ens);
  info.timings.emplace_back("ensemble", seconds_since(t0));
  info.clamped_mass = result.diagnostics.clamped_mass;

  const fs::path out = cfg.output_dir;
  emit_series(result.series, out / "series.csv");
  write_file_atomic(out / "histogram.csv", histogram_csv(result.histogram));

  info.results.emplace_back("final_p2", format_double(result.final_p2));
  info.results.emplace_back("final_dp", format_double(result.final_dp));
  info.results.emplace_back("final_inversion", format_double(result.final_inversion));
  if (!std::isnan(result.final_corr_e)) {
    info.results.emplace_back("final_corrE", format_double(result.final_corr_e));
  }
  std::cout << "final <p^2> = " << format_double(result.final_p2)
            << "  dp = " << format_double(result.final_dp)
            << "  inversion = " << format_double(result.final_inversion) << "\n";

  const auto t1 = std::chrono::steady_clock::now();
  try {
    const FitResult fit = fit_cooling_rate(result.series);
    write_file_atomic(out / "fit.csv", fit_csv(fit));
    info.results.emplace_back("rate", format_double(fit.rate));
    std::cout << "R = " << format_double(fit.rate) << "  C = " << format_double(fit.asymptote) << "\n";
  } catch (const FitDegenerate& e) {
    info.results.emplace_back("rate", std::string("fit-degenerate: ") + e.what());
    std::cerr << "note: cooling-rate fit skipped: " << e.what() << "\n";
  }
  info.timings.emplace_back("fit", seconds_since(t1));
  info.wall_seconds = seconds_since(t0);
  write_file_atomic(out / "manifest.cfg", emit_manifest(cfg, info));
  std::cout << "wrote " << out.string() << "\n";
  return kExitOk;
}

int cmd_sweep(const RunConfig& loaded, SweepAxis axis, const std::vector<double>& values,
              const std::string& cmdline) {
  RunConfig cfg = resolve(loaded);
  cfg.sweep_axis = axis;
  cfg.sweep_values = values;
  // Per-row dt and stride follow each row's rates unless the config pinned them.
  EnsembleConfig base = ensemble_config(cfg);
  if (loaded.dt <= 0.0) base.step.dt = 0.0;
  if (loaded.sample_stride <= 0) base.record.sample_stride = 0;

  const fs::path out = cfg.output_dir;
  std::vector<SweepRow> rows;
  ManifestInfo info;
  info.command = cmdline;
  const auto t0 = std::chrono::steady_clock::now();
  sweep(axis, values, base, cfg.repump, [&](const SweepRow& row) {
    rows.push_back(row);
    std::cout << to_string(axis) << " = " << format_double(row.value) << "  w = " << format_double(row.w)
              << "  dp = " << format_double(row.final_dp) << "  R = " << format_double(row.rate)
              << "  [" << row.status << "]" << std::endl;
    write_file_atomic(out / "sweep.csv", sweep_csv(axis, rows));
  });
  info.wall_seconds = seconds_since(t0);
  info.timings.emplace_back("sweep", info.wall_seconds);
  double clamped = 0.0;
  int failed = 0;
  for (const auto& r : rows) {
    clamped += r.clamped_mass;
    if (r.status.rfind("failed", 0) == 0) ++failed;
  }
  info.clamped_mass = clamped;
  for (const auto& r : rows) {
    info.results.emplace_back("w_at_" + format_double(r.value), format_double(r.w));
  }
  write_file_atomic(out / "manifest.cfg", emit_manifest(cfg, info));
  std::cout << "wrote " << out.string() << "\n";
  return failed ? kExitNumerical : kExitOk;
}

int cmd_oracle(const RunConfig& loaded, const std::string& cmdline) {
  const RunConfig cfg = resolve(loaded);
  print_warnings(cfg.params, RunKind::spin_only);
  const DerivedRates rates = derive_rates(cfg.params);
  LiouvillianSpec spec;
  spec.gamma_c = rates.gamma_c;
  spec.gamma_delta = rates.gamma_delta;
  spec.w = cfg.params.w;
  spec.positions = cfg.oracle_positions;
  if (spec.positions.empty()) spec.positions.assign(cfg.params.n_atoms, 0.0);
  if (spec.n_atoms() != cfg.params.n_atoms) {
    throw UserError("oracle_positions lists " + std::to_string(spec.n_atoms()) + " positions for n_atoms = " +
                    std::to_string(cfg.params.n_atoms));
  }
  if (spec.n_atoms() > kOracleMaxAtoms) {
    throw UserError("oracle supports at most " + std::to_string(kOracleMaxAtoms) + " atoms");
  }

  ManifestInfo info;
  info.command = cmdline;
  const auto t0 = std::chrono::steady_clock::now();
  const DiscrepancyReport report = compare_cumulant(spec);
  info.wall_seconds = seconds_since(t0);
  info.timings.emplace_back("oracle", info.wall_seconds);
  info.results.emplace_back("max_pointwise", format_double(report.max_pointwise));
  info.results.emplace_back("max_steady_rel", format_double(report.max_steady_rel));

  const fs::path out = cfg.output_dir;
  write_file_atomic(out / "oracle.csv", oracle_csv(report));
  write_file_atomic(out / "manifest.cfg", emit_manifest(cfg, info));
  for (const auto& m : report.moments) {
    std::cout << m.name << "  exact = " << format_double(m.exact) << "  cumulant = " << format_double(m.cumulant)
              << "  rel = " << format_double(m.rel_error) << "\n";
  }
  std::cout << "max pointwise |diff| = " << format_double(report.max_pointwise)
            << "  max steady-state rel = " << format_double(report.max_steady_rel) << "\n";
  return kExitOk;
}

int cmd_fit(const fs::path& series_path, const std::string& window) {
  const EnsembleSeries series = read_series(series_path);
  std::optional<std::pair<double, double>> win;
  if (!window.empty()) win = parse_window(window);
  const FitResult fit = fit_cooling_rate(series, win);
  std::cout << "R=" << format_double(fit.rate) << " C=" << format_double(fit.asymptote)
            << " A=" << format_double(fit.amplitude) << " rms=" << format_double(fit.rms_residual)
            << " window=" << format_double(fit.window_start) << ":" << format_double(fit.window_end) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo simulator of collective cavity cooling"};
  app.require_subcommand(1);

  std::string config_path, out_dir, axis_name, values_text, series_path, window;
  std::optional<std::uint64_t> seed;

  auto* run = app.add_subcommand("run", "Run an ensemble and write series, histogram, fit and manifest");
  run->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Override the master seed");
  run->add_option("--out", out_dir, "Override the output directory");

  auto* sw = app.add_subcommand("sweep", "Sweep one parameter and write sweep.csv");
  sw->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  sw->add_option("--axis", axis_name, "n_atoms, gamma_c or w")
      ->check(CLI::IsMember({"n_atoms", "gamma_c", "w"}));
  sw->add_option("--values", values_text, "Comma-separated values");
  sw->add_option("--seed", seed, "Override the master seed");
  sw->add_option("--out", out_dir, "Override the output directory");

  auto* orc = app.add_subcommand("oracle", "Compare the cumulant closure with the exact master equation");
  orc->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  orc->add_option("--out", out_dir, "Override the output directory");

  auto* fit = app.add_subcommand("fit", "Fit A exp(-R t) + C to a series CSV");
  fit->add_option("--series", series_path, "Series CSV")->required()->check(CLI::ExistingFile);
  fit->add_option("--window", window, "Fit window A:B");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUser;
  }

  const std::string cmdline = command_line(argc, argv);
  std::optional<RunConfig> cfg;
  try {
    if (!fit->parsed()) {
      cfg = load_config(config_path);
      if (seed) cfg->seed = *seed;
      if (!out_dir.empty()) cfg->output_dir = out_dir;
    }
    if (run->parsed()) return cmd_run(*cfg, cmdline);
    if (sw->parsed()) {
      if (axis_name.empty() && !cfg->sweep_axis) throw UserError("sweep needs --axis or sweep_axis in the config");
      const SweepAxis axis = axis_name.empty() ? *cfg->sweep_axis : parse_sweep_axis(axis_name);
      const std::vector<double> values = values_text.empty() ? cfg->sweep_values : parse_values(values_text);
      if (values.empty()) throw UserError("sweep needs --values or sweep_values in the config");
      return cmd_sweep(*cfg, axis, values, cmdline);
    }
    if (orc->parsed()) return cmd_oracle(*cfg, cmdline);
    return cmd_fit(series_path, window);
  } catch (const EnsembleFailure& e) {
    std::cerr << "numerical failure: " << e.what() << " (seed " << e.seed << ", trajectory " << e.index << ")\n";
    return kExitNumerical;
  } catch (const TrajectoryFailure& e) {
    std::cerr << "numerical failure: " << e.what() << " (seed " << e.seed << ", trajectory " << e.index << ")\n";
    return kExitNumerical;
  } catch (const FitDegenerate& e) {
    std::cerr << "fit failed: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUser;
  } catch (const InvalidParameter& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUser;
  } catch (const UserError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUser;
  } catch (const CapacityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUser;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUser;
  }
}
