#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cavcool/analysis.hpp"
#include "cavcool/ensemble.hpp"
#include "cavcool/oracle.hpp"

namespace cavcool {

enum class Provenance { user, defaulted, derived };

// Flat `key = value` configuration; see docs/formats.md for the schema.
struct RunConfig {
  PhysParams params;
  RepumpRule repump;
  int n_traj = 1;
  double dt = 0.0;  // 0 = auto
  double t_final = 0.0;
  int sample_stride = 0;  // 0 = auto (about 200 records per run)
  InitConfig init;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  std::optional<SweepAxis> sweep_axis;
  std::vector<double> sweep_values;
  HistogramMode histogram = HistogramMode::automatic;
  int histogram_snapshots = 1;
  int spin_substeps = 1;
  SpinScheme spin_scheme = SpinScheme::rk4;
  int refactor_interval = 1;
  FactorMethod factorization = FactorMethod::cholesky;
  int noise_refine = 1;
  std::vector<double> oracle_positions;  // empty = all atoms at an antinode
  std::map<std::string, Provenance> provenance;
};

// Parses and validates; unknown keys, malformed values and violated
// constraints raise ConfigError naming the key.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

// Fills in auto dt, auto sample stride and w from the repump rule.
RunConfig resolve(const RunConfig& cfg);

EnsembleConfig ensemble_config(const RunConfig& resolved_cfg);

// Canonical `key = value` rendering of every key; parse_config(emit_config(c))
// reproduces c.
std::string emit_config(const RunConfig& cfg);

// Shortest decimal string that parses back to the same double.
std::string format_double(double v);

struct ManifestInfo {
  std::string command;
  double wall_seconds = 0.0;
  std::vector<std::pair<std::string, double>> timings;
  std::vector<std::pair<std::string, std::string>> results;
  double clamped_mass = 0.0;
};

// Resolved config plus metadata lines (as comments, so the manifest is itself
// a valid config file).
std::string emit_manifest(const RunConfig& resolved_cfg, const ManifestInfo& info);

// Writes to a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string series_csv(const EnsembleSeries& series);
std::string histogram_csv(const MomentumHistogram& h);
std::string fit_csv(const FitResult& fit);
std::string sweep_csv(SweepAxis axis, const std::vector<SweepRow>& rows);
std::string oracle_csv(const DiscrepancyReport& report);

void emit_series(const EnsembleSeries& series, const std::filesystem::path& path);

// Reads a series CSV written by emit_series.
EnsembleSeries read_series(const std::filesystem::path& path);

}  // namespace cavcool
