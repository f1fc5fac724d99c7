#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cavcool/params.hpp"
#include "cavcool/trajectory.hpp"

namespace cavcool {

enum class HistogramMode { automatic, wide, recoil };

struct EnsembleConfig {
  PhysParams params;
  StepConfig step;
  InitConfig init;
  RecordConfig record;
  double t_final = 0.0;
  int n_traj = 1;
  std::uint64_t seed = 1;
  HistogramMode histogram = HistogramMode::automatic;
};

struct EnsembleSeries {
  std::vector<double> times;
  std::vector<double> p2_mean;
  std::vector<double> p2_sem;
  std::vector<double> corr_e_mean;
  std::vector<double> inversion_mean;
  int n_traj = 0;
};

// Fixed-width bins over [lo, hi) plus underflow/overflow, so that
// underflow + sum(counts) + overflow == total always holds.
struct MomentumHistogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<long long> counts;
  long long underflow = 0;
  long long overflow = 0;
  long long total = 0;
  // Raw-sample power sums for moment statistics.
  double sum1 = 0.0, sum2 = 0.0, sum3 = 0.0, sum4 = 0.0;

  MomentumHistogram() = default;
  MomentumHistogram(double lo_, double hi_, int bins);
  static MomentumHistogram wide();    // 81 bins over [-20, 20]
  static MomentumHistogram recoil();  // 41 bins over [-2, 2]

  void add(double p);
  void merge(const MomentumHistogram& other);
  int bins() const { return static_cast<int>(counts.size()); }
  double edge(int i) const { return lo + (hi - lo) * i / bins(); }
  double mean() const { return sum1 / total; }
  double second_moment() const { return sum2 / total; }
  double excess_kurtosis() const;
};

struct EnsembleDiagnostics {
  double clamped_mass = 0.0;
  double max_overshoot = 0.0;
  long long factorizations = 0;
};

struct EnsembleResult {
  EnsembleSeries series;
  MomentumHistogram histogram;
  EnsembleDiagnostics diagnostics;
  double final_dp = 0.0;        // sqrt of late-time (last 10%) averaged p2_mean
  double final_p2 = 0.0;
  double final_corr_e = 0.0;    // late-time averaged; NaN for N == 1
  double final_inversion = 0.0;
  // Standard errors of the late-time averages across trajectories.
  double final_p2_sem = 0.0;
  double final_corr_e_sem = 0.0;
};

class EnsembleFailure : public std::runtime_error {
 public:
  EnsembleFailure(const std::string& what, std::uint64_t seed_, std::uint64_t index_)
      : std::runtime_error(what), seed(seed_), index(index_) {}
  std::uint64_t seed;
  std::uint64_t index;
};

// Validates the configuration (time scales, step size) before any compute.
void validate_ensemble(const EnsembleConfig& cfg);

// Trajectories run concurrently (OpenMP); results are merged in index order so
// the output does not depend on the thread count or schedule.
EnsembleResult run_ensemble(const EnsembleConfig& cfg);
// Single-threaded reference; bit-identical to run_ensemble.
EnsembleResult run_ensemble_serial(const EnsembleConfig& cfg);

// Late-time window average (t >= (1 - fraction) * t_end) of a series column.
double late_time_average(const std::vector<double>& times, const std::vector<double>& values,
                         double fraction = 0.1);

enum class SweepAxis { n_atoms, gamma_c, w };

SweepAxis parse_sweep_axis(const std::string& name);
std::string to_string(SweepAxis axis);

struct SweepRow {
  double value = 0.0;
  double w = 0.0;
  double final_dp = 0.0;
  double final_p2 = 0.0;
  double corr_e = 0.0;
  double rate = 0.0;          // NaN when the fit is degenerate
  double rate_over_rs = 0.0;  // rate / (eta Gamma_C <pop>_x)
  double clamped_mass = 0.0;
  int n_traj = 0;
  std::string status;         // "ok", "fit-degenerate: ..." or "failed: ..."
};

// How w follows the swept parameters.
struct RepumpRule {
  enum class Kind { fixed, scaled, anchors } kind = Kind::fixed;
  double scale = 0.25;                             // w = scale * N * Gamma_C
  std::vector<std::pair<double, double>> anchors;  // (N, w), piecewise-linear in N
  double resolve(const PhysParams& params, const DerivedRates& rates) const;
};

using RowSink = std::function<void(const SweepRow&)>;

std::vector<SweepRow> sweep(SweepAxis axis, const std::vector<double>& values,
                            const EnsembleConfig& base, const RepumpRule& rule,
                            const RowSink& sink = {});

}  // namespace cavcool
