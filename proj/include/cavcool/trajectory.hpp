#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cavcool/motion.hpp"
#include "cavcool/params.hpp"
#include "cavcool/rng.hpp"
#include "cavcool/spin.hpp"

namespace cavcool {

struct Diagnostics {
  double clamped_mass = 0.0;    // accumulated over all factorizations
  double max_overshoot = 0.0;   // largest population excursion outside [0, 1]
  long long factorizations = 0;
};

struct TrajectoryState {
  double t = 0.0;
  std::vector<double> x;
  std::vector<double> p;
  SpinMoments spins;
  Rng rng{0};
  Diagnostics diagnostics;
};

enum class PositionLaw { uniform, antinode };

struct InitConfig {
  double dp0 = 15.0;  // Gaussian width of the initial momenta (hbar k)
  PositionLaw positions = PositionLaw::uniform;
};

struct StepConfig {
  double dt = 0.0;
  int spin_substeps = 1;
  SpinScheme spin_scheme = SpinScheme::rk4;
  int refactor_interval = 1;
  int noise_refine = 1;
  FactorMethod factorization = FactorMethod::cholesky;
  bool noise = true;
};

// Largest atomic rate the time step must resolve: max(w, N*Gamma_C, Gamma_C).
double max_atomic_rate(const PhysParams& params, const DerivedRates& rates);
// Default step 0.1 / max_atomic_rate.
double auto_dt(const PhysParams& params, const DerivedRates& rates);
// Throws ConfigError when dt * max_atomic_rate > 0.1 or counts are < 1.
void validate_step_config(const StepConfig& cfg, const PhysParams& params,
                          const DerivedRates& rates);

class TrajectoryFailure : public std::runtime_error {
 public:
  TrajectoryFailure(const std::string& what, Diagnostics diag, double t)
      : std::runtime_error(what), diagnostics(diag), time(t) {}
  Diagnostics diagnostics;
  double time;
  std::uint64_t seed = 0;
  std::uint64_t index = 0;
};

TrajectoryState init_trajectory(const PhysParams& params, const InitConfig& init,
                                std::uint64_t seed, std::uint64_t index = 0);

// Owns the per-trajectory workspaces so repeated steps do not allocate.
class TrajectoryStepper {
 public:
  TrajectoryStepper(const PhysParams& params, const StepConfig& cfg);

  void step(TrajectoryState& s);
  long long steps_taken() const { return steps_; }

 private:
  void refactor(TrajectoryState& s);

  PhysParams params_;
  DerivedRates rates_;
  StepConfig cfg_;
  SpinRates spin_rates_;
  MotionCoefficients coef_;
  SpinStepper spin_stepper_;
  ModeFunctions mode_;
  CollectiveSums sums_;
  Eigen::MatrixXd re_corr_;
  Eigen::MatrixXd diffusion_;
  Eigen::MatrixXd factor_;
  FactorWorkspace factor_ws_;
  Eigen::VectorXd z_, kick_;
  std::vector<double> force_;
  long long steps_ = 0;
};

struct TrajectorySeries {
  std::vector<double> t;
  std::vector<double> p2;          // mean_j p_j^2
  std::vector<double> corr_e;      // NaN when N == 1
  std::vector<double> inversion;   // mean population
  std::vector<double> final_x;
  std::vector<double> final_p;
  std::vector<std::vector<double>> snapshots;  // momenta at snapshot steps
  Diagnostics diagnostics;
};

struct RecordConfig {
  int sample_stride = 1;     // steps between records; <= 0 lets run_ensemble pick ~200 records
  int late_snapshots = 1;    // momentum snapshots spread over the last 10% (>= 1; last is final)
};

long long step_count(double t_final, double dt);

TrajectorySeries run_trajectory(TrajectoryState state, const PhysParams& params,
                                const StepConfig& cfg, double t_final,
                                const RecordConfig& record);

}  // namespace cavcool
