#include "cavcool/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace cavcool {

double max_atomic_rate(const PhysParams& params, const DerivedRates& rates) {
  return std::max({params.w, params.n_atoms * rates.gamma_c, rates.gamma_c});
}

double auto_dt(const PhysParams& params, const DerivedRates& rates) {
  return 0.1 / max_atomic_rate(params, rates);
}

void validate_step_config(const StepConfig& cfg, const PhysParams& params,
                          const DerivedRates& rates) {
  if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt)) throw ConfigError("dt must be positive");
  const double limit = 0.1 / max_atomic_rate(params, rates);
  if (cfg.dt > limit * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "dt = " << cfg.dt << " exceeds 0.1 / max(w, N*Gamma_C, Gamma_C) = " << limit;
    throw ConfigError(msg.str());
  }
  if (cfg.spin_substeps < 1) throw ConfigError("spin_substeps must be >= 1");
  if (cfg.refactor_interval < 1) throw ConfigError("refactor_interval must be >= 1");
  if (cfg.noise_refine < 1) throw ConfigError("noise_refine must be >= 1");
}

TrajectoryState init_trajectory(const PhysParams& params, const InitConfig& init,
                                std::uint64_t seed, std::uint64_t index) {
  const DerivedRates rates = derive_rates(params);
  const auto n = static_cast<std::size_t>(params.n_atoms);
  TrajectoryState s;
  s.rng = Rng(seed, index);
  s.x.resize(n);
  s.p.resize(n);
  s.spins = SpinMoments(n);
  for (std::size_t j = 0; j < n; ++j) {
    s.x[j] = init.positions == PositionLaw::uniform ? 2.0 * std::numbers::pi * s.rng.uniform()
                                                    : 0.0;
  }
  for (std::size_t j = 0; j < n; ++j) s.p[j] = init.dp0 * s.rng.normal();
  for (std::size_t j = 0; j < n; ++j) {
    const double c = std::cos(s.x[j]);
    const double denom = params.w + rates.gamma_c * c * c;
    s.spins.pop()[j] = denom > 0.0 ? params.w / denom : 0.0;
  }
  return s;
}

TrajectoryStepper::TrajectoryStepper(const PhysParams& params, const StepConfig& cfg)
    : params_(params),
      rates_(derive_rates(params)),
      cfg_(cfg),
      spin_rates_{rates_.gamma_c, rates_.gamma_delta, params.w},
      coef_(motion_coefficients(params, rates_)),
      spin_stepper_(static_cast<std::size_t>(params.n_atoms)),
      force_(static_cast<std::size_t>(params.n_atoms)) {
  validate_step_config(cfg_, params_, rates_);
}

void TrajectoryStepper::refactor(TrajectoryState& s) {
  diffusion_matrix(mode_, s.spins, re_corr_, coef_, diffusion_);
  ++s.diagnostics.factorizations;
  s.diagnostics.clamped_mass += noise_factor(diffusion_, cfg_.factorization, factor_ws_, factor_);
}

void TrajectoryStepper::step(TrajectoryState& s) {
  const std::size_t n = s.x.size();
  const double dt = cfg_.dt;

  mode_.update(s.x);
  spin_stepper_.advance(s.spins, mode_, spin_rates_, dt, cfg_.spin_substeps, cfg_.spin_scheme);
  const ClampReport clamp = clamp_populations(s.spins);
  s.diagnostics.max_overshoot = std::max(s.diagnostics.max_overshoot, clamp.max_overshoot);
  if (!clamp.ok || !s.spins.all_finite()) {
    std::ostringstream msg;
    msg << "spin integration failed at t = " << s.t << " (population overshoot "
        << clamp.max_overshoot << ")";
    throw TrajectoryFailure(msg.str(), s.diagnostics, s.t);
  }

  collective_sums(s.spins, mode_, sums_);
  real_correlation_matrix(s.spins, re_corr_);
  drift_force(mode_, s.p, s.spins, sums_, re_corr_, coef_, force_);

  if (cfg_.noise) {
    if (steps_ % cfg_.refactor_interval == 0) refactor(s);
    sample_kick(factor_, dt, s.rng, cfg_.noise_refine, z_, kick_);
  }

  const double inv_mass = 1.0 / rates_.mass;
  for (std::size_t j = 0; j < n; ++j) {
    s.p[j] += force_[j] * dt + (cfg_.noise ? kick_[j] : 0.0);
    s.x[j] += s.p[j] * inv_mass * dt;
    if (!std::isfinite(s.p[j]) || !std::isfinite(s.x[j])) {
      std::ostringstream msg;
      msg << "non-finite motion state at t = " << s.t;
      throw TrajectoryFailure(msg.str(), s.diagnostics, s.t);
    }
  }
  ++steps_;
  s.t = steps_ * dt;
}

long long step_count(double t_final, double dt) {
  if (t_final <= 0.0) return 0;
  return static_cast<long long>(std::ceil(t_final / dt - 1e-9));
}

namespace {

void record(TrajectorySeries& out, const TrajectoryState& s) {
  const std::size_t n = s.p.size();
  double p2 = 0.0;
  for (double v : s.p) p2 += v * v;
  out.t.push_back(s.t);
  out.p2.push_back(p2 / static_cast<double>(n));
  out.corr_e.push_back(n >= 2 ? correlation_E(s.spins, ModeFunctions(s.x))
                              : std::numeric_limits<double>::quiet_NaN());
  out.inversion.push_back(mean_inversion(s.spins));
}

}  // namespace

TrajectorySeries run_trajectory(TrajectoryState state, const PhysParams& params,
                                const StepConfig& cfg, double t_final,
                                const RecordConfig& record_cfg) {
  if (t_final < 0.0) throw ConfigError("t_final must be >= 0");
  const int stride = std::max(1, record_cfg.sample_stride);
  const long long n_steps = step_count(t_final, cfg.dt);
  const int n_snap = std::max(1, record_cfg.late_snapshots);
  const long long gap = std::max(1LL, n_steps / (10LL * n_snap));

  TrajectoryStepper stepper(params, cfg);
  TrajectorySeries out;
  record(out, state);
  auto is_snapshot = [&](long long k) {
    const long long back = n_steps - k;
    return back >= 0 && back % gap == 0 && back / gap < n_snap;
  };
  if (is_snapshot(0)) out.snapshots.push_back(state.p);
  for (long long k = 1; k <= n_steps; ++k) {
    stepper.step(state);
    if (k % stride == 0 || k == n_steps) record(out, state);
    if (is_snapshot(k)) out.snapshots.push_back(state.p);
  }
  out.final_x = state.x;
  out.final_p = state.p;
  out.diagnostics = state.diagnostics;
  return out;
}

}  // namespace cavcool
