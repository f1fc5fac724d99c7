#include "cavcool/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <optional>
#include <sstream>

#include "cavcool/analysis.hpp"

namespace cavcool {

MomentumHistogram::MomentumHistogram(double lo_, double hi_, int bins)
    : lo(lo_), hi(hi_), counts(static_cast<std::size_t>(bins), 0) {}

MomentumHistogram MomentumHistogram::wide() { return {-20.0, 20.0, 81}; }
MomentumHistogram MomentumHistogram::recoil() { return {-2.0, 2.0, 41}; }

void MomentumHistogram::add(double p) {
  ++total;
  const double p2 = p * p;
  sum1 += p;
  sum2 += p2;
  sum3 += p2 * p;
  sum4 += p2 * p2;
  if (p < lo) {
    ++underflow;
    return;
  }
  if (p >= hi) {
    ++overflow;
    return;
  }
  auto i = static_cast<std::size_t>((p - lo) / (hi - lo) * static_cast<double>(counts.size()));
  counts[std::min(i, counts.size() - 1)] += 1;
}

void MomentumHistogram::merge(const MomentumHistogram& other) {
  if (other.counts.size() != counts.size() || other.lo != lo || other.hi != hi) {
    throw std::invalid_argument("histogram merge: incompatible binning");
  }
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
  underflow += other.underflow;
  overflow += other.overflow;
  total += other.total;
  sum1 += other.sum1;
  sum2 += other.sum2;
  sum3 += other.sum3;
  sum4 += other.sum4;
}

double MomentumHistogram::excess_kurtosis() const {
  const double n = static_cast<double>(total);
  const double m = sum1 / n;
  // central moments from raw power sums
  const double c2 = sum2 / n - m * m;
  const double c4 = sum4 / n - 4.0 * m * sum3 / n + 6.0 * m * m * sum2 / n - 3.0 * m * m * m * m;
  return c4 / (c2 * c2) - 3.0;
}

void validate_ensemble(const EnsembleConfig& cfg) {
  const DerivedRates rates = derive_rates(cfg.params);
  validate_timescales(cfg.params, RunKind::motion);
  StepConfig step = cfg.step;
  if (step.dt <= 0.0) step.dt = auto_dt(cfg.params, rates);
  validate_step_config(step, cfg.params, rates);
  if (cfg.n_traj < 1) throw ConfigError("n_traj must be >= 1");
  if (cfg.t_final < 0.0) throw ConfigError("t_final must be >= 0");
}

double late_time_average(const std::vector<double>& times, const std::vector<double>& values,
                         double fraction) {
  if (times.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double cut = times.back() - fraction * (times.back() - times.front());
  double sum = 0.0;
  int count = 0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (times[k] >= cut - 1e-12 * std::abs(cut)) {
      sum += values[k];
      ++count;
    }
  }
  return sum / count;
}

namespace {

// Merges trajectory results strictly in index order.
class Accumulator {
 public:
  explicit Accumulator(int n_traj) : n_traj_(n_traj) {}

  void add(const TrajectorySeries& s) {
    if (sum_p2_.empty()) {
      times_ = s.t;
      const std::size_t k = s.t.size();
      sum_p2_.assign(k, 0.0);
      sum_p2_sq_.assign(k, 0.0);
      sum_corr_.assign(k, 0.0);
      sum_inv_.assign(k, 0.0);
    }
    for (std::size_t k = 0; k < times_.size(); ++k) {
      sum_p2_[k] += s.p2[k];
      sum_p2_sq_[k] += s.p2[k] * s.p2[k];
      sum_corr_[k] += s.corr_e[k];
      sum_inv_[k] += s.inversion[k];
    }
    const double late_p2 = late_time_average(s.t, s.p2);
    const double late_corr = late_time_average(s.t, s.corr_e);
    late_p2_ += late_p2;
    late_p2_sq_ += late_p2 * late_p2;
    late_corr_ += late_corr;
    late_corr_sq_ += late_corr * late_corr;
    for (const auto& snap : s.snapshots) {
      for (double p : snap) {
        wide_.add(p);
        recoil_.add(p);
      }
    }
    diag_.clamped_mass += s.diagnostics.clamped_mass;
    diag_.max_overshoot = std::max(diag_.max_overshoot, s.diagnostics.max_overshoot);
    diag_.factorizations += s.diagnostics.factorizations;
  }

  EnsembleResult finish(HistogramMode mode) const {
    EnsembleResult r;
    const double n = n_traj_;
    auto& es = r.series;
    es.n_traj = n_traj_;
    es.times = times_;
    for (std::size_t k = 0; k < times_.size(); ++k) {
      const double mean = sum_p2_[k] / n;
      es.p2_mean.push_back(mean);
      double sem = 0.0;
      if (n_traj_ > 1) {
        const double var = std::max(0.0, (sum_p2_sq_[k] - n * mean * mean) / (n - 1.0));
        sem = std::sqrt(var / n);
      }
      es.p2_sem.push_back(sem);
      es.corr_e_mean.push_back(sum_corr_[k] / n);
      es.inversion_mean.push_back(sum_inv_[k] / n);
    }
    r.diagnostics = diag_;
    r.final_p2 = late_time_average(es.times, es.p2_mean);
    r.final_dp = std::sqrt(r.final_p2);
    r.final_corr_e = late_time_average(es.times, es.corr_e_mean);
    r.final_inversion = late_time_average(es.times, es.inversion_mean);
    auto sem_of = [&](double sum, double sum_sq) {
      if (n_traj_ < 2) return 0.0;
      const double mean = sum / n;
      return std::sqrt(std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0)) / n);
    };
    r.final_p2_sem = sem_of(late_p2_, late_p2_sq_);
    r.final_corr_e_sem = sem_of(late_corr_, late_corr_sq_);
    switch (mode) {
      case HistogramMode::wide: r.histogram = wide_; break;
      case HistogramMode::recoil: r.histogram = recoil_; break;
      case HistogramMode::automatic: r.histogram = r.final_dp < 1.0 ? recoil_ : wide_; break;
    }
    return r;
  }

 private:
  int n_traj_;
  std::vector<double> times_, sum_p2_, sum_p2_sq_, sum_corr_, sum_inv_;
  double late_p2_ = 0.0, late_p2_sq_ = 0.0, late_corr_ = 0.0, late_corr_sq_ = 0.0;
  MomentumHistogram wide_ = MomentumHistogram::wide();
  MomentumHistogram recoil_ = MomentumHistogram::recoil();
  EnsembleDiagnostics diag_;
};

EnsembleConfig resolved(const EnsembleConfig& cfg) {
  validate_ensemble(cfg);
  EnsembleConfig out = cfg;
  if (out.step.dt <= 0.0) out.step.dt = auto_dt(cfg.params, derive_rates(cfg.params));
  if (out.record.sample_stride <= 0) {
    out.record.sample_stride = static_cast<int>(std::max(1LL, step_count(out.t_final, out.step.dt) / 200));
  }
  return out;
}

TrajectorySeries run_one(const EnsembleConfig& cfg, std::uint64_t index) {
  try {
    return run_trajectory(init_trajectory(cfg.params, cfg.init, cfg.seed, index), cfg.params,
                          cfg.step, cfg.t_final, cfg.record);
  } catch (TrajectoryFailure& e) {
    e.seed = cfg.seed;
    e.index = index;
    throw;
  }
}

[[noreturn]] void report_failure(const TrajectoryFailure& e) {
  std::ostringstream msg;
  msg << "trajectory " << e.index << " (seed " << e.seed << ") failed: " << e.what();
  throw EnsembleFailure(msg.str(), e.seed, e.index);
}

constexpr int kBlock = 64;

}  // namespace

EnsembleResult run_ensemble_serial(const EnsembleConfig& cfg_in) {
  const EnsembleConfig cfg = resolved(cfg_in);
  Accumulator acc(cfg.n_traj);
  for (int i = 0; i < cfg.n_traj; ++i) {
    try {
      acc.add(run_one(cfg, static_cast<std::uint64_t>(i)));
    } catch (const TrajectoryFailure& e) {
      report_failure(e);
    }
  }
  return acc.finish(cfg.histogram);
}

EnsembleResult run_ensemble(const EnsembleConfig& cfg_in) {
  const EnsembleConfig cfg = resolved(cfg_in);
  Accumulator acc(cfg.n_traj);
  std::vector<std::optional<TrajectorySeries>> block(kBlock);
  std::vector<std::exception_ptr> errors(kBlock);
  for (int first = 0; first < cfg.n_traj; first += kBlock) {
    const int count = std::min(kBlock, cfg.n_traj - first);
#pragma omp parallel for schedule(dynamic, 1)
    for (int b = 0; b < count; ++b) {
      try {
        block[b] = run_one(cfg, static_cast<std::uint64_t>(first + b));
      } catch (...) {
        errors[b] = std::current_exception();
      }
    }
    for (int b = 0; b < count; ++b) {
      if (errors[b]) {
        try {
          std::rethrow_exception(errors[b]);
        } catch (const TrajectoryFailure& e) {
          report_failure(e);
        }
      }
      acc.add(*block[b]);
      block[b].reset();
    }
  }
  return acc.finish(cfg.histogram);
}

SweepAxis parse_sweep_axis(const std::string& name) {
  if (name == "n_atoms") return SweepAxis::n_atoms;
  if (name == "gamma_c") return SweepAxis::gamma_c;
  if (name == "w") return SweepAxis::w;
  throw ConfigError("unknown sweep axis '" + name + "' (expected n_atoms, gamma_c or w)");
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::n_atoms: return "n_atoms";
    case SweepAxis::gamma_c: return "gamma_c";
    case SweepAxis::w: return "w";
  }
  return "?";
}

double RepumpRule::resolve(const PhysParams& params, const DerivedRates& rates) const {
  switch (kind) {
    case Kind::fixed: return params.w;
    case Kind::scaled: return scale * params.n_atoms * rates.gamma_c;
    case Kind::anchors: {
      if (anchors.empty()) throw ConfigError("w_anchors is empty");
      const double n = params.n_atoms;
      if (n <= anchors.front().first) return anchors.front().second;
      if (n >= anchors.back().first) return anchors.back().second;
      for (std::size_t i = 1; i < anchors.size(); ++i) {
        const auto [n0, w0] = anchors[i - 1];
        const auto [n1, w1] = anchors[i];
        if (n <= n1) return w0 + (w1 - w0) * (n - n0) / (n1 - n0);
      }
      return anchors.back().second;
    }
  }
  return params.w;
}

std::vector<SweepRow> sweep(SweepAxis axis, const std::vector<double>& values,
                            const EnsembleConfig& base, const RepumpRule& rule,
                            const RowSink& sink) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  std::vector<SweepRow> rows;
  for (double value : values) {
    SweepRow row;
    row.value = value;
    row.n_traj = base.n_traj;
    try {
      EnsembleConfig cfg = base;
      switch (axis) {
        case SweepAxis::n_atoms: cfg.params.n_atoms = static_cast<int>(std::lround(value)); break;
        case SweepAxis::gamma_c:
          cfg.params.gamma_c = value;
          cfg.params.g.reset();
          break;
        case SweepAxis::w: cfg.params.w = value; break;
      }
      const DerivedRates rates = derive_rates(cfg.params);
      if (axis != SweepAxis::w) cfg.params.w = rule.resolve(cfg.params, rates);
      row.w = cfg.params.w;
      if (base.step.dt <= 0.0) cfg.step.dt = 0.0;
      const EnsembleResult res = run_ensemble(cfg);
      row.final_dp = res.final_dp;
      row.final_p2 = res.final_p2;
      row.corr_e = res.final_corr_e;
      row.clamped_mass = res.diagnostics.clamped_mass;
      const double rs =
          rates.eta * rates.gamma_c * averaged_single_atom_population(cfg.params.w, rates.gamma_c);
      try {
        const FitResult fit = fit_cooling_rate(res.series);
        row.rate = fit.rate;
        row.rate_over_rs = fit.rate / rs;
        row.status = "ok";
      } catch (const FitDegenerate& e) {
        row.rate = row.rate_over_rs = std::numeric_limits<double>::quiet_NaN();
        row.status = std::string("fit-degenerate: ") + e.what();
      }
    } catch (const std::exception& e) {
      row.final_dp = row.final_p2 = row.corr_e = row.rate = row.rate_over_rs =
          std::numeric_limits<double>::quiet_NaN();
      row.status = std::string("failed: ") + e.what();
    }
    rows.push_back(row);
    if (sink) sink(row);
  }
  return rows;
}

}  // namespace cavcool
