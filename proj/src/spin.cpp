#include "cavcool/spin.hpp"

#include <algorithm>
#include <cmath>

namespace cavcool {

ModeFunctions::ModeFunctions(std::span<const double> x) { update(x); }

void ModeFunctions::update(std::span<const double> x) {
  cos.resize(x.size());
  sin.resize(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    cos[j] = std::cos(x[j]);
    sin[j] = std::sin(x[j]);
  }
}

void SpinMoments::set_pair(std::size_t j, std::size_t l, cplx value) {
  if (j == l) {
    pop_[j] = value.real();
  } else if (j < l) {
    coh_[pair_index(j, l)] = value;
  } else {
    coh_[pair_index(l, j)] = std::conj(value);
  }
}

void SpinMoments::set_zero() {
  std::fill(pop_.begin(), pop_.end(), 0.0);
  std::fill(coh_.begin(), coh_.end(), cplx{});
}

void SpinMoments::axpy(double a, const SpinMoments& other) {
  for (std::size_t j = 0; j < pop_.size(); ++j) pop_[j] += a * other.pop_[j];
  for (std::size_t q = 0; q < coh_.size(); ++q) coh_[q] += a * other.coh_[q];
}

bool SpinMoments::all_finite() const {
  for (double v : pop_)
    if (!std::isfinite(v)) return false;
  for (const cplx& v : coh_)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  return true;
}

void collective_sums(const SpinMoments& m, const ModeFunctions& mode, CollectiveSums& out) {
  const std::size_t n = m.size();
  if (mode.size() != n) throw std::invalid_argument("collective_sums: dimension mismatch");
  out.sjJm.assign(n, cplx{});
  const auto& pop = m.pop();
  const auto& coh = m.coh();
  const double* c = mode.cos.data();
  for (std::size_t j = 0; j < n; ++j) out.sjJm[j] = c[j] * pop[j];
  std::size_t q = 0;
  for (std::size_t j = 0; j < n; ++j) {
    cplx acc{};
    for (std::size_t l = j + 1; l < n; ++l, ++q) {
      acc += c[l] * coh[q];
      out.sjJm[l] += c[j] * std::conj(coh[q]);
    }
    out.sjJm[j] += acc;
  }
  double jpjm = 0.0;
  for (std::size_t j = 0; j < n; ++j) jpjm += c[j] * out.sjJm[j].real();
  out.jpjm = jpjm;
}

CollectiveSums collective_sums(const SpinMoments& m, std::span<const double> x) {
  CollectiveSums out;
  collective_sums(m, ModeFunctions(x), out);
  return out;
}

void spin_rhs(const SpinMoments& m, const ModeFunctions& mode, const SpinRates& rates,
              SpinMoments& deriv, CollectiveSums& sums) {
  const std::size_t n = m.size();
  if (deriv.size() != n) deriv = SpinMoments(n);
  collective_sums(m, mode, sums);

  const cplx gp{rates.gamma_c, rates.gamma_delta};  // Gamma_C + i Gamma_Delta
  const cplx gm = std::conj(gp);
  const auto& pop = m.pop();
  const auto& coh = m.coh();
  const double* c = mode.cos.data();
  auto& dpop = deriv.pop();
  auto& dcoh = deriv.coh();

  for (std::size_t j = 0; j < n; ++j) {
    dpop[j] = rates.w * (1.0 - pop[j]) - (gm * c[j] * sums.sjJm[j]).real();
  }

  std::size_t q = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const cplx decay_j = gp * (c[j] * c[j] * pop[j]);
    const cplx drive_j = 0.5 * gp * c[j] * (2.0 * pop[j] - 1.0);
    const cplx sj = sums.sjJm[j];
    for (std::size_t l = j + 1; l < n; ++l, ++q) {
      const double inv_l = c[l] * (2.0 * pop[l] - 1.0);
      const cplx decay = rates.w + decay_j + gm * (c[l] * c[l] * pop[l]);
      dcoh[q] = -decay * coh[q] + drive_j * std::conj(sums.sjJm[l]) + 0.5 * gm * inv_l * sj;
    }
  }
}

SpinMoments spin_rhs(const SpinMoments& m, std::span<const double> x, const SpinRates& rates) {
  SpinMoments deriv(m.size());
  CollectiveSums sums;
  spin_rhs(m, ModeFunctions(x), rates, deriv, sums);
  return deriv;
}

double correlation_E(const SpinMoments& m, const ModeFunctions& mode) {
  const std::size_t n = m.size();
  if (n < 2) throw UndefinedObservable("correlation_E requires at least two atoms");
  CollectiveSums sums;
  collective_sums(m, mode, sums);
  double self = 0.0;
  for (std::size_t j = 0; j < n; ++j) self += m.pop()[j] * mode.cos[j] * mode.cos[j];
  const double nn = static_cast<double>(n);
  return (sums.jpjm - self) / (nn * (nn - 1.0));
}

double correlation_E(const SpinMoments& m, std::span<const double> x) {
  return correlation_E(m, ModeFunctions(x));
}

double mean_inversion(const SpinMoments& m) {
  if (m.size() == 0) return 0.0;
  double sum = 0.0;
  for (double p : m.pop()) sum += p;
  return sum / static_cast<double>(m.size());
}

SpinStepper::SpinStepper(std::size_t n) : k1_(n), k2_(n), k3_(n), k4_(n), tmp_(n) {}

void SpinStepper::advance(SpinMoments& m, const ModeFunctions& mode, const SpinRates& rates,
                          double dt, int substeps, SpinScheme scheme) {
  const double h = dt / substeps;
  for (int s = 0; s < substeps; ++s) {
    if (scheme == SpinScheme::euler) {
      spin_rhs(m, mode, rates, k1_, sums_);
      m.axpy(h, k1_);
      continue;
    }
    spin_rhs(m, mode, rates, k1_, sums_);
    tmp_ = m;
    tmp_.axpy(0.5 * h, k1_);
    spin_rhs(tmp_, mode, rates, k2_, sums_);
    tmp_ = m;
    tmp_.axpy(0.5 * h, k2_);
    spin_rhs(tmp_, mode, rates, k3_, sums_);
    tmp_ = m;
    tmp_.axpy(h, k3_);
    spin_rhs(tmp_, mode, rates, k4_, sums_);
    m.axpy(h / 6.0, k1_);
    m.axpy(h / 3.0, k2_);
    m.axpy(h / 3.0, k3_);
    m.axpy(h / 6.0, k4_);
  }
}

ClampReport clamp_populations(SpinMoments& m, double tolerance) {
  ClampReport report;
  for (double p : m.pop()) {
    report.max_overshoot = std::max({report.max_overshoot, -p, p - 1.0});
  }
  if (report.max_overshoot > tolerance) {
    report.ok = false;
    return report;
  }
  for (double& p : m.pop()) p = std::clamp(p, 0.0, 1.0);
  return report;
}

}  // namespace cavcool
