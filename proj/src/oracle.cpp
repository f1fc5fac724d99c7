#include "cavcool/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <unsupported/Eigen/MatrixFunctions>

namespace cavcool {

namespace {

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// Superoperator of O rho O^dag - (O^dag O rho + rho O^dag O) / 2.
CMatrix dissipator(const CMatrix& op) {
  const auto d = op.rows();
  const CMatrix id = CMatrix::Identity(d, d);
  const CMatrix odo = op.adjoint() * op;
  return kron(op.conjugate(), op) - 0.5 * kron(id, odo) - 0.5 * kron(odo.transpose(), id);
}

void check_capacity(int n) {
  if (n < 1) throw std::invalid_argument("oracle needs at least one atom");
  if (n > kOracleMaxAtoms) {
    throw CapacityError("exact oracle is limited to " + std::to_string(kOracleMaxAtoms) +
                        " atoms (requested " + std::to_string(n) + ")");
  }
}

double rate_scale(const LiouvillianSpec& spec) {
  return spec.w + spec.n_atoms() * spec.gamma_c;
}

}  // namespace

CMatrix lowering_operator(int n_atoms, int j) {
  const Eigen::Index dim = Eigen::Index{1} << n_atoms;
  CMatrix op = CMatrix::Zero(dim, dim);
  for (Eigen::Index s = 0; s < dim; ++s) {
    if (s & (Eigen::Index{1} << j)) op(s & ~(Eigen::Index{1} << j), s) = 1.0;
  }
  return op;
}

CMatrix collective_lowering(const LiouvillianSpec& spec) {
  const int n = spec.n_atoms();
  const Eigen::Index dim = Eigen::Index{1} << n;
  CMatrix jm = CMatrix::Zero(dim, dim);
  for (int j = 0; j < n; ++j) jm += std::cos(spec.positions[j]) * lowering_operator(n, j);
  return jm;
}

CMatrix build_generator(const LiouvillianSpec& spec) {
  const int n = spec.n_atoms();
  check_capacity(n);
  const Eigen::Index dim = Eigen::Index{1} << n;
  const CMatrix id = CMatrix::Identity(dim, dim);
  const CMatrix jm = collective_lowering(spec);
  const CMatrix h = -0.5 * spec.gamma_delta * (jm.adjoint() * jm);
  const std::complex<double> i_unit{0.0, 1.0};
  CMatrix gen = -i_unit * (kron(id, h) - kron(h.transpose(), id));
  gen += spec.gamma_c * dissipator(jm);
  for (int j = 0; j < n; ++j) gen += spec.w * dissipator(lowering_operator(n, j).adjoint());
  return gen;
}

CVector vectorize(const CMatrix& rho) {
  return Eigen::Map<const CVector>(rho.data(), rho.size());
}

CMatrix unvectorize(const CVector& v) {
  const auto dim = static_cast<Eigen::Index>(std::lround(std::sqrt(static_cast<double>(v.size()))));
  return Eigen::Map<const CMatrix>(v.data(), dim, dim);
}

SteadyStateResult steady_state(const CMatrix& generator, const std::vector<double>& positions) {
  Eigen::JacobiSVD<CMatrix> svd(generator, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double tol = 1e-9 * std::max(sv[0], 1e-300);
  SteadyStateResult out;
  out.null_multiplicity = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] <= tol) ++out.null_multiplicity;
  out.null_multiplicity = std::max(out.null_multiplicity, 1);

  CMatrix rho = unvectorize(svd.matrixV().col(sv.size() - 1));
  rho /= rho.trace();
  rho = 0.5 * (rho + rho.adjoint()).eval();
  out.state.rho = rho;
  out.state.positions = positions;
  out.residual = (generator * vectorize(rho)).cwiseAbs().maxCoeff();
  return out;
}

SpinMoments moments_from_rho(const CMatrix& rho) {
  const auto dim = rho.rows();
  int n = 0;
  while ((Eigen::Index{1} << n) < dim) ++n;
  SpinMoments m(static_cast<std::size_t>(n));
  std::vector<CMatrix> lower;
  for (int j = 0; j < n; ++j) lower.push_back(lowering_operator(n, j));
  for (int j = 0; j < n; ++j) {
    for (int l = j; l < n; ++l) {
      // <s_j+ s_l-> = Tr(rho s_j+ s_l-)
      const std::complex<double> value = (rho * lower[j].adjoint() * lower[l]).trace();
      m.set_pair(j, l, value);
    }
  }
  return m;
}

CMatrix evolve(const CMatrix& generator, const CMatrix& rho0, double t) {
  const CMatrix prop = (generator * t).exp();
  return unvectorize(prop * vectorize(rho0));
}

namespace {

SpinRates spin_rates_of(const LiouvillianSpec& spec) {
  return {spec.gamma_c, spec.gamma_delta, spec.w};
}

}  // namespace

SpinMoments cumulant_steady_state(const LiouvillianSpec& spec, double tolerance) {
  const std::size_t n = spec.positions.size();
  const ModeFunctions mode(spec.positions);
  const SpinRates rates = spin_rates_of(spec);
  SpinMoments m(n);
  SpinMoments deriv(n);
  CollectiveSums sums;
  SpinStepper stepper(n);
  const double h = 0.02 / rate_scale(spec);
  const double t_max = 1e5 / rate_scale(spec);
  for (double t = 0.0; t < t_max; t += 100 * h) {
    stepper.advance(m, mode, rates, 100 * h, 100, SpinScheme::rk4);
    spin_rhs(m, mode, rates, deriv, sums);
    double norm = 0.0;
    for (double v : deriv.pop()) norm = std::max(norm, std::abs(v));
    for (const cplx& v : deriv.coh()) norm = std::max(norm, std::abs(v));
    if (norm < tolerance * rate_scale(spec)) break;
  }
  return m;
}

constexpr double kZeroMoment = 1e-9;

DiscrepancyReport compare_cumulant(const LiouvillianSpec& spec, const CompareOptions& options) {
  const int n = spec.n_atoms();
  check_capacity(n);
  const double scale = rate_scale(spec);
  const double t_final = options.t_final > 0.0 ? options.t_final : 20.0 / scale;
  const double dt_target = options.cumulant_dt > 0.0 ? options.cumulant_dt : 1e-3 / scale;
  const int samples = std::max(1, options.samples);
  const double interval = t_final / samples;
  const int sub = std::max(1, static_cast<int>(std::ceil(interval / dt_target)));

  const CMatrix gen = build_generator(spec);
  const Eigen::Index dim = Eigen::Index{1} << n;
  CMatrix rho = CMatrix::Zero(dim, dim);
  rho(0, 0) = 1.0;
  const CMatrix prop = (gen * interval).exp();

  const ModeFunctions mode(spec.positions);
  const SpinRates rates = spin_rates_of(spec);
  SpinMoments cum(static_cast<std::size_t>(n));
  SpinStepper stepper(static_cast<std::size_t>(n));

  DiscrepancyReport report;
  std::vector<double> max_abs;
  auto compare_now = [&]() {
    const SpinMoments exact = moments_from_rho(rho);
    std::size_t k = 0;
    if (max_abs.empty()) max_abs.assign(static_cast<std::size_t>(n * n), 0.0);
    for (int j = 0; j < n; ++j) {
      for (int l = j; l < n; ++l, ++k) {
        const double d = std::abs(cum.pair(j, l) - exact.pair(j, l));
        max_abs[k] = std::max(max_abs[k], d);
        report.max_pointwise = std::max(report.max_pointwise, d);
      }
    }
  };
  compare_now();
  for (int s = 0; s < samples; ++s) {
    rho = unvectorize(prop * vectorize(rho));
    stepper.advance(cum, mode, rates, interval, sub, SpinScheme::rk4);
    compare_now();
  }

  const SteadyStateResult exact_ss = steady_state(gen, spec.positions);
  const SpinMoments ex = moments_from_rho(exact_ss.state.rho);
  const SpinMoments cs = cumulant_steady_state(spec);
  std::size_t k = 0;
  for (int j = 0; j < n; ++j) {
    for (int l = j; l < n; ++l, ++k) {
      const cplx e = ex.pair(j, l);
      const cplx c = cs.pair(j, l);
      // Moments are O(1); an exact value below kZeroMoment counts as zero and
      // the difference is then measured against that floor.
      const double rel = std::abs(c - e) / std::max(std::abs(e), kZeroMoment);
      report.max_steady_rel = std::max(report.max_steady_rel, rel);
      const std::string base = "_" + std::to_string(j) + (j == l ? "" : "_" + std::to_string(l));
      if (j == l) {
        report.moments.push_back({"pop" + base, e.real(), c.real(), rel, max_abs[k]});
      } else {
        report.moments.push_back({"coh" + base + ".re", e.real(), c.real(), rel, max_abs[k]});
        report.moments.push_back({"coh" + base + ".im", e.imag(), c.imag(), rel, max_abs[k]});
      }
    }
  }
  return report;
}

}  // namespace cavcool
