#include "cavcool/motion.hpp"

#include <algorithm>
#include <cmath>

namespace cavcool {

void real_correlation_matrix(const SpinMoments& m, Eigen::MatrixXd& out) {
  const std::size_t n = m.size();
  out.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const auto& coh = m.coh();
  std::size_t q = 0;
  for (std::size_t j = 0; j < n; ++j) {
    out(j, j) = m.pop()[j];
    for (std::size_t l = j + 1; l < n; ++l, ++q) {
      const double re = coh[q].real();
      out(j, l) = re;
      out(l, j) = re;
    }
  }
}

MotionCoefficients motion_coefficients(const PhysParams& params, const DerivedRates& rates) {
  MotionCoefficients coef;
  coef.gamma_c = rates.gamma_c;
  coef.eta = rates.eta;
  coef.recoil_diffusion = params.kprime_ratio * params.kprime_ratio * params.w * params.u2bar;
  return coef;
}

void drift_force(const ModeFunctions& mode, std::span<const double> p, const SpinMoments& m,
                 const CollectiveSums& sums, const Eigen::MatrixXd& re_corr,
                 const MotionCoefficients& coef, std::span<double> force) {
  const std::size_t n = m.size();
  Eigen::VectorXd u(static_cast<Eigen::Index>(n));
  for (std::size_t l = 0; l < n; ++l) u[l] = mode.sin[l] * p[l];
  const Eigen::VectorXd friction = re_corr.selfadjointView<Eigen::Upper>() * u;
  for (std::size_t j = 0; j < n; ++j) {
    const cplx s = sums.sjJm[j];
    force[j] = coef.gamma_c * mode.sin[j] * (s.imag() - s.real()) -
               coef.eta * coef.gamma_c * mode.sin[j] * friction[j];
  }
}

std::vector<double> drift_force(std::span<const double> x, std::span<const double> p,
                                const SpinMoments& m, const DerivedRates& rates,
                                const PhysParams& params) {
  const ModeFunctions mode(x);
  CollectiveSums sums;
  collective_sums(m, mode, sums);
  Eigen::MatrixXd re_corr;
  real_correlation_matrix(m, re_corr);
  std::vector<double> force(m.size());
  drift_force(mode, p, m, sums, re_corr, motion_coefficients(params, rates), force);
  return force;
}

void diffusion_matrix(const ModeFunctions& mode, const SpinMoments& m,
                      const Eigen::MatrixXd& re_corr, const MotionCoefficients& coef,
                      Eigen::MatrixXd& out) {
  const auto n = static_cast<Eigen::Index>(m.size());
  const Eigen::Map<const Eigen::VectorXd> s(mode.sin.data(), n);
  out = coef.gamma_c * (s.asDiagonal() * re_corr * s.asDiagonal());
  for (Eigen::Index j = 0; j < n; ++j) {
    out(j, j) += coef.recoil_diffusion * (1.0 - m.pop()[j]);
  }
}

Eigen::MatrixXd diffusion_matrix(std::span<const double> x, const SpinMoments& m,
                                 const DerivedRates& rates, const PhysParams& params) {
  Eigen::MatrixXd re_corr;
  real_correlation_matrix(m, re_corr);
  Eigen::MatrixXd out;
  diffusion_matrix(ModeFunctions(x), m, re_corr, motion_coefficients(params, rates), out);
  return out;
}

DiffusionFactor psd_project_and_factor(const Eigen::MatrixXd& d) {
  if (d.rows() != d.cols()) throw ContractViolation("diffusion matrix must be square");
  const double scale = std::max(1.0, d.cwiseAbs().maxCoeff());
  if ((d - d.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw ContractViolation("diffusion matrix must be symmetric");
  }
  DiffusionFactor f;
  f.d_raw = d;
  const auto n = d.rows();
  if (n == 0) return f;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(d);
  Eigen::VectorXd lambda = eig.eigenvalues();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (lambda[i] < 0.0) {
      f.clamped_mass += -lambda[i];
      lambda[i] = 0.0;
    }
  }
  const Eigen::MatrixXd& u = eig.eigenvectors();
  f.factor = u * lambda.cwiseSqrt().asDiagonal();
  f.d_psd = f.factor * f.factor.transpose();
  return f;
}

double noise_factor(const Eigen::MatrixXd& d, FactorMethod method, FactorWorkspace& ws,
                    Eigen::MatrixXd& factor) {
  const auto n = d.rows();
  if (n == 1) {
    factor.resize(1, 1);
    factor(0, 0) = std::sqrt(std::max(d(0, 0), 0.0));
    return std::max(-d(0, 0), 0.0);
  }
  if (method == FactorMethod::cholesky) {
    ws.llt.compute(d);
    if (ws.llt.info() == Eigen::Success) {
      factor = ws.llt.matrixL();
      return 0.0;
    }
  }
  ws.eig.compute(d);
  Eigen::VectorXd lambda = ws.eig.eigenvalues();
  double clamped = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (lambda[i] < 0.0) {
      clamped += -lambda[i];
      lambda[i] = 0.0;
    }
  }
  factor.noalias() = ws.eig.eigenvectors() * lambda.cwiseSqrt().asDiagonal();
  return clamped;
}

void sample_kick(const Eigen::MatrixXd& factor, double dt, Rng& rng, int refine,
                 Eigen::VectorXd& z, Eigen::VectorXd& kick) {
  const auto n = factor.cols();
  z.setZero(n);
  for (int r = 0; r < refine; ++r) {
    for (Eigen::Index i = 0; i < n; ++i) z[i] += rng.normal();
  }
  kick.noalias() = factor * z;
  kick *= std::sqrt(dt / refine);
}

Eigen::VectorXd sample_kick(const DiffusionFactor& f, double dt, Rng& rng, int refine) {
  if (!(dt > 0.0)) throw ContractViolation("sample_kick requires dt > 0");
  Eigen::VectorXd z, kick;
  sample_kick(f.factor, dt, rng, refine, z, kick);
  return kick;
}

}  // namespace cavcool
