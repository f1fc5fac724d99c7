#pragma once

#include <Eigen/Dense>
#include <span>
#include <stdexcept>
#include <vector>

#include "cavcool/params.hpp"
#include "cavcool/rng.hpp"
#include "cavcool/spin.hpp"

namespace cavcool {

class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Re <s_j+ s_l-> as a dense symmetric matrix with populations on the diagonal.
// Both the friction and the cavity part of the diffusion are built from it.
void real_correlation_matrix(const SpinMoments& m, Eigen::MatrixXd& out);

struct MotionCoefficients {
  double gamma_c = 0.0;
  double eta = 0.0;
  double recoil_diffusion = 0.0;  // k'^2 * w * u2bar  (hbar = k = 1)
};

MotionCoefficients motion_coefficients(const PhysParams& params, const DerivedRates& rates);

// Semiclassical drift force on every atom (conservative part plus friction).
void drift_force(const ModeFunctions& mode, std::span<const double> p, const SpinMoments& m,
                 const CollectiveSums& sums, const Eigen::MatrixXd& re_corr,
                 const MotionCoefficients& coef, std::span<double> force);
std::vector<double> drift_force(std::span<const double> x, std::span<const double> p,
                                const SpinMoments& m, const DerivedRates& rates,
                                const PhysParams& params);

// Momentum diffusion matrix D (hbar^2 k^2 per unit time).
void diffusion_matrix(const ModeFunctions& mode, const SpinMoments& m,
                      const Eigen::MatrixXd& re_corr, const MotionCoefficients& coef,
                      Eigen::MatrixXd& out);
Eigen::MatrixXd diffusion_matrix(std::span<const double> x, const SpinMoments& m,
                                 const DerivedRates& rates, const PhysParams& params);

struct DiffusionFactor {
  Eigen::MatrixXd d_raw;
  Eigen::MatrixXd d_psd;
  Eigen::MatrixXd factor;  // factor * factor^T == d_psd
  double clamped_mass = 0.0;
};

// Eigenvalue clamping onto the PSD cone; factor = U sqrt(Lambda_+).
DiffusionFactor psd_project_and_factor(const Eigen::MatrixXd& d);

// Factorization used while stepping. `cholesky` takes LLT when D is positive
// definite and falls back to eigenvalue clamping otherwise.
enum class FactorMethod { cholesky, eigen };

struct FactorWorkspace {
  Eigen::LLT<Eigen::MatrixXd> llt;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
};

// Writes L with L L^T = D (PSD-projected if needed); returns the clamped mass.
double noise_factor(const Eigen::MatrixXd& d, FactorMethod method, FactorWorkspace& ws,
                    Eigen::MatrixXd& factor);

// Correlated momentum kick sqrt(dt) * L z. With refine > 1 the standard normal
// vector is the normalised sum of `refine` independent draws, which reproduces
// the Brownian increment a run with dt/refine would see over the same interval.
Eigen::VectorXd sample_kick(const DiffusionFactor& f, double dt, Rng& rng, int refine = 1);
void sample_kick(const Eigen::MatrixXd& factor, double dt, Rng& rng, int refine,
                 Eigen::VectorXd& z, Eigen::VectorXd& kick);

}  // namespace cavcool
