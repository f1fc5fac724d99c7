#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

#include "cavcool/spin.hpp"

namespace cavcool {

// Exact Lindblad dynamics of the spin-only effective master equation for a
// handful of atoms at frozen positions. Dense 4^N x 4^N superoperator acting
// on column-stacked density matrices.

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

constexpr int kOracleMaxAtoms = 3;

struct LiouvillianSpec {
  double gamma_c = 0.0;
  double gamma_delta = 0.0;
  double w = 0.0;
  std::vector<double> positions;  // frozen kx_j
  int n_atoms() const { return static_cast<int>(positions.size()); }
};

// sigma_j^- on the 2^N-dimensional spin space (bit j set = atom j excited).
CMatrix lowering_operator(int n_atoms, int j);
CMatrix collective_lowering(const LiouvillianSpec& spec);

CMatrix build_generator(const LiouvillianSpec& spec);

struct SpinDensityMatrix {
  CMatrix rho;
  std::vector<double> positions;
};

struct SteadyStateResult {
  SpinDensityMatrix state;
  int null_multiplicity = 1;  // > 1 flags a degenerate steady state (e.g. w = 0, N >= 2)
  double residual = 0.0;      // max |generator * vec(rho)|
};

SteadyStateResult steady_state(const CMatrix& generator, const std::vector<double>& positions);

CVector vectorize(const CMatrix& rho);
CMatrix unvectorize(const CVector& v);

SpinMoments moments_from_rho(const CMatrix& rho);

// exp(generator * t) applied to rho0.
CMatrix evolve(const CMatrix& generator, const CMatrix& rho0, double t);

struct MomentDiscrepancy {
  std::string name;     // pop_j, coh_j_l.re, coh_j_l.im
  double exact = 0.0;   // steady state
  double cumulant = 0.0;
  double rel_error = 0.0;
  double max_abs_over_time = 0.0;
};

struct DiscrepancyReport {
  std::vector<MomentDiscrepancy> moments;
  double max_pointwise = 0.0;    // max over time and moments of |cumulant - exact|
  double max_steady_rel = 0.0;   // over populations and coherence magnitudes
};

struct CompareOptions {
  double t_final = 0.0;          // <= 0: 20 / (w + N Gamma_C)
  int samples = 200;
  double cumulant_dt = 0.0;      // <= 0: 1e-3 / (w + N Gamma_C)
};

// Integrates the cumulant equations and the exact generator from the
// all-ground state and compares them along the way and at steady state.
DiscrepancyReport compare_cumulant(const LiouvillianSpec& spec, const CompareOptions& options = {});

// Steady state of the cumulant equations at frozen positions, by integration
// until the derivative norm falls below `tolerance`.
SpinMoments cumulant_steady_state(const LiouvillianSpec& spec, double tolerance = 1e-13);

}  // namespace cavcool
