#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "cavcool/params.hpp"

namespace cavcool {

using cplx = std::complex<double>;

// cos(kx_j) and sin(kx_j) for every atom; the only way positions enter the
// spin and force equations.
struct ModeFunctions {
  std::vector<double> cos;
  std::vector<double> sin;

  ModeFunctions() = default;
  explicit ModeFunctions(std::span<const double> x);
  void update(std::span<const double> x);
  std::size_t size() const { return cos.size(); }
};

// Second-order cumulant state: populations <s_j+ s_j-> and the strictly upper
// triangle of coherences <s_j+ s_l->, j < l, packed row-major. The lower
// triangle is the complex conjugate and is never stored.
class SpinMoments {
 public:
  SpinMoments() = default;
  explicit SpinMoments(std::size_t n) : pop_(n, 0.0), coh_(n * (n - 1) / 2) {}

  std::size_t size() const { return pop_.size(); }

  std::vector<double>& pop() { return pop_; }
  const std::vector<double>& pop() const { return pop_; }
  std::vector<cplx>& coh() { return coh_; }
  const std::vector<cplx>& coh() const { return coh_; }

  std::size_t pair_index(std::size_t j, std::size_t l) const {
    // requires j < l
    const std::size_t n = pop_.size();
    return j * (2 * n - j - 1) / 2 + (l - j - 1);
  }

  // <s_j+ s_l-> for any j, l (population on the diagonal).
  cplx pair(std::size_t j, std::size_t l) const {
    if (j == l) return pop_[j];
    if (j < l) return coh_[pair_index(j, l)];
    return std::conj(coh_[pair_index(l, j)]);
  }
  void set_pair(std::size_t j, std::size_t l, cplx value);

  void set_zero();
  // this += a * other
  void axpy(double a, const SpinMoments& other);
  bool all_finite() const;

 private:
  std::vector<double> pop_;
  std::vector<cplx> coh_;
};

struct CollectiveSums {
  std::vector<cplx> sjJm;  // <s_j+ J->
  double jpjm = 0.0;       // <J+ J->
};

void collective_sums(const SpinMoments& m, const ModeFunctions& mode, CollectiveSums& out);
CollectiveSums collective_sums(const SpinMoments& m, std::span<const double> x);

struct SpinRates {
  double gamma_c = 0.0;
  double gamma_delta = 0.0;
  double w = 0.0;
};

// Time derivative of the closed second-order cumulant equations. `sums` is
// scratch space reused between calls.
void spin_rhs(const SpinMoments& m, const ModeFunctions& mode, const SpinRates& rates,
              SpinMoments& deriv, CollectiveSums& sums);
SpinMoments spin_rhs(const SpinMoments& m, std::span<const double> x, const SpinRates& rates);

class UndefinedObservable : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Averaged pair correlation (<J+J-> - sum_j pop_j cos^2 kx_j) / (N(N-1)).
double correlation_E(const SpinMoments& m, const ModeFunctions& mode);
double correlation_E(const SpinMoments& m, std::span<const double> x);

double mean_inversion(const SpinMoments& m);

// Fixed-step integrator for the spin equations at frozen positions.
enum class SpinScheme { rk4, euler };

class SpinStepper {
 public:
  explicit SpinStepper(std::size_t n);
  void advance(SpinMoments& m, const ModeFunctions& mode, const SpinRates& rates, double dt,
               int substeps, SpinScheme scheme);

 private:
  SpinMoments k1_, k2_, k3_, k4_, tmp_;
  CollectiveSums sums_;
};

struct ClampReport {
  double max_overshoot = 0.0;
  bool ok = true;
};

// Clamps populations into [0, 1] when the overshoot is below `tolerance`;
// larger overshoot leaves the state untouched and reports ok = false.
ClampReport clamp_populations(SpinMoments& m, double tolerance = 1e-6);

}  // namespace cavcool
