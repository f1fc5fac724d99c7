#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cavcool {

// Units: hbar = 1, k = 1 (cavity wavenumber), m = 1 / (2 omega_r).
// Momenta are in hbar*k, lengths in 1/k, all rates share one frequency unit.

class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PhysParams {
  int n_atoms = 1;
  double kappa = 200.0;
  double delta = 100.0;
  // Exactly one of gamma_c / g is an input; the other follows from it.
  std::optional<double> gamma_c;
  std::optional<double> g;
  double w = 0.15;
  double omega_r = 0.25;
  double kprime_ratio = 0.0;
  double u2bar = 0.4;
};

struct DerivedRates {
  double gamma_c = 0.0;
  double gamma_delta = 0.0;
  double eta = 0.0;
  double mass = 0.0;
  double g = 0.0;
};

DerivedRates derive_rates(const PhysParams& params);

struct SingleAtomReference {
  double population = 0.0;  // <sigma+ sigma-> = w / (w + Gamma_C cos^2 kx)
  double alpha = 0.0;       // friction coefficient
  double diffusion = 0.0;   // momentum diffusion D
  double kT = 0.0;          // D / (2 m alpha); hbar*kappa/4 wherever defined
  double rate_s = 0.0;      // eta * Gamma_C * population
  bool degenerate_position = false;  // sin(kx) == 0
};

SingleAtomReference single_atom_reference(const PhysParams& params, double x);

// Position-averaged single-atom steady population, <w / (w + Gamma_C cos^2 kx)>_x.
double averaged_single_atom_population(double w, double gamma_c);

enum class RunKind { motion, spin_only };

// Returns timescale warnings. Throws ConfigError when delta != kappa/2 and
// motion is simulated.
std::vector<std::string> validate_timescales(const PhysParams& params, RunKind kind);

}  // namespace cavcool
