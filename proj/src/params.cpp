#include "cavcool/params.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace cavcool {

namespace {

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    std::ostringstream msg;
    msg << name << " must be a positive finite number (got " << value << ")";
    throw InvalidParameter(msg.str());
  }
}

}  // namespace

DerivedRates derive_rates(const PhysParams& params) {
  require_positive(params.kappa, "kappa");
  require_positive(params.delta, "delta");
  require_positive(params.omega_r, "omega_r");
  if (params.n_atoms < 1) throw InvalidParameter("n_atoms must be >= 1");
  if (params.gamma_c.has_value() == params.g.has_value()) {
    throw InvalidParameter("exactly one of gamma_c and g must be given");
  }
  if (params.kprime_ratio < 0.0 || !std::isfinite(params.kprime_ratio)) {
    throw InvalidParameter("kprime_ratio must be >= 0");
  }
  if (params.u2bar < 0.0 || params.u2bar > 1.0) {
    throw InvalidParameter("u2bar must lie in [0, 1]");
  }
  if (params.w < 0.0 || !std::isfinite(params.w)) {
    throw InvalidParameter("w must be >= 0");
  }

  const double lorentz = params.kappa * params.kappa / 4.0 + params.delta * params.delta;
  DerivedRates rates;
  if (params.gamma_c) {
    require_positive(*params.gamma_c, "gamma_c");
    rates.gamma_c = *params.gamma_c;
    rates.g = std::sqrt(rates.gamma_c * lorentz / (params.kappa / 4.0));
  } else {
    require_positive(*params.g, "g");
    rates.g = *params.g;
    rates.gamma_c = rates.g * rates.g * (params.kappa / 4.0) / lorentz;
  }
  rates.gamma_delta = rates.g * rates.g * (params.delta / 2.0) / lorentz;
  rates.eta = 4.0 * params.omega_r * params.delta / lorentz;
  rates.mass = 1.0 / (2.0 * params.omega_r);
  return rates;
}

SingleAtomReference single_atom_reference(const PhysParams& params, double x) {
  const DerivedRates rates = derive_rates(params);
  const double c = std::cos(x);
  const double s = std::sin(x);
  SingleAtomReference ref;
  ref.population = params.w / (params.w + rates.gamma_c * c * c);
  ref.alpha = rates.eta * rates.gamma_c * s * s * ref.population;
  ref.diffusion = rates.gamma_c * s * s * ref.population;
  ref.rate_s = rates.eta * rates.gamma_c * ref.population;
  if (ref.alpha > 0.0) {
    ref.kT = ref.diffusion / (2.0 * rates.mass * ref.alpha);
  } else {
    ref.kT = params.kappa / 4.0;
    ref.degenerate_position = true;
  }
  return ref;
}

double averaged_single_atom_population(double w, double gamma_c) {
  // <w / (w + G cos^2)> over a period has the closed form sqrt(w / (w + G)).
  if (w <= 0.0) return 0.0;
  return std::sqrt(w / (w + gamma_c));
}

std::vector<std::string> validate_timescales(const PhysParams& params, RunKind kind) {
  const DerivedRates rates = derive_rates(params);
  std::vector<std::string> warnings;
  const double n = static_cast<double>(params.n_atoms);
  // Atomic rates that the cavity must outpace. The photon-number-weighted
  // coupling sqrt(N*nbar)*g is below N*Gamma_C whenever nbar << 1.
  const double slowest_allowed = std::max(params.w, n * rates.gamma_c);
  if (params.kappa < 10.0 * slowest_allowed) {
    std::ostringstream msg;
    msg << "kappa = " << params.kappa << " is not >> max(w, N*Gamma_C) = "
        << slowest_allowed << "; adiabatic elimination of the cavity is questionable";
    warnings.push_back(msg.str());
  }
  const bool on_resonance_condition =
      std::abs(params.delta - params.kappa / 2.0) <= 1e-12 * params.kappa;
  if (!on_resonance_condition) {
    std::ostringstream msg;
    msg << "delta = " << params.delta << " differs from kappa/2 = " << params.kappa / 2.0
        << "; the motional equations hold only at delta = kappa/2";
    if (kind == RunKind::motion) throw ConfigError(msg.str());
    warnings.push_back(msg.str());
  }
  return warnings;
}

}  // namespace cavcool
