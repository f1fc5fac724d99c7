#pragma once

#include "cavcool/params.hpp"

namespace cavtest {

// Base parameters shared by the single-atom and ensemble examples.
inline cavcool::PhysParams base_params(int n_atoms = 1, double w = 0.15) {
  cavcool::PhysParams p;
  p.n_atoms = n_atoms;
  p.kappa = 200.0;
  p.delta = 100.0;
  p.gamma_c = 0.1;
  p.omega_r = 0.25;
  p.w = w;
  return p;
}

}  // namespace cavtest
