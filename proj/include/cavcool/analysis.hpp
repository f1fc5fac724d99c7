#pragma once

#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "cavcool/ensemble.hpp"

namespace cavcool {

class FitDegenerate : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FitResult {
  double rate = 0.0;        // R
  double asymptote = 0.0;   // C
  double amplitude = 0.0;   // A
  double rms_residual = 0.0;
  double window_start = 0.0;
  double window_end = 0.0;
};

// Least-squares fit of y(t) = A exp(-R t) + C on samples inside [t0, t1].
// A and C are solved linearly for each R; R is found by a bracketed Brent
// search on log R.
FitResult fit_exponential(const std::vector<double>& t, const std::vector<double>& y,
                          double t0, double t1);

// Cooling-rate fit. Without an explicit window the series is fitted once over
// its full span, then refitted on [t_first, t*] where t* is the first time the
// data reach C + 0.1 A.
FitResult fit_cooling_rate(const EnsembleSeries& series,
                           std::optional<std::pair<double, double>> window = std::nullopt);

enum class ShapeMode { gaussian, uniform };

class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ShapeVerdict {
  double chi2 = 0.0;
  int dof = 0;
  double p_value = 0.0;
  double excess_kurtosis = 0.0;
  double kurtosis_z = 0.0;       // excess kurtosis / sqrt(24 / n)
  double tail_mass = 0.0;        // uniform mode: fraction with |p| > 1.2
  double second_moment = 0.0;
  bool pass = false;
};

struct ShapeOptions {
  double significance = 0.01;
  double tail_limit = 0.01;      // uniform mode: allowed mass outside [-1.2, 1.2]
  long long min_total = 1000;
};

// gaussian: chi-square against a normal with the sample mean and variance
// (cells merged to >= 5 expected) and a kurtosis z-test; both must pass.
// uniform: chi-square for flatness across the bins lying inside [-1, 1], plus
// the tail-mass limit outside [-1.2, 1.2].
ShapeVerdict shape_verdict(const MomentumHistogram& h, ShapeMode mode,
                           const ShapeOptions& options = {});

}  // namespace cavcool
