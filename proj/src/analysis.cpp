#include "cavcool/analysis.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <limits>

namespace cavcool {

namespace {

struct LinearPart {
  double amplitude = 0.0;
  double asymptote = 0.0;
  double sse = std::numeric_limits<double>::infinity();
};

// For fixed R the model A e^{-R t} + C is linear in (A, C).
LinearPart solve_linear(const std::vector<double>& t, const std::vector<double>& y,
                        double t_ref, double rate) {
  double see = 0, se = 0, sey = 0, sy = 0;
  const double n = static_cast<double>(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double e = std::exp(-rate * (t[i] - t_ref));
    see += e * e;
    se += e;
    sey += e * y[i];
    sy += y[i];
  }
  const double det = see * n - se * se;
  LinearPart out;
  if (!(std::abs(det) > 1e-14 * see * n)) return out;
  out.amplitude = (sey * n - se * sy) / det;
  out.asymptote = (see * sy - se * sey) / det;
  double sse = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double r = y[i] - out.amplitude * std::exp(-rate * (t[i] - t_ref)) - out.asymptote;
    sse += r * r;
  }
  out.sse = sse;
  return out;
}

}  // namespace

FitResult fit_exponential(const std::vector<double>& t_all, const std::vector<double>& y_all,
                          double t0, double t1) {
  std::vector<double> t, y;
  for (std::size_t i = 0; i < t_all.size(); ++i) {
    if (t_all[i] >= t0 && t_all[i] <= t1 && std::isfinite(y_all[i])) {
      t.push_back(t_all[i]);
      y.push_back(y_all[i]);
    }
  }
  if (t.size() < 4) throw FitDegenerate("fewer than four samples in the fit window");
  const double span = t.back() - t.front();
  if (!(span > 0.0)) throw FitDegenerate("fit window has zero length");
  const double y_max = *std::max_element(y.begin(), y.end());
  const double y_min = *std::min_element(y.begin(), y.end());
  if (!(y_max - y_min > 1e-12 * std::max(1.0, std::abs(y_max)))) {
    throw FitDegenerate("series is constant");
  }

  const double t_ref = t.front();
  auto objective = [&](double log_rate) { return solve_linear(t, y, t_ref, std::exp(log_rate)).sse; };

  // Coarse log-spaced scan to bracket the global minimum, then Brent.
  const double lo = std::log(1e-3 / span);
  const double hi = std::log(1e3 / span);
  constexpr int kGrid = 241;
  int best = 0;
  double best_val = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kGrid; ++i) {
    const double v = objective(lo + (hi - lo) * i / (kGrid - 1));
    if (v < best_val) {
      best_val = v;
      best = i;
    }
  }
  const double step = (hi - lo) / (kGrid - 1);
  const double a = lo + step * std::max(0, best - 1);
  const double b = lo + step * std::min(kGrid - 1, best + 1);
  const auto [log_rate, sse] =
      boost::math::tools::brent_find_minima(objective, a, b, std::numeric_limits<double>::digits);
  (void)sse;

  const double rate = std::exp(log_rate);
  const LinearPart lin = solve_linear(t, y, t_ref, rate);
  FitResult fit;
  fit.rate = rate;
  fit.asymptote = lin.asymptote;
  // amplitude referred to t = 0
  fit.amplitude = lin.amplitude * std::exp(rate * t_ref);
  fit.rms_residual = std::sqrt(lin.sse / static_cast<double>(t.size()));
  fit.window_start = t.front();
  fit.window_end = t.back();
  if (best == 0 || best == kGrid - 1) {
    throw FitDegenerate("decay rate is not resolved by the sampled window");
  }
  if (!(lin.amplitude > 0.0) || !(y.front() > 2.0 * fit.asymptote)) {
    throw FitDegenerate("insufficient decay: initial value is not above twice the asymptote");
  }
  return fit;
}

FitResult fit_cooling_rate(const EnsembleSeries& series,
                           std::optional<std::pair<double, double>> window) {
  const auto& t = series.times;
  const auto& y = series.p2_mean;
  if (t.empty()) throw FitDegenerate("empty series");
  if (window) return fit_exponential(t, y, window->first, window->second);

  const FitResult full = fit_exponential(t, y, t.front(), t.back());
  const double target = full.asymptote + 0.1 * full.amplitude * std::exp(-full.rate * t.front());
  double t_cut = t.back();
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (y[i] <= target) {
      t_cut = t[i];
      break;
    }
  }
  try {
    return fit_exponential(t, y, t.front(), t_cut);
  } catch (const FitDegenerate&) {
    return full;
  }
}

namespace {

struct Cell {
  double observed = 0.0;
  double expected = 0.0;
};

// Merges neighbouring cells left to right until each holds >= 5 expected.
std::vector<Cell> merge_cells(const std::vector<Cell>& cells) {
  std::vector<Cell> out;
  Cell acc;
  for (const Cell& c : cells) {
    acc.observed += c.observed;
    acc.expected += c.expected;
    if (acc.expected >= 5.0) {
      out.push_back(acc);
      acc = Cell{};
    }
  }
  if (acc.expected > 0.0 || acc.observed > 0.0) {
    if (out.empty()) {
      out.push_back(acc);
    } else {
      out.back().observed += acc.observed;
      out.back().expected += acc.expected;
    }
  }
  return out;
}

double chi2_of(const std::vector<Cell>& cells) {
  double chi2 = 0.0;
  for (const Cell& c : cells) {
    const double d = c.observed - c.expected;
    chi2 += d * d / c.expected;
  }
  return chi2;
}

double upper_tail(double chi2, int dof) {
  if (dof < 1) return std::numeric_limits<double>::quiet_NaN();
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), chi2));
}

}  // namespace

ShapeVerdict shape_verdict(const MomentumHistogram& h, ShapeMode mode,
                           const ShapeOptions& options) {
  if (h.total < options.min_total) {
    throw InsufficientData("histogram holds " + std::to_string(h.total) + " samples, need " +
                           std::to_string(options.min_total));
  }
  ShapeVerdict v;
  const double n = static_cast<double>(h.total);
  v.second_moment = h.second_moment();
  v.excess_kurtosis = h.excess_kurtosis();
  v.kurtosis_z = v.excess_kurtosis / std::sqrt(24.0 / n);

  if (mode == ShapeMode::gaussian) {
    const double mean = h.mean();
    const double sd = std::sqrt(std::max(0.0, h.second_moment() - mean * mean));
    if (!(sd > 0.0)) throw InsufficientData("zero-variance histogram");
    const boost::math::normal law(mean, sd);
    std::vector<Cell> cells;
    cells.push_back({static_cast<double>(h.underflow), n * boost::math::cdf(law, h.lo)});
    for (int i = 0; i < h.bins(); ++i) {
      const double p = boost::math::cdf(law, h.edge(i + 1)) - boost::math::cdf(law, h.edge(i));
      cells.push_back({static_cast<double>(h.counts[i]), n * p});
    }
    cells.push_back(
        {static_cast<double>(h.overflow), n * boost::math::cdf(boost::math::complement(law, h.hi))});
    const auto merged = merge_cells(cells);
    v.chi2 = chi2_of(merged);
    v.dof = static_cast<int>(merged.size()) - 3;
    v.p_value = upper_tail(v.chi2, v.dof);
    const boost::math::normal unit;
    const double z_crit = boost::math::quantile(unit, 1.0 - options.significance / 2.0);
    v.pass = v.p_value >= options.significance && std::abs(v.kurtosis_z) <= z_crit;
    return v;
  }

  // uniform on [-1, 1]
  std::vector<Cell> inside;
  long long outside = h.underflow + h.overflow;
  double in_total = 0.0;
  for (int i = 0; i < h.bins(); ++i) {
    const double a = h.edge(i);
    const double b = h.edge(i + 1);
    if (a >= -1.0 - 1e-12 && b <= 1.0 + 1e-12) {
      inside.push_back({static_cast<double>(h.counts[i]), 0.0});
      in_total += static_cast<double>(h.counts[i]);
    }
    if (a >= 1.2 - 1e-12 || b <= -1.2 + 1e-12) outside += h.counts[i];
  }
  v.tail_mass = static_cast<double>(outside) / n;
  if (inside.size() < 2 || in_total <= 0.0) {
    v.pass = false;
    return v;
  }
  for (Cell& c : inside) c.expected = in_total / static_cast<double>(inside.size());
  const auto merged = merge_cells(inside);
  v.chi2 = chi2_of(merged);
  v.dof = static_cast<int>(merged.size()) - 1;
  v.p_value = upper_tail(v.chi2, v.dof);
  v.pass = v.p_value >= options.significance && v.tail_mass <= options.tail_limit;
  return v;
}

}  // namespace cavcool
