#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "cbi/verdict.hpp"

namespace cbi::numerics {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Adaptive Gauss-Kronrod (15 point) on a finite interval.
///
/// The interval is mapped onto [0, 1] first: Boost's error estimate is not
/// scale invariant and never converges on very short intervals otherwise.
template <class F>
double integrate(F&& f, double a, double b, double rel_tol = 1e-10,
                 unsigned max_depth = 18) {
  if (a == b) return 0.0;
  const double w = b - a;
  auto g = [&f, a, w](double t) { return w * f(a + w * t); };
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
      g, 0.0, 1.0, max_depth, rel_tol, &err);
}

/// Adaptive quadrature of f over [a, b] (0 < a <= b) in the variable s = log x.
template <class F>
double integrate_log(F&& f, double a, double b, double rel_tol = 1e-10) {
  if (!(a > 0.0) || b < a) throw std::domain_error("integrate_log: need 0 < a <= b");
  if (a == b) return 0.0;
  auto g = [&f](double s) {
    const double x = std::exp(s);
    return f(x) * x;
  };
  return integrate(g, std::log(a), std::log(b), rel_tol);
}

/// Fixed 20-point Gauss-Legendre rule in log variable. Smooth in its endpoints,
/// which matters when the result feeds an outer adaptive quadrature.
template <class F>
double fixed_log(F&& f, double a, double b) {
  if (a == b) return 0.0;
  const double sign = a < b ? 1.0 : -1.0;
  const double lo = std::log(std::min(a, b));
  const double hi = std::log(std::max(a, b));
  auto g = [&f](double s) {
    const double x = std::exp(s);
    return f(x) * x;
  };
  return sign * boost::math::quadrature::gauss<double, 20>::integrate(g, lo, hi);
}

// ---------------------------------------------------------------------------
// Geometric panel series for improper integrals.

enum class Convergence { Finite, Infinite, Inconclusive };

inline const char* to_string(Convergence c) {
  switch (c) {
    case Convergence::Finite: return "Finite";
    case Convergence::Infinite: return "Infinite";
    case Convergence::Inconclusive: return "Inconclusive";
  }
  return "Inconclusive";
}

enum class Direction { Up, Down };

struct PanelOptions {
  int max_panels = 1100;
  int window = 10;
  /// Largest panel ratio accepted as geometric decay inside the window.
  double max_ratio = 0.999;
  /// Extrapolated tail must be below this fraction of the accumulated sum.
  double tail_rel_tol = 1e-6;
  double divergence_sum = 1e12;
  /// Flat or growing contributions only count as divergence past this panel.
  int min_panels_for_flat = 40;
  /// Relative slack when testing contributions for "non-decreasing".
  double flat_slack = 1e-9;
};

struct SeriesResult {
  Convergence status = Convergence::Inconclusive;
  double sum = 0.0;
  double tail = 0.0;  // geometric extrapolation of what is left
  int panels = 0;
  double max_window_ratio = 0.0;
  Evidence evidence;

  /// Accumulated sum plus the geometric tail extrapolation (zero when the
  /// last window was not decaying).
  double value() const {
    return status == Convergence::Infinite ? kInf : sum + tail;
  }
};

/// Sums panel contributions over [a 2^k, a 2^{k+1}] (Up) or
/// [a 2^{-k-1}, a 2^{-k}] (Down) and classifies the series.
///
/// `panel(lo, hi)` must return the integral over [lo, hi]; it is called with
/// consecutive panels in order, so callers may carry state between calls.
template <class PanelFn>
SeriesResult panel_series(PanelFn&& panel, double anchor, Direction dir,
                          const PanelOptions& opt = {}) {
  if (!(anchor > 0.0) || !std::isfinite(anchor)) {
    throw std::domain_error("panel_series: anchor must be positive and finite");
  }
  SeriesResult res;
  std::vector<double> contrib;
  contrib.reserve(static_cast<std::size_t>(opt.max_panels));
  int next_checkpoint = 10;

  auto finish = [&](Convergence status, const std::string& why) {
    res.status = status;
    res.panels = static_cast<int>(contrib.size());
    res.evidence.add("panels", res.panels);
    res.evidence.add("partial_sum", res.sum);
    if (!contrib.empty()) res.evidence.add("last_panel", contrib.back());
    if (status == Convergence::Finite) res.evidence.add("tail_estimate", res.tail);
    res.evidence.note(why);
    return res;
  };

  double lo = dir == Direction::Up ? anchor : anchor * 0.5;
  double hi = dir == Direction::Up ? anchor * 2.0 : anchor;
  for (int k = 0; k < opt.max_panels; ++k) {
    if (hi > 1e300 || lo < 1e-300) break;
    const double c = panel(lo, hi);
    if (std::isnan(c)) {
      return finish(Convergence::Inconclusive, "panel integral is NaN");
    }
    if (c < 0.0) {
      return finish(Convergence::Inconclusive, "negative panel contribution");
    }
    // A sudden exact zero is usually under/overflow inside the integrand,
    // which only vouches for convergence if the decay was already fast.
    if (c == 0.0 && !contrib.empty() && contrib.back() > 0.0) {
      const std::size_t m = contrib.size();
      const double r = m >= 2 && contrib[m - 2] > 0.0 ? contrib[m - 1] / contrib[m - 2] : 0.0;
      if (r <= 0.5) {
        contrib.push_back(c);
        res.tail = 0.0;
        res.evidence.add("max_ratio", r);
        return finish(Convergence::Finite, "panel contributions underflowed after rapid decay");
      }
      res.evidence.add("last_ratio", r);
      return finish(Convergence::Inconclusive, "panel contribution vanished while decay was slow");
    }
    contrib.push_back(c);
    res.sum += c;
    if (static_cast<int>(contrib.size()) == next_checkpoint) {
      res.evidence.add("sum@" + std::to_string(next_checkpoint), res.sum);
      next_checkpoint *= 2;
    }
    if (!(res.sum <= opt.divergence_sum)) {
      return finish(Convergence::Infinite, "running sum exceeds divergence threshold");
    }
    const int n = static_cast<int>(contrib.size());
    if (n >= opt.window) {
      bool decaying = true;
      bool flat_or_growing = true;
      double rmax = 0.0;
      for (int j = n - opt.window; j + 1 < n; ++j) {
        const double prev = contrib[static_cast<std::size_t>(j)];
        const double cur = contrib[static_cast<std::size_t>(j) + 1];
        const double r = prev > 0.0 ? cur / prev : (cur > 0.0 ? kInf : 0.0);
        rmax = std::max(rmax, r);
        if (!(r < 1.0)) decaying = false;
        if (cur < prev * (1.0 - opt.flat_slack)) flat_or_growing = false;
      }
      res.max_window_ratio = rmax;
      res.tail = decaying ? contrib.back() * rmax / (1.0 - rmax) : 0.0;
      if (decaying && rmax <= opt.max_ratio) {
        const double tail = res.tail;
        if (tail <= opt.tail_rel_tol * res.sum || res.sum == 0.0) {
          res.evidence.add("max_ratio", rmax);
          return finish(Convergence::Finite, "geometric decay of panel contributions");
        }
      }
      if (flat_or_growing && n >= opt.min_panels_for_flat && contrib.back() > 0.0) {
        res.evidence.add("max_ratio", rmax);
        return finish(Convergence::Infinite, "panel contributions non-decreasing");
      }
    }
    if (dir == Direction::Up) {
      lo = hi;
      hi *= 2.0;
    } else {
      hi = lo;
      lo *= 0.5;
    }
  }
  res.evidence.add("max_ratio", res.max_window_ratio);
  return finish(Convergence::Inconclusive, "panel budget exhausted without a decision");
}

/// Plain function-integrand form of `panel_series`.
template <class F>
SeriesResult improper_integral(F&& f, double anchor, Direction dir,
                               const PanelOptions& opt = {},
                               double panel_rel_tol = 1e-9) {
  auto panel = [&](double lo, double hi) {
    return integrate(f, lo, hi, panel_rel_tol);
  };
  return panel_series(panel, anchor, dir, opt);
}

// ---------------------------------------------------------------------------
// Root finding.

/// Root of a monotone function on a bracket [lo, hi] with h(lo), h(hi) of
/// opposite sign; stops when the bracket is narrower than abs_tol.
template <class H>
double bracketed_root(H&& h, double lo, double hi, double abs_tol,
                      std::uintmax_t max_iter = 200) {
  double flo = h(lo);
  double fhi = h(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0)) {
    throw std::runtime_error("bracketed_root: root not bracketed");
  }
  auto tol = [abs_tol](double a, double b) { return std::fabs(a - b) <= abs_tol; };
  std::uintmax_t iters = max_iter;
  const auto r = boost::math::tools::toms748_solve(h, lo, hi, flo, fhi, tol, iters);
  return 0.5 * (r.first + r.second);
}

// ---------------------------------------------------------------------------
// Small helpers.

/// Least-squares slope of y on x, with its standard error.
struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double residual_rms = 0.0;
};

inline LinearFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("least_squares: need at least two paired points");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("least_squares: degenerate abscissae");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ssr = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (fit.intercept + fit.slope * x[i]);
    ssr += e * e;
  }
  fit.residual_rms = std::sqrt(ssr / n);
  if (x.size() > 2) fit.slope_stderr = std::sqrt(ssr / (n - 2.0) / sxx);
  return fit;
}

/// n points log-spaced on [a, b], endpoints included.
inline std::vector<double> logspace(double a, double b, int n) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n));
  const double la = std::log(a), lb = std::log(b);
  for (int i = 0; i < n; ++i) {
    out.push_back(std::exp(la + (lb - la) * i / (n - 1)));
  }
  out.front() = a;
  out.back() = b;
  return out;
}

}  // namespace cbi::numerics
