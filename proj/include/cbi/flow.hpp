#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <variant>

#include "cbi/mechanisms.hpp"
#include "cbi/numerics.hpp"

namespace cbi {

/// Flow of the branching mechanism: v_t(lambda) solving dv/dt = -Psi(v) from
/// lambda, and v_t started from +infinity.
///
/// Built-in families use closed forms. Custom mechanisms are handled by
/// inverting the travel time t = integral dq / Psi(q) (no ODE stepping), with
/// bracketing root-finding in a logarithmic parametrisation of v.
class FlowSolver {
 public:
  explicit FlowSolver(BranchingMechanism psi, double quad_tol = 1e-10, double root_tol = 1e-10,
                      double v_cap = 1e300)
      : psi_(std::move(psi)), quad_tol_(quad_tol), root_tol_(root_tol), v_cap_(v_cap) {
    if (!(quad_tol_ > 0.0 && quad_tol_ <= 1e-4)) throw std::domain_error("quad_tol must lie in (0, 1e-4]");
    if (!(root_tol_ > 0.0 && root_tol_ <= 1e-4)) throw std::domain_error("root_tol must lie in (0, 1e-4]");
    if (!(v_cap_ > 1.0)) throw std::domain_error("v_cap must exceed 1");
    root_ = psi_.largest_root();
    theta_ = psi_.theta();
    if (auto* q = std::get_if<Quadratic>(&psi_.family())) {
      grey_ = q->sigma2 > 0.0;
    } else if (std::holds_alternative<StablePower>(psi_.family())) {
      grey_ = true;
    } else {
      const auto v = grey_check(psi_);
      grey_ = v.is_yes();
      if (grey_) tail_at_theta_ = numeric_tail_from(theta_);
    }
  }

  const BranchingMechanism& psi() const { return psi_; }
  double quad_tol() const { return quad_tol_; }
  double root_tol() const { return root_tol_; }
  double v_cap() const { return v_cap_; }
  bool grey() const { return grey_; }
  /// Limit of v_t as t -> infinity (largest root of Psi).
  double terminal_value() const { return root_; }

  /// F(a) = integral of dq / Psi(q) over [a, infinity).
  double tail_time(double a) const {
    require_grey();
    if (std::isnan(a) || !(a > root_)) throw std::domain_error("tail_time: argument must exceed the largest root of Psi");
    if (std::isinf(a)) return 0.0;
    if (auto* s = std::get_if<StablePower>(&psi_.family())) {
      return std::pow(a, 1.0 - s->alpha) / (s->d * (s->alpha - 1.0));
    }
    if (auto* q = std::get_if<Quadratic>(&psi_.family())) {
      const double c = 0.5 * q->sigma2;
      if (q->b == 0.0) return 1.0 / (c * a);
      return std::log1p(q->b / (c * a)) / q->b;
    }
    if (a >= theta_) return numeric_tail_from(a);
    return travel_time(a, theta_) + tail_at_theta_;
  }

  /// Integral of dq / Psi(q) over [lo, hi], both on the same side of the root.
  double travel_time(double lo, double hi) const {
    if (lo == hi) return 0.0;
    if (lo > hi) return -travel_time(hi, lo);
    const double base = root_;
    if (lo <= base && hi > base) throw std::domain_error("travel_time: interval straddles a root of Psi");
    if (lo > base) {
      // q = base + exp(s)
      auto g = [this, base](double s) {
        const double e = std::exp(s);
        return e / psi_(base + e);
      };
      return numerics::integrate(g, std::log(lo - base), std::log(hi - base), quad_tol_);
    }
    // Both below the root: Psi < 0 there, q = base - exp(s).
    auto g = [this, base](double s) {
      const double e = std::exp(s);
      return e / psi_(base - e);
    };
    return numerics::integrate(g, std::log(base - hi), std::log(base - lo), quad_tol_);
  }

  /// v_t: the flow started from +infinity, i.e. the solution of F(v) = t.
  double v_from_infinity(double t) const {
    if (!(t > 0.0)) throw std::domain_error("v_from_infinity: t must be > 0");
    require_grey();
    if (std::isinf(t)) return root_;
    if (auto* s = std::get_if<StablePower>(&psi_.family())) {
      return std::pow(s->d * (s->alpha - 1.0) * t, -1.0 / (s->alpha - 1.0));
    }
    if (auto* q = std::get_if<Quadratic>(&psi_.family())) {
      const double c = 0.5 * q->sigma2;
      if (q->b == 0.0) return 1.0 / (c * t);
      return q->b / (c * std::expm1(q->b * t));
    }
    // Custom: v = root + exp(y), log F(v) - log t is decreasing in y.
    const double base = root_;
    auto h = [this, base, t](double y) { return std::log(tail_time(base + std::exp(y))) - std::log(t); };
    double y0 = std::log(theta_ - base + 1.0);
    double lo = y0, hi = y0;
    double step = 1.0;
    if (h(y0) > 0.0) {
      while (h(hi) > 0.0) {
        lo = hi;
        hi += step;
        step *= 2.0;
        if (base + std::exp(hi) > v_cap_) return numerics::kInf;
      }
    } else {
      while (h(lo) <= 0.0) {
        hi = lo;
        lo -= step;
        step *= 2.0;
        if (lo < -700.0) return base;
      }
    }
    return base + std::exp(numerics::bracketed_root(h, lo, hi, root_tol_));
  }

  /// v_t(lambda), with v_0(lambda) = lambda.
  double v_from_lambda(double t, double lambda) const {
    if (std::isnan(t) || t < 0.0) throw std::domain_error("v_from_lambda: t must be >= 0");
    if (std::isnan(lambda) || lambda < 0.0) throw std::domain_error("v_from_lambda: lambda must be >= 0");
    if (t == 0.0 || lambda == 0.0) return lambda;
    if (lambda >= v_cap_) return grey_ ? v_from_infinity(t) : numerics::kInf;
    if (auto* s = std::get_if<StablePower>(&psi_.family())) {
      const double a1 = s->alpha - 1.0;
      return lambda * std::pow(1.0 + s->d * a1 * std::pow(lambda, a1) * t, -1.0 / a1);
    }
    if (auto* q = std::get_if<Quadratic>(&psi_.family())) {
      const double c = 0.5 * q->sigma2;
      if (q->b == 0.0) return lambda / (1.0 + c * lambda * t);
      const double bt = q->b * t;
      if (bt > 700.0) return 0.0;
      return q->b * lambda / (q->b * std::exp(bt) + c * lambda * std::expm1(bt));
    }
    const double base = root_;
    if (lambda == base) return lambda;
    // v = base + sign * gap * exp(y), y <= 0; travel time grows as y decreases.
    const double sign = lambda > base ? 1.0 : -1.0;
    const double gap = std::fabs(lambda - base);
    auto elapsed = [this, base, sign, gap](double y) {
      auto g = [this, base, sign, gap](double s) {
        const double e = gap * std::exp(s);
        return e / std::fabs(psi_(base + sign * e));
      };
      return numerics::integrate(g, y, 0.0, quad_tol_);
    };
    auto h = [&](double y) { return elapsed(y) - t; };
    double hi = 0.0, lo = -1.0, step = 1.0;
    while (h(lo) < 0.0) {
      hi = lo;
      lo -= step;
      step *= 2.0;
      if (lo < -700.0) return base;  // reaches the root in finite time
    }
    return base + sign * gap * std::exp(numerics::bracketed_root(h, lo, hi, root_tol_));
  }

  /// P_x[extinction by time t] = exp(-x v_t).
  double extinction_prob(double x, double t) const {
    if (std::isnan(x) || x < 0.0) throw std::domain_error("extinction_prob: x must be >= 0");
    if (!(t > 0.0)) throw std::domain_error("extinction_prob: t must be > 0");
    require_grey();
    if (x == 0.0) return 1.0;
    return std::exp(-x * v_from_infinity(t));
  }

  /// E_x[exp(-q Y_t)] for the CBI(Psi, Phi): exp(-x v_t(q) - int_0^t Phi(v_s(q)) ds).
  template <class Immigration>
  double cbi_laplace(double x, double q, double t, const Immigration& phi) const {
    if (std::isnan(x) || x < 0.0) throw std::domain_error("cbi_laplace: x must be >= 0");
    if (std::isnan(q) || q < 0.0) throw std::domain_error("cbi_laplace: q must be >= 0");
    if (!(t > 0.0)) throw std::domain_error("cbi_laplace: t must be > 0");
    if (q == 0.0) return 1.0;
    auto integrand = [&](double s) { return phi(v_from_lambda(s, q)); };
    const double immigration = numerics::integrate(integrand, 0.0, t, quad_tol_);
    if (!std::isfinite(immigration)) throw std::runtime_error("cbi_laplace: time integral failed");
    return std::exp(-x * v_from_lambda(t, q) - immigration);
  }

 private:
  void require_grey() const {
    if (!grey_) throw std::domain_error("v from infinity undefined: Grey's condition fails");
  }

  double numeric_tail_from(double a) const {
    auto f = [this](double q) { return 1.0 / psi_(q); };
    numerics::PanelOptions opt;
    opt.tail_rel_tol = std::min(1e-13, quad_tol_);
    opt.max_ratio = 0.99;
    const auto r = numerics::improper_integral(f, a, numerics::Direction::Up, opt, quad_tol_);
    if (r.status == numerics::Convergence::Infinite) {
      throw std::domain_error("v from infinity undefined: tail integral diverges");
    }
    // Budget exhaustion with geometric decay still leaves a usable extrapolation.
    return r.value();
  }

  BranchingMechanism psi_;
  double quad_tol_;
  double root_tol_;
  double v_cap_;
  double root_ = 0.0;
  double theta_ = 1.0;
  bool grey_ = false;
  double tail_at_theta_ = 0.0;
};

}  // namespace cbi
