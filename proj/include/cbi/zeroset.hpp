#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <utility>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "cbi/classify.hpp"
#include "cbi/flow.hpp"
#include "cbi/mechanisms.hpp"
#include "cbi/numerics.hpp"

namespace cbi {

namespace zeroset_detail {

// Integrals over t of exp(-q t + W(t)) written in the variable v = v_t:
//   dt = -dv / Psi(v),  t = F(v),  W = int_{v_1}^{v} Phi / Psi.
// Panels live in u = v - root so the supercritical case works unchanged.
class VIntegrals {
 public:
  VIntegrals(BranchingMechanism psi, ImmigrationMechanism phi)
      : psi_(std::move(psi)), phi_(std::move(phi)), flow_(psi_) {
    base_ = flow_.terminal_value();
    v1_ = flow_.v_from_infinity(1.0);
    if (base_ > 0.0) {
      t_floor_ = flow_.tail_time(base_ * (1.0 + kRootFloor));
      root_rate_ = phi_(base_);
    }
  }

  /// Past this time v_t sits within rounding of the root; exp(W) then decays
  /// like exp(-Phi(root) t). Infinite for non-supercritical branching.
  double t_floor() const { return t_floor_; }
  double root_rate() const { return root_rate_; }

  const FlowSolver& flow() const { return flow_; }
  double v1() const { return v1_; }
  double base() const { return base_; }

  double R(double v) const { return phi_(v) / psi_(v); }

  /// int_{v1}^{v} R.
  double W(double v) const {
    if (v == v1_) return 0.0;
    auto r = [this](double u) { return R(base_ + u); };
    const double a = v1_ - base_, b = v - base_;
    return b > a ? numerics::integrate_log(r, a, b, 1e-12) : -numerics::integrate_log(r, b, a, 1e-12);
  }

  /// Panel series from u0 (with W, F known there) towards infinity or the root.
  numerics::SeriesResult series(double q, double u0, double W0, double F0, numerics::Direction dir,
                                double tail_tol) const {
    if (dir == numerics::Direction::Down && base_ > 0.0) return near_root(q, u0, W0, F0);
    const bool up = dir == numerics::Direction::Up;
    double W_edge = W0, F_edge = F0;
    auto rr = [this](double u) { return R(base_ + u); };
    auto ip = [this](double u) { return 1.0 / psi_(base_ + u); };
    auto panel = [&](double lo, double hi) {
      const double edge = up ? lo : hi;
      auto expo = [&](double s) {
        const double u = std::exp(s);
        const double w = W_edge + numerics::fixed_log(rr, edge, u);
        const double f = F_edge - numerics::fixed_log(ip, edge, u);
        return -q * f + w + s - std::log(psi_(base_ + u));
      };
      const double slo = std::log(lo), shi = std::log(hi);
      const double probe = std::max({expo(slo), expo(0.5 * (slo + shi)), expo(shi)});
      double c = numerics::kInf;
      if (probe <= 30.0) {
        c = numerics::integrate([&](double s) { return std::exp(expo(s)); }, slo, shi, 1e-11);
      }
      const double other = up ? hi : lo;
      W_edge += numerics::fixed_log(rr, edge, other);
      F_edge -= numerics::fixed_log(ip, edge, other);
      return c;
    };
    numerics::PanelOptions opt;
    opt.tail_rel_tol = tail_tol;
    return numerics::panel_series(panel, u0, dir, opt);
  }

  /// Supercritical case towards the root. Psi(root + u) cancels below
  /// u ~ 1e-6 root (rounding noise turns adaptive quadrature slow), so panels stop there; beyond, Psi ~ Psi'(root) u and
  /// Phi ~ Phi(root) make the rest exp(W - qF) / (Phi(root) + q) exactly.
  numerics::SeriesResult near_root(double q, double u0, double W0, double F0) const {
    const double floor = base_ * kRootFloor;
    auto rr = [this](double u) { return R(base_ + u); };
    auto ip = [this](double u) { return 1.0 / psi_(base_ + u); };
    numerics::SeriesResult res;
    double hi = u0, W_edge = W0, F_edge = F0;
    while (hi > floor) {
      const double lo = std::max(0.5 * hi, floor);
      auto g = [&](double s) {
        const double u = std::exp(s);
        const double w = W_edge + numerics::fixed_log(rr, hi, u);
        const double f = F_edge - numerics::fixed_log(ip, hi, u);
        return std::exp(-q * f + w + s) / psi_(base_ + u);
      };
      res.sum += numerics::integrate(g, std::log(lo), std::log(hi), 1e-9);
      W_edge += numerics::fixed_log(rr, hi, lo);
      F_edge -= numerics::fixed_log(ip, hi, lo);
      hi = lo;
      ++res.panels;
    }
    res.tail = std::exp(W_edge - q * F_edge) / (phi_(base_ + hi) + q);
    res.status = std::isfinite(res.sum + res.tail) ? numerics::Convergence::Finite
                                                   : numerics::Convergence::Inconclusive;
    res.evidence.add("panels", res.panels);
    res.evidence.add("partial_sum", res.sum);
    res.evidence.add("tail_estimate", res.tail);
    res.evidence.note("linearised tail at the largest root of Psi");
    return res;
  }

  /// int over v in [a, b] of exp(W(v)) / Psi(v), given W(a).
  double segment(double a, double b, double Wa) const {
    if (a == b) return 0.0;
    auto rr = [this](double u) { return R(base_ + u); };
    const double ua = a - base_, ub = b - base_;
    auto g = [&](double s) {
      const double u = std::exp(s);
      const double w = Wa + numerics::fixed_log(rr, ua, u);
      return std::exp(w + s) / psi_(base_ + u);
    };
    return numerics::integrate(g, std::log(ua), std::log(ub), 1e-11);
  }

 private:
  BranchingMechanism psi_;
  ImmigrationMechanism phi_;
  FlowSolver flow_;
  static constexpr double kRootFloor = 1e-6;
  double base_ = 0.0;
  double v1_ = 1.0;
  double t_floor_ = numerics::kInf;
  double root_rate_ = 0.0;
};

inline void require_grey(const BranchingMechanism& psi) {
  bool closed = false;
  if (!classify_detail::grey_verdict(psi, closed).is_yes()) {
    throw std::domain_error("zero set is {0}: Grey's condition does not hold");
  }
}

}  // namespace zeroset_detail

/// L(q) = [int_0^inf e^{-qt} exp(W(t)) dt]^{-1}, W(t) = int_{v_1}^{v_t} Phi/Psi.
///
/// q = 0 returns the killing rate (0 when the zero set is unbounded).
inline double laplace_exponent(const BranchingMechanism& psi, const ImmigrationMechanism& phi, double q) {
  if (std::isnan(q) || q < 0.0) throw std::domain_error("laplace_exponent: q must be >= 0");
  if (phi.is_zero()) throw std::domain_error("laplace_exponent: no immigration, zero set is the half-line");
  zeroset_detail::require_grey(psi);
  zeroset_detail::VIntegrals vi(psi, phi);
  // Anchor at t = 1/q, where e^{-qt} starts to bite; panels elsewhere may underflow.
  const double ta = std::min(q > 0.0 ? 1.0 / q : 1.0, vi.t_floor());
  const double va = vi.flow().v_from_infinity(ta);
  const double ua = va - vi.base();
  const double Wa = vi.W(va);
  const auto up = vi.series(q, ua, Wa, ta, numerics::Direction::Up, 1e-10);
  if (up.status == numerics::Convergence::Infinite) {
    throw std::domain_error("laplace_exponent: 0 is polar (time integral diverges near t = 0); classify first");
  }
  if (up.status == numerics::Convergence::Inconclusive) {
    throw std::runtime_error("laplace_exponent: inconclusive integral near t = 0");
  }
  const auto down = vi.series(q, ua, Wa, ta, numerics::Direction::Down, 1e-10);
  if (down.status == numerics::Convergence::Infinite) return 0.0;
  if (down.status == numerics::Convergence::Inconclusive) {
    throw std::runtime_error("laplace_exponent: inconclusive integral near t = infinity");
  }
  return 1.0 / (up.value() + down.value());
}

struct SubordinatorSummary {
  std::vector<std::pair<double, double>> L_samples;
  numerics::LinearFit gamma_fit;
  double drift_estimate = 0.0;  // L(q_max) / q_max
  Verdict killed;
};

inline SubordinatorSummary summarize_subordinator(const BranchingMechanism& psi,
                                                  const ImmigrationMechanism& phi,
                                                  const std::vector<double>& qs) {
  if (qs.size() < 2) throw std::invalid_argument("summarize_subordinator: need at least two q values");
  SubordinatorSummary s;
  std::vector<double> lx, ly;
  for (double q : qs) {
    if (!(q > 0.0)) throw std::domain_error("summarize_subordinator: q values must be > 0");
    const double L = laplace_exponent(psi, phi, q);
    s.L_samples.emplace_back(q, L);
    lx.push_back(std::log(q));
    ly.push_back(std::log(L));
  }
  s.gamma_fit = numerics::least_squares(lx, ly);
  const auto& last = *std::max_element(s.L_samples.begin(), s.L_samples.end());
  s.drift_estimate = last.second / last.first;
  const double L0 = laplace_exponent(psi, phi, 0.0);
  Evidence e;
  e.add("L(0)", L0);
  s.killed = Verdict::from_bool(L0 > 0.0, std::move(e));
  return s;
}

/// Law of the last zero g_inf for a transient zero set:
/// density exp(W(t)) / k, with k computed once and shared between copies.
class GzeroLaw {
 public:
  GzeroLaw(BranchingMechanism psi, ImmigrationMechanism phi)
      : state_(std::make_shared<State>(std::move(psi), std::move(phi))) {
    const auto rep = classify_zero_state(state_->psi, state_->phi);
    if (rep.zero_class == ZeroClass::Recurrent) {
      throw std::domain_error("g_inf undefined (unbounded zero set)");
    }
    if (rep.zero_class != ZeroClass::Transient) {
      throw std::domain_error(std::string("g_inf undefined for zero class ") +
                              std::string(to_string(rep.zero_class)));
    }
  }

  /// Normalising constant k = int_0^inf exp(W(t)) dt.
  double k() const {
    std::call_once(state_->once, [s = state_.get()] {
      const double u1 = s->vi.v1() - s->vi.base();
      const auto up = s->vi.series(0.0, u1, 0.0, 1.0, numerics::Direction::Up, 1e-12);
      const auto down = s->vi.series(0.0, u1, 0.0, 1.0, numerics::Direction::Down, 1e-12);
      if (up.status != numerics::Convergence::Finite || down.status != numerics::Convergence::Finite) {
        throw std::runtime_error("g_inf normalisation did not converge");
      }
      s->k = up.value() + down.value();
    });
    return state_->k;
  }

  double density(double t) const {
    if (!(t > 0.0) || std::isinf(t)) throw std::domain_error("gzero density: t must be positive and finite");
    const auto& vi = state_->vi;
    if (t > vi.t_floor()) return density(vi.t_floor()) * std::exp(-vi.root_rate() * (t - vi.t_floor()));
    const double v = state_->vi.flow().v_from_infinity(t);
    return std::exp(state_->vi.W(v)) / k();
  }

  /// P[g_inf > t].
  double tail(double t) const {
    if (std::isnan(t) || t < 0.0) throw std::domain_error("gzero tail: t must be >= 0");
    if (t == 0.0) return 1.0;
    const auto& vi = state_->vi;
    if (t > vi.t_floor()) return tail(vi.t_floor()) * std::exp(-vi.root_rate() * (t - vi.t_floor()));
    const double v = state_->vi.flow().v_from_infinity(t);
    const double u = v - state_->vi.base();
    if (v > state_->vi.v1()) {
      // Before t = 1 the mass sits below v; sum the short side instead.
      const auto h = state_->vi.series(0.0, u, state_->vi.W(v), t, numerics::Direction::Up, 1e-12);
      if (h.status != numerics::Convergence::Finite) throw std::runtime_error("gzero tail did not converge");
      return std::clamp(1.0 - h.value() / k(), 0.0, 1.0);
    }
    const auto r = state_->vi.series(0.0, u, state_->vi.W(v), t, numerics::Direction::Down, 1e-12);
    if (r.status != numerics::Convergence::Finite) throw std::runtime_error("gzero tail did not converge");
    return std::min(1.0, r.value() / k());
  }

  double cdf(double t) const { return 1.0 - tail(t); }

  /// CDF at many points; one tail series plus successive segments.
  std::vector<double> cdf(std::vector<double> ts) const {
    std::vector<std::size_t> idx(ts.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return ts[a] > ts[b]; });
    std::vector<double> out(ts.size(), 0.0);
    if (ts.empty()) return out;
    const double kk = k();
    double prev_v = 0.0, prev_W = 0.0, acc = 0.0;
    bool first = true;
    for (std::size_t j : idx) {
      const double t = ts[j];
      if (std::isnan(t) || t < 0.0) throw std::domain_error("gzero cdf: t must be >= 0");
      if (t == 0.0) {
        out[j] = 0.0;
        continue;
      }
      if (t > state_->vi.t_floor()) {
        out[j] = cdf(t);
        continue;
      }
      const double v = state_->vi.flow().v_from_infinity(t);
      if (first) {
        prev_W = state_->vi.W(v);
        acc = tail(t) * kk;
        first = false;
      } else if (v != prev_v) {
        acc += state_->vi.segment(prev_v, v, prev_W);
        prev_W = state_->vi.W(v);
      }
      prev_v = v;
      out[j] = std::clamp(1.0 - acc / kk, 0.0, 1.0);
    }
    return out;
  }

  /// Smallest t with cdf(t) >= p.
  double quantile(double p) const {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("gzero quantile: p must lie in (0, 1)");
    double lo = 1.0, hi = 1.0;
    while (cdf(lo) > p) lo *= 0.5;
    while (cdf(hi) < p) hi *= 2.0;
    auto h = [&](double s) { return cdf(std::exp(s)) - p; };
    return std::exp(numerics::bracketed_root(h, std::log(lo), std::log(hi), 1e-10));
  }

 private:
  struct State {
    State(BranchingMechanism p, ImmigrationMechanism f) : psi(p), phi(f), vi(std::move(p), std::move(f)) {}
    BranchingMechanism psi;
    ImmigrationMechanism phi;
    zeroset_detail::VIntegrals vi;
    std::once_flag once;
    double k = 0.0;
  };
  std::shared_ptr<State> state_;
};

inline double gzero_density(const BranchingMechanism& psi, const ImmigrationMechanism& phi, double t) {
  return GzeroLaw(psi, phi).density(t);
}

/// Stability index of the zero set of a self-similar pair with beta = alpha - 1.
inline double selfsimilar_index(double alpha, double d, double dprime) {
  if (!(alpha > 1.0 && alpha <= 2.0)) throw std::domain_error("selfsimilar_index: alpha must lie in (1, 2]");
  if (!(d > 0.0) || !(dprime >= 0.0)) throw std::domain_error("selfsimilar_index: need d > 0, d' >= 0");
  if (dprime / d >= alpha - 1.0) throw std::domain_error("polar regime, no subordinator");
  return 1.0 - dprime / (d * (alpha - 1.0));
}

/// Lamperti-stable subordinator exponent Gamma(1-b+g) / (Gamma(1-b) Gamma(g)).
inline double lamperti_kappa(double g, double beta) {
  if (!(beta > 0.0 && beta < 1.0)) throw std::domain_error("lamperti_kappa: beta must lie in (0, 1)");
  if (std::isnan(g) || g < 0.0) throw std::domain_error("lamperti_kappa: argument must be >= 0");
  if (g == 0.0) return 0.0;
  return 1.0 / (boost::math::tgamma_delta_ratio(g, 1.0 - beta) * boost::math::tgamma(1.0 - beta));
}

}  // namespace cbi
