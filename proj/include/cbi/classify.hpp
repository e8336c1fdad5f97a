#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

#include "cbi/flow.hpp"
#include "cbi/mechanisms.hpp"
#include "cbi/numerics.hpp"
#include "cbi/verdict.hpp"

namespace cbi {

enum class ZeroClass { TrivialPoint, Polar, Transient, Recurrent, Inconclusive, NoImmigration };
enum class Method { NumericIntegral, RVFastPath, ClosedForm };

inline std::string_view to_string(ZeroClass c) {
  switch (c) {
    case ZeroClass::TrivialPoint: return "TrivialPoint";
    case ZeroClass::Polar: return "Polar";
    case ZeroClass::Transient: return "Transient";
    case ZeroClass::Recurrent: return "Recurrent";
    case ZeroClass::Inconclusive: return "Inconclusive";
    case ZeroClass::NoImmigration: return "NoImmigration";
  }
  return "Inconclusive";
}

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::NumericIntegral: return "NumericIntegral";
    case Method::RVFastPath: return "RVFastPath";
    case Method::ClosedForm: return "ClosedForm";
  }
  return "NumericIntegral";
}

/// Regular-variation data of R = Phi / Psi at infinity (rho, r) and at 0+ (kappa, k).
struct RegVarSummary {
  std::optional<double> rho;
  std::optional<double> kappa;
  std::optional<double> r_upper;
  std::optional<double> r_lower;
  std::optional<double> k_upper;
  std::optional<double> k_lower;
};

struct ZeroSetReport {
  Verdict grey;
  Verdict conservative;
  ZeroClass zero_class = ZeroClass::Inconclusive;
  Verdict heavy;
  Verdict intervals;
  Verdict stationary;
  std::optional<double> dim_upper;
  std::optional<double> dim_lower;
  Method method = Method::NumericIntegral;
  Evidence evidence;
};

/// Box-counting dimension bounds of Z on a bounded window. When the bounds
/// collapse, `upper_lo == upper_hi` and `lower_lo == lower_hi`.
struct BoxDims {
  double upper_lo = 0.0, upper_hi = 0.0;
  double lower_lo = 0.0, lower_hi = 0.0;
  bool exact = false;
  bool numeric = false;
  bool inconclusive = false;
  Evidence evidence;

  double dim_upper() const { return 0.5 * (upper_lo + upper_hi); }
  double dim_lower() const { return 0.5 * (lower_lo + lower_hi); }
};

namespace classify_detail {

inline constexpr double kExact = 1e-12;   // gaps this small count as equality
inline constexpr double kMargin = 1e-3;   // fast path abstains inside this band
inline constexpr double kHugeLog = 30.0;  // log of a panel contribution that is surely divergent

inline bool builtin(const BranchingMechanism& psi, const ImmigrationMechanism& phi) {
  return !psi.is_custom() && !phi.is_custom();
}

inline Verdict from_series(const numerics::SeriesResult& r, bool finite_means_yes, Evidence e,
                           std::string_view prefix) {
  e.append(r.evidence, prefix);
  switch (r.status) {
    case numerics::Convergence::Finite:
      e.add(std::string(prefix) + "value", r.value());
      return Verdict::from_bool(finite_means_yes, std::move(e));
    case numerics::Convergence::Infinite:
      return Verdict::from_bool(!finite_means_yes, std::move(e));
    default:
      return Verdict::inconclusive(std::move(e));
  }
}

/// Integral over [theta, inf) of exp(int_theta^z R) dz / Psi(z).
inline numerics::SeriesResult polar_integral(const BranchingMechanism& psi,
                                             const ImmigrationMechanism& phi, double theta) {
  auto R = [&](double q) { return phi(q) / psi(q); };
  double W_lo = 0.0;  // int_theta^lo R
  auto panel = [&](double lo, double hi) {
    auto expo = [&](double s) {
      const double z = std::exp(s);
      return W_lo + numerics::fixed_log(R, lo, z) + s - std::log(psi(z));
    };
    const double slo = std::log(lo), shi = std::log(hi);
    const double probe = std::max({expo(slo), expo(0.5 * (slo + shi)), expo(shi)});
    const double W_hi = W_lo + numerics::fixed_log(R, lo, hi);
    double c = 0.0;
    if (probe > kHugeLog) {
      c = numerics::kInf;
    } else {
      c = numerics::integrate([&](double s) { return std::exp(expo(s)); }, slo, shi, 1e-9);
    }
    W_lo = W_hi;
    return c;
  };
  return numerics::panel_series(panel, theta, numerics::Direction::Up);
}

/// Integral over (root, theta] of exp(-int_x^theta R) dx / Psi(x), in u = x - root.
inline numerics::SeriesResult recurrence_integral(const BranchingMechanism& psi,
                                                  const ImmigrationMechanism& phi, double theta,
                                                  double root) {
  auto R = [&](double u) { return phi(root + u) / psi(root + u); };
  double V_hi = 0.0;  // int_{root+hi}^theta R
  auto panel = [&](double lo, double hi) {
    auto expo = [&](double s) {
      const double u = std::exp(s);
      return -(V_hi + numerics::fixed_log(R, u, hi)) + s - std::log(psi(root + u));
    };
    const double slo = std::log(lo), shi = std::log(hi);
    const double probe = std::max({expo(slo), expo(0.5 * (slo + shi)), expo(shi)});
    const double V_lo = V_hi + numerics::fixed_log(R, lo, hi);
    double c = 0.0;
    if (probe > kHugeLog) {
      c = numerics::kInf;
    } else {
      c = numerics::integrate([&](double s) { return std::exp(expo(s)); }, slo, shi, 1e-9);
    }
    V_hi = V_lo;
    return c;
  };
  return numerics::panel_series(panel, theta - root, numerics::Direction::Down);
}

inline Verdict grey_verdict(const BranchingMechanism& psi, bool& closed_form) {
  closed_form = !psi.is_custom();
  if (auto* q = std::get_if<Quadratic>(&psi.family())) {
    Evidence e;
    e.add("sigma2", q->sigma2);
    e.note(q->sigma2 > 0.0 ? "quadratic term makes 1/Psi integrable at infinity"
                           : "Psi linear, 1/Psi not integrable at infinity");
    return Verdict::from_bool(q->sigma2 > 0.0, std::move(e));
  }
  if (auto* s = std::get_if<StablePower>(&psi.family())) {
    Evidence e;
    e.add("alpha", s->alpha);
    e.add("integral_from_1", 1.0 / (s->d * (s->alpha - 1.0)));
    return Verdict::yes(std::move(e));
  }
  return grey_check(psi);
}

}  // namespace classify_detail

/// Regular-variation summary from closed-form asymptotes; empty fields when a
/// built-in pair does not pin the quantity down.
inline RegVarSummary regvar_summary(const BranchingMechanism& psi, const ImmigrationMechanism& phi) {
  RegVarSummary s;
  if (!classify_detail::builtin(psi, phi) || phi.is_zero()) return s;
  const auto ip = psi.indices();
  const auto iq = phi.indices();
  s.rho = iq.lower_inf - ip.lower_inf;
  s.kappa = iq.lower_0 - ip.lower_0;
  if (std::fabs(*s.rho + 1.0) <= classify_detail::kExact) {
    auto a = phi.asymptote_inf();
    auto b = psi.asymptote_inf();
    if (a && b) s.r_upper = s.r_lower = a->coeff / b->coeff;
  } else if (*s.rho < -1.0) {
    s.r_upper = s.r_lower = 0.0;
  } else {
    s.r_upper = s.r_lower = numerics::kInf;
  }
  if (!psi.supercritical()) {
    if (std::fabs(*s.kappa + 1.0) <= classify_detail::kExact) {
      auto a = phi.asymptote_0();
      auto b = psi.asymptote_0();
      if (a && b) s.k_upper = s.k_lower = a->coeff / b->coeff;
    } else if (*s.kappa > -1.0) {
      s.k_upper = s.k_lower = 0.0;
    } else {
      s.k_upper = s.k_lower = numerics::kInf;
    }
  }
  return s;
}

/// Lebesgue measure of Z is positive iff int_theta^inf Phi/Psi < inf.
inline Verdict heaviness(const BranchingMechanism& psi, const ImmigrationMechanism& phi) {
  const double theta = psi.theta();
  auto R = [&](double q) { return phi(q) / psi(q); };
  const auto r = numerics::improper_integral(R, theta, numerics::Direction::Up);
  Evidence e;
  e.add("theta", theta);
  return classify_detail::from_series(r, true, std::move(e), "heavy.");
}

inline Verdict has_intervals(const ImmigrationMechanism& phi) { return is_compound_poisson(phi); }

/// Stationary law exists iff Psi'(0+) >= 0 and int_0^theta Phi/Psi < inf.
inline Verdict stationary_exists(const BranchingMechanism& psi, const ImmigrationMechanism& phi) {
  Evidence e;
  const double d0 = psi.deriv0();
  e.add("psi_prime_0", d0);
  if (d0 < 0.0) {
    e.note("supercritical branching");
    return Verdict::no(std::move(e));
  }
  const double theta = psi.theta();
  e.add("theta", theta);
  auto R = [&](double q) { return phi(q) / psi(q); };
  const auto r = numerics::improper_integral(R, theta, numerics::Direction::Down);
  return classify_detail::from_series(r, true, std::move(e), "stationary.");
}

/// Numeric classification from the two improper integrals alone.
inline ZeroSetReport classify_numeric(const BranchingMechanism& psi, const ImmigrationMechanism& phi) {
  using namespace classify_detail;
  ZeroSetReport rep;
  bool closed = false;
  rep.grey = grey_verdict(psi, closed);
  rep.conservative = conservativity_check(psi);
  rep.intervals = has_intervals(phi);
  rep.method = Method::NumericIntegral;

  auto trivial_fill = [&](ZeroClass c) {
    Evidence e;
    e.add("heavy_forced", 0.0);
    rep.zero_class = c;
    if (c == ZeroClass::TrivialPoint) {
      rep.heavy = Verdict::no(e);
      rep.dim_upper = rep.dim_lower = 0.0;
    } else {
      e.note("zero set is the whole half-line");
      rep.heavy = Verdict::yes(e);
      rep.dim_upper = rep.dim_lower = 1.0;
    }
    rep.stationary = phi.is_zero() ? Verdict::yes(Evidence{}.add("phi_zero", 1.0))
                                   : stationary_exists(psi, phi);
    if (closed) rep.method = Method::ClosedForm;
    return rep;
  };

  if (rep.grey.is_no()) {
    rep.evidence.note("Grey's condition fails: zero set reduces to {0}");
    return trivial_fill(ZeroClass::TrivialPoint);
  }
  if (phi.is_zero()) {
    rep.evidence.note("no immigration: the process started at 0 stays at 0");
    return trivial_fill(ZeroClass::NoImmigration);
  }
  rep.stationary = stationary_exists(psi, phi);
  rep.heavy = heaviness(psi, phi);
  if (rep.grey.is_inconclusive()) {
    rep.zero_class = ZeroClass::Inconclusive;
    rep.evidence.note("Grey's condition undecided");
    return rep;
  }

  const double theta = psi.theta();
  const double root = psi.largest_root();
  rep.evidence.add("theta", theta);
  const auto outer = polar_integral(psi, phi, theta);
  rep.evidence.append(outer.evidence, "polar.");
  if (outer.status == numerics::Convergence::Infinite) {
    rep.zero_class = ZeroClass::Polar;
    return rep;
  }
  if (outer.status == numerics::Convergence::Inconclusive) {
    rep.zero_class = ZeroClass::Inconclusive;
    return rep;
  }
  rep.evidence.add("polar.value", outer.value());
  if (psi.supercritical()) {
    rep.evidence.add("largest_root", root);
    rep.evidence.note("supercritical branching is never recurrent");
    rep.zero_class = ZeroClass::Transient;
    return rep;
  }
  const auto inner = recurrence_integral(psi, phi, theta, root);
  rep.evidence.append(inner.evidence, "recurrence.");
  switch (inner.status) {
    case numerics::Convergence::Finite:
      rep.evidence.add("recurrence.value", inner.value());
      rep.zero_class = ZeroClass::Transient;
      break;
    case numerics::Convergence::Infinite:
      rep.zero_class = ZeroClass::Recurrent;
      break;
    default:
      rep.zero_class = ZeroClass::Inconclusive;
  }
  return rep;
}

namespace classify_detail {

// Outcome of comparing a gap against zero under the margin policy.
enum class Side { Below, Equal, Above, Abstain };

inline Side side(double gap) {
  if (std::isinf(gap)) return gap > 0 ? Side::Above : Side::Below;
  if (std::fabs(gap) <= kExact) return Side::Equal;
  if (std::fabs(gap) < kMargin) return Side::Abstain;
  return gap > 0 ? Side::Above : Side::Below;
}

}  // namespace classify_detail

/// Zero-class and heaviness from regular-variation indices, or empty
/// when no clause decides (including near-boundary gaps).
inline std::optional<ZeroSetReport> rv_fastpath(const BranchingMechanism& psi,
                                                const ImmigrationMechanism& phi) {
  using namespace classify_detail;
  using S = Side;
  if (!builtin(psi, phi) || phi.is_zero()) return std::nullopt;
  if (auto* q = std::get_if<Quadratic>(&psi.family()); q && q->sigma2 == 0.0) return std::nullopt;

  const auto rv = regvar_summary(psi, phi);
  const auto ip = psi.indices();
  if (!rv.rho) return std::nullopt;

  ZeroSetReport rep;
  rep.method = Method::RVFastPath;
  Evidence base;
  base.add("rho", *rv.rho);
  base.add("kappa", *rv.kappa);
  if (rv.r_upper) base.add("r_upper", *rv.r_upper).add("r_lower", *rv.r_lower);
  if (rv.k_upper) base.add("k_upper", *rv.k_upper).add("k_lower", *rv.k_lower);
  base.add("Ind_lower", ip.lower_inf).add("Ind_upper", ip.upper_inf);
  base.add("ind_lower", ip.lower_0).add("ind_upper", ip.upper_0);

  bool polar = false;
  std::optional<bool> heavy;
  switch (side(*rv.rho + 1.0)) {
    case S::Abstain: return std::nullopt;
    case S::Above:
      polar = true;
      heavy = false;
      base.note("rho > -1: polar");
      break;
    case S::Below:
      heavy = true;
      base.note("rho < -1: not polar, heavy");
      break;
    case S::Equal: {
      if (!rv.r_upper) return std::nullopt;
      const S a = side(*rv.r_upper - (ip.lower_inf - 1.0));
      const S b = side(*rv.r_lower - (ip.upper_inf - 1.0));
      if (a == S::Abstain || b == S::Abstain) return std::nullopt;
      if (b == S::Above || b == S::Equal) {
        polar = true;
        heavy = false;
        base.note("rho = -1 and r_lower >= Ind_upper - 1: polar");
      } else if (a == S::Below) {
        base.note("rho = -1 and r_upper < Ind_lower - 1: not polar");
        if (*rv.r_lower > 0.0) heavy = false;
      } else {
        return std::nullopt;  // gap left open by the index criteria
      }
      break;
    }
  }
  if (polar) {
    rep.zero_class = ZeroClass::Polar;
  } else if (psi.supercritical()) {
    base.note("supercritical and not polar: transient");
    rep.zero_class = ZeroClass::Transient;
  } else {
    switch (side(*rv.kappa + 1.0)) {
      case S::Abstain: return std::nullopt;
      case S::Below:
        rep.zero_class = ZeroClass::Transient;
        base.note("kappa < -1: transient");
        break;
      case S::Above:
        rep.zero_class = ZeroClass::Recurrent;
        base.note("kappa > -1: recurrent");
        break;
      case S::Equal: {
        if (!rv.k_upper) return std::nullopt;
        const S a = side(*rv.k_upper - ip.lower_0 + 1.0);
        const S b = side(*rv.k_lower - ip.upper_0 + 1.0);
        if (a == S::Abstain || b == S::Abstain) return std::nullopt;
        if (a == S::Below || a == S::Equal) {
          rep.zero_class = ZeroClass::Recurrent;
          base.note("kappa = -1 and k_upper - ind_lower <= -1: recurrent");
        } else if (b == S::Above) {
          rep.zero_class = ZeroClass::Transient;
          base.note("kappa = -1 and k_lower - ind_upper > -1: transient");
        } else {
          return std::nullopt;
        }
        break;
      }
    }
  }
  bool closed = false;
  rep.grey = classify_detail::grey_verdict(psi, closed);
  if (!rep.grey.is_yes()) return std::nullopt;
  rep.conservative = conservativity_check(psi);
  rep.intervals = has_intervals(phi);
  rep.stationary = stationary_exists(psi, phi);
  if (heavy) {
    Evidence e = base;
    rep.heavy = Verdict::from_bool(*heavy, std::move(e));
  } else {
    rep.heavy = heaviness(psi, phi);
  }
  rep.evidence = std::move(base);
  return rep;
}

/// Box-counting dimensions of Z on [0, t]. Exact for built-in pairs with
/// regularly varying R at infinity; interval bounds otherwise when r_upper
/// is known; numeric evaluation of the last-zero exponent as a fallback.
inline BoxDims box_dims(const BranchingMechanism& psi, const ImmigrationMechanism& phi,
                        std::optional<ZeroClass> known_class = std::nullopt) {
  ZeroClass cls;
  if (known_class) {
    cls = *known_class;
  } else {
    const auto fp = rv_fastpath(psi, phi);
    cls = fp ? fp->zero_class : classify_numeric(psi, phi).zero_class;
  }
  if (cls != ZeroClass::Transient && cls != ZeroClass::Recurrent) {
    throw std::domain_error("box dimensions are defined only for transient or recurrent zero sets");
  }
  BoxDims out;
  const auto ip = psi.indices();
  const auto rv = regvar_summary(psi, phi);
  if (rv.r_upper && *rv.r_upper < ip.lower_inf - 1.0) {
    const double ru = *rv.r_upper, rl = *rv.r_lower;
    out.upper_lo = 1.0 - ru / (ip.upper_inf - 1.0);
    out.upper_hi = 1.0 - rl / (ip.upper_inf - 1.0);
    out.lower_lo = 1.0 - ru / (ip.lower_inf - 1.0);
    out.lower_hi = 1.0 - rl / (ip.lower_inf - 1.0);
    out.exact = ru == rl && ip.upper_inf == ip.lower_inf;
    out.evidence.add("r_upper", ru).add("r_lower", rl);
    out.evidence.add("Ind_lower", ip.lower_inf).add("Ind_upper", ip.upper_inf);
    return out;
  }
  // Numeric: 1 - W(u) / log(1/u), W(u) = int_{v_1}^{v_u} Phi/Psi.
  out.numeric = true;
  FlowSolver flow(psi);
  const double v1 = flow.v_from_infinity(1.0);
  auto R = [&](double q) { return phi(q) / psi(q); };
  double mn = numerics::kInf, mx = -numerics::kInf;
  double v_prev = v1, W = 0.0;
  for (double u : {1e-4, 1e-6, 1e-8}) {
    const double vu = flow.v_from_infinity(u);
    W += numerics::integrate_log(R, v_prev, vu, 1e-10);
    v_prev = vu;
    const double d = 1.0 - W / std::log(1.0 / u);
    out.evidence.add("dim_at_u=" + std::to_string(u), d);
    mn = std::min(mn, d);
    mx = std::max(mx, d);
  }
  out.upper_lo = out.upper_hi = mx;
  out.lower_lo = out.lower_hi = mn;
  out.inconclusive = (mx - mn) > 0.02;
  if (out.inconclusive) out.evidence.note("dimension estimates spread over the probe times");
  return out;
}

/// Full classification: fast path first, numeric integrals otherwise.
inline ZeroSetReport classify_zero_state(const BranchingMechanism& psi, const ImmigrationMechanism& phi) {
  ZeroSetReport rep;
  if (auto fp = rv_fastpath(psi, phi)) {
    rep = std::move(*fp);
  } else {
    rep = classify_numeric(psi, phi);
    if (classify_detail::builtin(psi, phi) && !phi.is_zero()) {
      rep.evidence.note("no regular-variation clause decides this pair");
    }
  }
  if (rep.zero_class == ZeroClass::Polar) {
    rep.dim_upper.reset();
    rep.dim_lower.reset();
  } else if (rep.zero_class == ZeroClass::Transient || rep.zero_class == ZeroClass::Recurrent) {
    if (rep.heavy.is_yes()) {
      rep.dim_upper = rep.dim_lower = 1.0;
    } else {
      try {
        const auto d = box_dims(psi, phi, rep.zero_class);
        rep.dim_upper = d.dim_upper();
        rep.dim_lower = d.dim_lower();
        rep.evidence.append(d.evidence, "dims.");
      } catch (const std::exception& e) {
        rep.evidence.note(std::string("dimension evaluation failed: ") + e.what());
      }
    }
  }
  return rep;
}

}  // namespace cbi
