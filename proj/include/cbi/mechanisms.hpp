#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "cbi/numerics.hpp"
#include "cbi/verdict.hpp"

namespace cbi {

/// Leading term c * q^p of a mechanism at 0+ or at infinity.
struct PowerAsymptote {
  double coeff = 0.0;
  double index = 0.0;
};

/// Growth indices at infinity and at 0+. When an index pair was obtained by
/// the log-log probe rather than in closed form, the matching `probed_*` flag
/// is set and `inconclusive_*` records whether the probed slopes disagreed.
struct Indices {
  double lower_inf = 0.0;
  double upper_inf = 0.0;
  double lower_0 = 0.0;
  double upper_0 = 0.0;
  bool probed_inf = false;
  bool probed_0 = false;
  bool inconclusive_inf = false;
  bool inconclusive_0 = false;
};

namespace detail {

inline void require_arg(double q) {
  if (std::isnan(q) || q < 0.0) throw std::domain_error("mechanism argument must be >= 0");
}

struct SlopeProbe {
  double lower;
  double upper;
  bool inconclusive;
};

// Successive log-log slopes over the decades in {lo, 10 lo, ..., hi}.
template <class F>
SlopeProbe probe_slopes(const F& f, double lo, double hi) {
  std::vector<double> slopes;
  double prev_q = lo;
  double prev_v = f(lo);
  for (double q = lo * 10.0; q <= hi * 1.0000001; q *= 10.0) {
    const double v = f(q);
    if (!(prev_v > 0.0) || !(v > 0.0) || !std::isfinite(v)) {
      throw std::domain_error("index probe: mechanism not positive and finite on probe range");
    }
    slopes.push_back(std::log(v / prev_v) / std::log(q / prev_q));
    prev_q = q;
    prev_v = v;
  }
  double mn = slopes.front(), mx = slopes.front();
  for (double s : slopes) {
    mn = std::min(mn, s);
    mx = std::max(mx, s);
  }
  return {mn, mx, (mx - mn) > 0.02};
}

}  // namespace detail

// ===========================================================================
// Branching mechanisms

/// Psi(q) = d q^alpha, alpha in (1, 2].
struct StablePower {
  double d = 1.0;
  double alpha = 2.0;
  bool operator==(const StablePower&) const = default;
};

/// Psi(q) = b q + (sigma2 / 2) q^2.
struct Quadratic {
  double b = 0.0;
  double sigma2 = 2.0;
  bool operator==(const Quadratic&) const = default;
};

/// User-supplied Psi. Unknown metadata stays empty; probes never replace a
/// declared value.
struct CustomBranching {
  std::function<double(double)> eval;
  std::optional<double> theta;
  std::optional<double> deriv0;
  std::optional<double> ind_lower;
  std::optional<double> ind_upper;
  std::optional<double> ind0_lower;
  std::optional<double> ind0_upper;
  double q_max = 1e300;
  std::string name = "custom";
};

class BranchingMechanism {
 public:
  using Family = std::variant<StablePower, Quadratic, CustomBranching>;

  static BranchingMechanism stable(double d, double alpha) {
    if (!(d > 0.0) || !std::isfinite(d)) throw std::domain_error("stable branching: d must be > 0");
    if (!(alpha > 1.0 && alpha <= 2.0)) {
      throw std::domain_error("stable branching: alpha must lie in (1, 2]");
    }
    return BranchingMechanism(StablePower{d, alpha});
  }

  static BranchingMechanism quadratic(double b, double sigma2) {
    if (!std::isfinite(b) || !(sigma2 >= 0.0) || !std::isfinite(sigma2)) {
      throw std::domain_error("quadratic branching: need finite b and sigma2 >= 0");
    }
    if (sigma2 == 0.0 && !(b > 0.0)) {
      throw std::domain_error("quadratic branching: sigma2 = 0 requires b > 0");
    }
    return BranchingMechanism(Quadratic{b, sigma2});
  }

  static BranchingMechanism custom(CustomBranching c) {
    if (!c.eval) throw std::invalid_argument("custom branching: missing evaluation handle");
    if (c.theta && !(*c.theta > 0.0)) throw std::domain_error("custom branching: theta must be > 0");
    return BranchingMechanism(std::move(c));
  }

  const Family& family() const { return family_; }
  bool is_custom() const { return std::holds_alternative<CustomBranching>(family_); }

  double operator()(double q) const {
    detail::require_arg(q);
    if (q == 0.0) return 0.0;
    return std::visit(
        [q](const auto& m) -> double {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, StablePower>) {
            return m.d * std::pow(q, m.alpha);
          } else if constexpr (std::is_same_v<T, Quadratic>) {
            return m.b * q + 0.5 * m.sigma2 * q * q;
          } else {
            if (q > m.q_max) throw std::domain_error("custom branching: argument beyond valid range");
            return m.eval(q);
          }
        },
        family_);
  }

  /// Psi'(0+): closed form, declared, or the difference quotient at 1e-8.
  double deriv0() const {
    if (auto* s = std::get_if<StablePower>(&family_)) {
      (void)s;
      return 0.0;
    }
    if (auto* qd = std::get_if<Quadratic>(&family_)) return qd->b;
    const auto& c = std::get<CustomBranching>(family_);
    if (c.deriv0) return *c.deriv0;
    return (*this)(1e-8) / 1e-8;
  }

  bool supercritical() const { return deriv0() < 0.0; }

  /// Largest root of Psi (0 for (sub)critical mechanisms).
  double largest_root() const {
    if (auto* qd = std::get_if<Quadratic>(&family_)) {
      return qd->b < 0.0 ? -2.0 * qd->b / qd->sigma2 : 0.0;
    }
    if (std::holds_alternative<StablePower>(family_)) return 0.0;
    if (!supercritical()) return 0.0;
    // Last sign change on a log grid below the positivity threshold.
    const double top = theta();
    double hi = top;
    double lo = hi;
    while (lo > 1e-300) {
      lo *= 0.5;
      if ((*this)(lo) <= 0.0) break;
      hi = lo;
    }
    if (!(lo > 1e-300)) return 0.0;
    auto h = [this](double s) { return (*this)(std::exp(s)); };
    return std::exp(numerics::bracketed_root(h, std::log(lo), std::log(hi), 1e-14));
  }

  /// Positivity threshold: a power of two, at least 1, beyond which Psi > 0.
  double theta() const {
    if (auto* c = std::get_if<CustomBranching>(&family_); c && c->theta) return *c->theta;
    if (auto* qd = std::get_if<Quadratic>(&family_); qd && qd->b < 0.0) {
      const double root = -2.0 * qd->b / qd->sigma2;
      return std::max(1.0, std::exp2(std::floor(std::log2(root)) + 1.0));
    }
    if (!is_custom()) return 1.0;
    // Scan quarter-octave grid for the first point followed by 50 positive samples.
    constexpr int kRun = 50;
    int run = 0;
    for (int j = -320; j <= 4 * 900; ++j) {
      const double q = std::exp2(j / 4.0);
      const double v = (*this)(q);
      run = v > 0.0 ? run + 1 : 0;
      if (run == kRun) {
        const double first = std::exp2((j - kRun + 1) / 4.0);
        return std::max(1.0, std::exp2(std::ceil(std::log2(first))));
      }
    }
    throw std::runtime_error("no positivity threshold found");
  }

  Indices indices() const {
    Indices ix;
    std::visit(
        [&](const auto& m) {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, StablePower>) {
            ix.lower_inf = ix.upper_inf = ix.lower_0 = ix.upper_0 = m.alpha;
          } else if constexpr (std::is_same_v<T, Quadratic>) {
            ix.lower_inf = ix.upper_inf = m.sigma2 > 0.0 ? 2.0 : 1.0;
            ix.lower_0 = ix.upper_0 = m.b != 0.0 ? 1.0 : 2.0;
          } else {
            auto absf = [this](double q) { return std::fabs((*this)(q)); };
            if (m.ind_lower && m.ind_upper) {
              ix.lower_inf = *m.ind_lower;
              ix.upper_inf = *m.ind_upper;
            } else {
              const auto p = detail::probe_slopes(absf, 1e2, 1e8);
              ix.lower_inf = m.ind_lower.value_or(p.lower);
              ix.upper_inf = m.ind_upper.value_or(p.upper);
              ix.probed_inf = true;
              ix.inconclusive_inf = p.inconclusive;
            }
            if (m.ind0_lower && m.ind0_upper) {
              ix.lower_0 = *m.ind0_lower;
              ix.upper_0 = *m.ind0_upper;
            } else {
              const auto p = detail::probe_slopes(absf, 1e-8, 1e-2);
              ix.lower_0 = m.ind0_lower.value_or(p.lower);
              ix.upper_0 = m.ind0_upper.value_or(p.upper);
              ix.probed_0 = true;
              ix.inconclusive_0 = p.inconclusive;
            }
          }
        },
        family_);
    return ix;
  }

  std::optional<PowerAsymptote> asymptote_inf() const {
    if (auto* s = std::get_if<StablePower>(&family_)) return PowerAsymptote{s->d, s->alpha};
    if (auto* qd = std::get_if<Quadratic>(&family_)) {
      return qd->sigma2 > 0.0 ? PowerAsymptote{0.5 * qd->sigma2, 2.0} : PowerAsymptote{qd->b, 1.0};
    }
    return std::nullopt;
  }

  std::optional<PowerAsymptote> asymptote_0() const {
    if (auto* s = std::get_if<StablePower>(&family_)) return PowerAsymptote{s->d, s->alpha};
    if (auto* qd = std::get_if<Quadratic>(&family_)) {
      return qd->b != 0.0 ? PowerAsymptote{qd->b, 1.0} : PowerAsymptote{0.5 * qd->sigma2, 2.0};
    }
    return std::nullopt;
  }

  bool operator==(const BranchingMechanism& o) const {
    if (family_.index() != o.family_.index()) return false;
    if (auto* a = std::get_if<StablePower>(&family_)) return *a == std::get<StablePower>(o.family_);
    if (auto* a = std::get_if<Quadratic>(&family_)) return *a == std::get<Quadratic>(o.family_);
    return false;  // custom handles are not comparable
  }

 private:
  explicit BranchingMechanism(Family f) : family_(std::move(f)) {}
  Family family_;
};

// ===========================================================================
// Immigration mechanisms

/// Phi(q) = d' q^beta, beta in (0, 1].
struct StableImmigration {
  double dprime = 1.0;
  double beta = 0.5;
  bool operator==(const StableImmigration&) const = default;
};

/// Phi(q) = a log(1 + q / b).
struct GammaImmigration {
  double a = 1.0;
  double b = 1.0;
  bool operator==(const GammaImmigration&) const = default;
};

/// Phi(q) = scale * Gamma(beta + q) / (Gamma(beta) Gamma(q)).
struct LampertiStable {
  double beta = 0.5;
  double scale = 1.0;
  bool operator==(const LampertiStable&) const = default;
};

/// Phi(q) = mass * J(q), J(q) = E[1 - exp(-q X)] for the jump law X.
/// Default jumps are exponential with mean one, J(q) = q / (1 + q).
struct CompoundPoisson {
  double mass = 1.0;
  std::function<double(double)> jump_transform;
  double jump_mean = 1.0;
  bool default_jumps = true;
};

/// Phi identically zero.
struct ZeroImmigration {};

enum class Tri { Yes, No, Unknown };

struct CustomImmigration {
  std::function<double(double)> eval;
  double drift = 0.0;
  Tri finite_levy_mass = Tri::Unknown;
  std::optional<double> ind_lower;
  std::optional<double> ind_upper;
  std::optional<double> ind0_lower;
  std::optional<double> ind0_upper;
  double q_max = 1e300;
  std::string name = "custom";
};

class ImmigrationMechanism {
 public:
  using Family = std::variant<StableImmigration, GammaImmigration, LampertiStable,
                              CompoundPoisson, ZeroImmigration, CustomImmigration>;

  static ImmigrationMechanism stable(double dprime, double beta) {
    if (!(dprime > 0.0) || !std::isfinite(dprime)) {
      throw std::domain_error("stable immigration: d' must be > 0");
    }
    if (!(beta > 0.0 && beta <= 1.0)) {
      throw std::domain_error("stable immigration: beta must lie in (0, 1]");
    }
    return ImmigrationMechanism(StableImmigration{dprime, beta});
  }

  static ImmigrationMechanism gamma(double a, double b) {
    if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
      throw std::domain_error("gamma immigration: a and b must be > 0");
    }
    return ImmigrationMechanism(GammaImmigration{a, b});
  }

  static ImmigrationMechanism lamperti(double beta, double scale = 1.0) {
    if (!(beta > 0.0 && beta <= 1.0)) {
      throw std::domain_error("lamperti immigration: beta must lie in (0, 1]");
    }
    if (!(scale > 0.0) || !std::isfinite(scale)) {
      throw std::domain_error("lamperti immigration: scale must be > 0");
    }
    return ImmigrationMechanism(LampertiStable{beta, scale});
  }

  static ImmigrationMechanism compound_poisson(double mass) {
    if (!(mass > 0.0) || !std::isfinite(mass)) {
      throw std::domain_error("compound Poisson immigration: mass must be finite and > 0");
    }
    return ImmigrationMechanism(
        CompoundPoisson{mass, [](double q) { return q / (1.0 + q); }, 1.0, true});
  }

  /// Compound Poisson with a caller-supplied jump transform J (J(0) = 0, J -> 1).
  static ImmigrationMechanism compound_poisson(double mass, std::function<double(double)> jump,
                                               double jump_mean) {
    if (!(mass > 0.0) || !std::isfinite(mass)) {
      throw std::domain_error("compound Poisson immigration: mass must be finite and > 0");
    }
    if (!jump) throw std::invalid_argument("compound Poisson immigration: missing jump transform");
    return ImmigrationMechanism(CompoundPoisson{mass, std::move(jump), jump_mean, false});
  }

  static ImmigrationMechanism zero() { return ImmigrationMechanism(ZeroImmigration{}); }

  static ImmigrationMechanism custom(CustomImmigration c) {
    if (!c.eval) throw std::invalid_argument("custom immigration: missing evaluation handle");
    if (!(c.drift >= 0.0)) throw std::domain_error("custom immigration: drift must be >= 0");
    return ImmigrationMechanism(std::move(c));
  }

  const Family& family() const { return family_; }
  bool is_custom() const { return std::holds_alternative<CustomImmigration>(family_); }
  bool is_zero() const { return std::holds_alternative<ZeroImmigration>(family_); }

  double operator()(double q) const {
    detail::require_arg(q);
    if (q == 0.0) return 0.0;
    return std::visit(
        [q](const auto& m) -> double {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, StableImmigration>) {
            return m.dprime * std::pow(q, m.beta);
          } else if constexpr (std::is_same_v<T, GammaImmigration>) {
            return m.a * std::log1p(q / m.b);
          } else if constexpr (std::is_same_v<T, LampertiStable>) {
            // delta form: beta + q is never rounded
            return m.scale / (boost::math::tgamma_delta_ratio(q, m.beta) * boost::math::tgamma(m.beta));
          } else if constexpr (std::is_same_v<T, CompoundPoisson>) {
            return m.mass * m.jump_transform(q);
          } else if constexpr (std::is_same_v<T, ZeroImmigration>) {
            return 0.0;
          } else {
            if (q > m.q_max) throw std::domain_error("custom immigration: argument beyond valid range");
            return m.eval(q);
          }
        },
        family_);
  }

  /// Linear drift of the immigration subordinator.
  double drift() const {
    return std::visit(
        [](const auto& m) -> double {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, StableImmigration>) {
            return m.beta == 1.0 ? m.dprime : 0.0;
          } else if constexpr (std::is_same_v<T, LampertiStable>) {
            return m.beta == 1.0 ? m.scale : 0.0;
          } else if constexpr (std::is_same_v<T, CustomImmigration>) {
            return m.drift;
          } else {
            return 0.0;
          }
        },
        family_);
  }

  /// c * Phi, staying inside the same family.
  ImmigrationMechanism scaled(double c) const {
    if (!(c > 0.0) || !std::isfinite(c)) throw std::domain_error("scale factor must be > 0");
    return std::visit(
        [c](const auto& m) -> ImmigrationMechanism {
          using T = std::decay_t<decltype(m)>;
          T copy = m;
          if constexpr (std::is_same_v<T, StableImmigration>) {
            copy.dprime *= c;
          } else if constexpr (std::is_same_v<T, GammaImmigration>) {
            copy.a *= c;
          } else if constexpr (std::is_same_v<T, LampertiStable>) {
            copy.scale *= c;
          } else if constexpr (std::is_same_v<T, CompoundPoisson>) {
            copy.mass *= c;
          } else if constexpr (std::is_same_v<T, CustomImmigration>) {
            copy.eval = [f = m.eval, c](double q) { return c * f(q); };
            copy.drift *= c;
          }
          return ImmigrationMechanism(std::move(copy));
        },
        family_);
  }

  Indices indices() const {
    Indices ix;
    std::visit(
        [&](const auto& m) {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, StableImmigration>) {
            ix.lower_inf = ix.upper_inf = ix.lower_0 = ix.upper_0 = m.beta;
          } else if constexpr (std::is_same_v<T, GammaImmigration>) {
            ix.lower_inf = ix.upper_inf = 0.0;
            ix.lower_0 = ix.upper_0 = 1.0;
          } else if constexpr (std::is_same_v<T, LampertiStable>) {
            ix.lower_inf = ix.upper_inf = m.beta;
            ix.lower_0 = ix.upper_0 = 1.0;
          } else if constexpr (std::is_same_v<T, CompoundPoisson>) {
            ix.lower_inf = ix.upper_inf = 0.0;
            ix.lower_0 = ix.upper_0 = 1.0;
          } else if constexpr (std::is_same_v<T, ZeroImmigration>) {
            ix.lower_inf = ix.upper_inf = ix.lower_0 = ix.upper_0 = 0.0;
          } else {
            auto f = [this](double q) { return (*this)(q); };
            if (m.ind_lower && m.ind_upper) {
              ix.lower_inf = *m.ind_lower;
              ix.upper_inf = *m.ind_upper;
            } else {
              const auto p = detail::probe_slopes(f, 1e2, 1e8);
              ix.lower_inf = m.ind_lower.value_or(p.lower);
              ix.upper_inf = m.ind_upper.value_or(p.upper);
              ix.probed_inf = true;
              ix.inconclusive_inf = p.inconclusive;
            }
            if (m.ind0_lower && m.ind0_upper) {
              ix.lower_0 = *m.ind0_lower;
              ix.upper_0 = *m.ind0_upper;
            } else {
              const auto p = detail::probe_slopes(f, 1e-8, 1e-2);
              ix.lower_0 = m.ind0_lower.value_or(p.lower);
              ix.upper_0 = m.ind0_upper.value_or(p.upper);
              ix.probed_0 = true;
              ix.inconclusive_0 = p.inconclusive;
            }
          }
        },
        family_);
    return ix;
  }

  /// Leading power term at infinity; empty for slowly varying or unknown tails.
  std::optional<PowerAsymptote> asymptote_inf() const {
    if (auto* s = std::get_if<StableImmigration>(&family_)) return PowerAsymptote{s->dprime, s->beta};
    if (auto* l = std::get_if<LampertiStable>(&family_)) {
      return PowerAsymptote{l->scale / boost::math::tgamma(l->beta), l->beta};
    }
    if (auto* cp = std::get_if<CompoundPoisson>(&family_)) return PowerAsymptote{cp->mass, 0.0};
    return std::nullopt;
  }

  std::optional<PowerAsymptote> asymptote_0() const {
    if (auto* s = std::get_if<StableImmigration>(&family_)) return PowerAsymptote{s->dprime, s->beta};
    if (auto* g = std::get_if<GammaImmigration>(&family_)) return PowerAsymptote{g->a / g->b, 1.0};
    if (auto* l = std::get_if<LampertiStable>(&family_)) return PowerAsymptote{l->scale, 1.0};
    if (auto* cp = std::get_if<CompoundPoisson>(&family_)) {
      return PowerAsymptote{cp->mass * cp->jump_mean, 1.0};
    }
    return std::nullopt;
  }

  bool operator==(const ImmigrationMechanism& o) const {
    if (family_.index() != o.family_.index()) return false;
    return std::visit(
        [&o](const auto& m) -> bool {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, CompoundPoisson>) {
            const auto& other = std::get<CompoundPoisson>(o.family_);
            return m.default_jumps && other.default_jumps && m.mass == other.mass;
          } else if constexpr (std::is_same_v<T, ZeroImmigration>) {
            return true;
          } else if constexpr (std::is_same_v<T, CustomImmigration>) {
            return false;
          } else {
            return m == std::get<T>(o.family_);
          }
        },
        family_);
  }

 private:
  explicit ImmigrationMechanism(Family f) : family_(std::move(f)) {}
  Family family_;
};

// ===========================================================================
// Structural checks

/// Grey's condition: integral of 1/Psi from theta to infinity is finite.
inline Verdict grey_check(const BranchingMechanism& psi) {
  const double theta = psi.theta();
  auto f = [&psi](double q) { return 1.0 / psi(q); };
  const auto r = numerics::improper_integral(f, theta, numerics::Direction::Up);
  Evidence e;
  e.add("theta", theta);
  e.append(r.evidence, "grey.");
  switch (r.status) {
    case numerics::Convergence::Finite:
      e.add("integral", r.value());
      return Verdict::yes(std::move(e));
    case numerics::Convergence::Infinite:
      return Verdict::no(std::move(e));
    default:
      return Verdict::inconclusive(std::move(e));
  }
}

/// Conservativity: integral of 1/|Psi| over (0, eps] diverges.
inline Verdict conservativity_check(const BranchingMechanism& psi) {
  const double root = psi.largest_root();
  const double eps = root > 0.0 ? 0.5 * root : psi.theta();
  auto f = [&psi](double q) { return 1.0 / std::fabs(psi(q)); };
  const auto r = numerics::improper_integral(f, eps, numerics::Direction::Down);
  Evidence e;
  e.add("eps", eps);
  e.append(r.evidence, "conservative.");
  switch (r.status) {
    case numerics::Convergence::Infinite:
      return Verdict::yes(std::move(e));
    case numerics::Convergence::Finite:
      e.add("integral", r.value());
      e.note("non-conservative: explosion in finite time possible");
      return Verdict::no(std::move(e));
    default:
      return Verdict::inconclusive(std::move(e));
  }
}

/// Phi is the exponent of a compound Poisson process: no drift and bounded.
inline Verdict is_compound_poisson(const ImmigrationMechanism& phi) {
  Evidence e;
  const double drift = phi.drift();
  e.add("drift", drift);
  if (const auto* c = std::get_if<CustomImmigration>(&phi.family());
      c && c->finite_levy_mass != Tri::Unknown) {
    e.note("declared finite_levy_mass");
    return Verdict::from_bool(drift == 0.0 && c->finite_levy_mass == Tri::Yes, std::move(e));
  }
  if (drift > 0.0) return Verdict::no(std::move(e));
  const double p4 = phi(1e4), p6 = phi(1e6), p8 = phi(1e8);
  e.add("phi(1e4)", p4).add("phi(1e6)", p6).add("phi(1e8)", p8);
  auto rel = [](double a, double b) {
    return b == 0.0 ? (a == 0.0 ? 0.0 : numerics::kInf) : std::fabs(b - a) / std::fabs(b);
  };
  const bool bounded = std::isfinite(p8) && rel(p4, p6) < 1e-3 && rel(p6, p8) < 1e-3;
  return Verdict::from_bool(bounded, std::move(e));
}

}  // namespace cbi
