#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "cbi/classify.hpp"
#include "cbi/flow.hpp"
#include "cbi/mechanisms.hpp"
#include "cbi/numerics.hpp"
#include "cbi/random.hpp"

namespace cbi {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double length() const { return hi - lo; }
  bool operator==(const Interval&) const = default;
};

/// Z intersected with [0, T], as sorted disjoint closed intervals.
struct UncoveredSet {
  double horizon = 0.0;
  double eps = 0.0;
  std::uint64_t seed = 0;
  std::vector<Interval> intervals;

  bool operator==(const UncoveredSet&) const = default;

  static UncoveredSet full(double horizon, double eps, std::uint64_t seed = 0) {
    return UncoveredSet{horizon, eps, seed, {{0.0, horizon}}};
  }
};

// ---------------------------------------------------------------------------
// Cutting tails mu_bar(t) and conditional inverse transforms on [eps, inf).

/// mu_bar(t) = coeff * t^(-power).
struct PowerTail {
  double coeff = 1.0;
  double power = 1.0;

  double mu_bar(double t) const { return coeff * std::pow(t, -power); }
  /// t with mu_bar(t) = u * mu_bar(eps).
  double invert(double u, double eps) const {
    if (power == 1.0) return eps / u;
    if (power == 0.5) return eps / (u * u);
    return eps * std::pow(u, -1.0 / power);
  }
};

/// mu_bar(t) = coeff / (e^t - 1).
struct InverseExpm1Tail {
  double coeff = 1.0;

  double mu_bar(double t) const { return coeff / std::expm1(t); }
  double invert(double u, double eps) const { return std::log1p(std::expm1(eps) / u); }
};

/// mu_bar(t) = Phi(v_t) for a general pair, from a log-log table on
/// [eps, t_max] with a root-finding fallback beyond the table.
class TabulatedTail {
 public:
  TabulatedTail(const BranchingMechanism& psi, const ImmigrationMechanism& phi, double eps)
      : phi_(phi), flow_(std::make_shared<FlowSolver>(psi)) {
    mu_inf_ = phi_(flow_->terminal_value());
    constexpr int kPerOctave = 32;
    t_max_ = std::max(1e6, eps * 1e12);
    const int n = static_cast<int>(std::ceil(std::log2(t_max_ / eps) * kPerOctave)) + 1;
    log_t_.reserve(static_cast<std::size_t>(n));
    log_mu_.reserve(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
      const double t = eps * std::exp2(static_cast<double>(j) / kPerOctave);
      const double m = mu_bar(t);
      if (!(m > mu_inf_) || !(m > 0.0)) break;
      log_t_.push_back(std::log(t));
      log_mu_.push_back(std::log(m));
    }
    if (log_t_.empty()) throw std::domain_error("cutting tail vanishes at eps");
  }

  double mu_bar(double t) const { return phi_(flow_->v_from_infinity(t)); }
  double mu_inf() const { return mu_inf_; }

  double invert(double u, double eps) const {
    const double y = u * mu_bar(eps);
    if (y <= mu_inf_) return numerics::kInf;
    const double ly = std::log(y);
    if (ly >= log_mu_.front()) return eps;
    if (ly >= log_mu_.back()) {
      // log_mu_ is decreasing; find j with log_mu_[j] >= ly > log_mu_[j+1].
      auto it = std::upper_bound(log_mu_.begin(), log_mu_.end(), ly, std::greater<double>());
      const auto j = static_cast<std::size_t>(it - log_mu_.begin()) - 1;
      if (j + 1 >= log_mu_.size()) return std::exp(log_t_[j]);
      const double w = (ly - log_mu_[j]) / (log_mu_[j + 1] - log_mu_[j]);
      return std::exp(log_t_[j] + w * (log_t_[j + 1] - log_t_[j]));
    }
    auto h = [&](double s) { return std::log(mu_bar(std::exp(s)) - mu_inf_) - std::log(y - mu_inf_); };
    double lo = log_t_.back(), hi = lo + 1.0;
    while (h(hi) > 0.0) {
      lo = hi;
      hi += 2.0 * (hi - log_t_.back());
      if (hi > 700.0) return numerics::kInf;
    }
    return std::exp(numerics::bracketed_root(h, lo, hi, 1e-12));
  }

 private:
  ImmigrationMechanism phi_;
  std::shared_ptr<const FlowSolver> flow_;
  double mu_inf_ = 0.0;
  double t_max_ = 0.0;
  std::vector<double> log_t_;
  std::vector<double> log_mu_;
};

/// Draws cut lengths with tail mu_bar(t) / mu_bar(eps) on [eps, inf).
/// `rate()` is the Poisson intensity of cuts longer than eps per unit time.
class DurationSampler {
 public:
  using Tail = std::variant<PowerTail, InverseExpm1Tail, TabulatedTail>;

  DurationSampler(Tail tail, double eps, double scale = 1.0) : tail_(std::move(tail)), eps_(eps), scale_(scale) {
    if (!(eps_ > 0.0) || !std::isfinite(eps_)) throw std::domain_error("eps must be positive and finite");
    if (!(scale_ >= 0.0)) throw std::domain_error("tail scale must be >= 0");
    base_rate_ = std::visit([this](const auto& t) { return t.mu_bar(eps_); }, tail_);
    if (!std::isfinite(base_rate_)) throw std::domain_error("decrease eps not possible, tail infinite");
  }

  /// Sampler for the zero set of the CBI(psi, phi): mu_bar(t) = Phi(v_t).
  static DurationSampler for_pair(const BranchingMechanism& psi, const ImmigrationMechanism& phi, double eps) {
    bool closed = false;
    if (!classify_detail::grey_verdict(psi, closed).is_yes()) {
      throw std::domain_error("zero set is {0}: Grey's condition does not hold, no cutout");
    }
    if (phi.is_zero()) return DurationSampler(PowerTail{0.0, 1.0}, eps);
    const auto* si = std::get_if<StableImmigration>(&phi.family());
    std::optional<StablePower> sp;
    if (auto* s = std::get_if<StablePower>(&psi.family())) sp = *s;
    if (auto* q = std::get_if<Quadratic>(&psi.family()); q && q->b == 0.0) sp = StablePower{0.5 * q->sigma2, 2.0};
    if (si && sp) {
      const double a1 = sp->alpha - 1.0;
      const double p = si->beta / a1;
      return DurationSampler(PowerTail{si->dprime * std::pow(sp->d * a1, -p), p}, eps);
    }
    return DurationSampler(TabulatedTail(psi, phi, eps), eps);
  }

  double eps() const { return eps_; }
  double rate() const { return scale_ * base_rate_; }
  double mu_bar(double t) const {
    return scale_ * std::visit([t](const auto& tl) { return tl.mu_bar(t); }, tail_);
  }
  /// P[duration > t] for t >= eps.
  double conditional_tail(double t) const {
    if (t <= eps_) return 1.0;
    return std::visit([t](const auto& tl) { return tl.mu_bar(t); }, tail_) / base_rate_;
  }

  /// Same tail shape, intensity multiplied by c (immigration c * Phi).
  DurationSampler scaled(double c) const {
    if (!(c >= 0.0)) throw std::domain_error("scale factor must be >= 0");
    DurationSampler s = *this;
    s.scale_ *= c;
    return s;
  }

  double draw(Rng& rng) const {
    const double u = rng.uniform_pos();
    return std::visit([&](const auto& tl) { return tl.invert(u, eps_); }, tail_);
  }

 private:
  Tail tail_;
  double eps_;
  double scale_;
  double base_rate_ = 0.0;
};

inline std::vector<double> sample_durations(const DurationSampler& s, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> out(n);
  for (auto& x : out) x = s.draw(rng);
  return out;
}

// ---------------------------------------------------------------------------
// Cutout simulation.

inline constexpr double kMaxExpectedMarks = 1e8;

/// Sequential Poisson sweep of cut intervals ]t, t + zeta[. Births arrive with
/// exponential gaps, so the horizon can be extended without redrawing.
class CutoutStream {
 public:
  CutoutStream(const DurationSampler& sampler, std::uint64_t seed) : sampler_(sampler), rng_(seed), seed_(seed) {}

  /// Simulate all births up to `horizon` (non-decreasing across calls).
  void advance_to(double horizon) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw std::domain_error("horizon must be positive and finite");
    if (horizon < horizon_) throw std::invalid_argument("cutout horizon cannot shrink");
    const double rate = sampler_.rate();
    if ((horizon - horizon_) * rate > kMaxExpectedMarks) throw std::domain_error("eps too small for horizon");
    horizon_ = horizon;
    if (rate == 0.0) return;
    for (;;) {
      if (!pending_) {
        next_birth_ += rng_.exponential(rate);
        pending_ = true;
      }
      if (next_birth_ > horizon_) return;
      pending_ = false;
      ++marks_;
      const double t = next_birth_;
      if (t > frontier_) gaps_.push_back({frontier_, t});
      frontier_ = std::max(frontier_, t + sampler_.draw(rng_));
    }
  }

  double horizon() const { return horizon_; }
  double frontier() const { return frontier_; }
  std::uint64_t marks() const { return marks_; }
  /// True when the current horizon is itself covered.
  bool horizon_covered() const { return frontier_ > horizon_; }

  /// Last uncovered point in [0, horizon].
  double g_last() const {
    if (!horizon_covered()) return horizon_;
    return gaps_.empty() ? 0.0 : gaps_.back().hi;
  }

  UncoveredSet snapshot() const {
    UncoveredSet z{horizon_, sampler_.eps(), seed_, gaps_};
    if (z.intervals.empty() && frontier_ > 0.0) z.intervals.push_back({0.0, 0.0});
    if (frontier_ <= horizon_) z.intervals.push_back({frontier_, horizon_});
    return z;
  }

 private:
  const DurationSampler& sampler_;
  Rng rng_;
  std::uint64_t seed_;
  double horizon_ = 0.0;
  double next_birth_ = 0.0;
  bool pending_ = false;
  double frontier_ = 0.0;
  std::uint64_t marks_ = 0;
  std::vector<Interval> gaps_;
};

inline UncoveredSet sample_cutout(const DurationSampler& sampler, double T, std::uint64_t seed) {
  CutoutStream s(sampler, seed);
  s.advance_to(T);
  return s.snapshot();
}

inline UncoveredSet sample_cutout(const BranchingMechanism& psi, const ImmigrationMechanism& phi, double T,
                                  double eps, std::uint64_t seed) {
  return sample_cutout(DurationSampler::for_pair(psi, phi, eps), T, seed);
}

/// Exact intersection of uncovered sets on a common horizon.
inline UncoveredSet intersect(const std::vector<UncoveredSet>& sets) {
  if (sets.empty()) throw std::invalid_argument("intersect: empty list");
  UncoveredSet acc = sets.front();
  for (std::size_t k = 1; k < sets.size(); ++k) {
    const auto& b = sets[k];
    if (b.horizon != acc.horizon) throw std::invalid_argument("intersect: mismatched horizons");
    if (b.eps != acc.eps) throw std::invalid_argument("intersect: mismatched eps");
    std::vector<Interval> out;
    std::size_t i = 0, j = 0;
    const auto& x = acc.intervals;
    const auto& y = b.intervals;
    while (i < x.size() && j < y.size()) {
      const double lo = std::max(x[i].lo, y[j].lo);
      const double hi = std::min(x[i].hi, y[j].hi);
      if (lo <= hi) out.push_back({lo, hi});
      if (x[i].hi < y[j].hi) {
        ++i;
      } else {
        ++j;
      }
    }
    acc.intervals = std::move(out);
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Statistics.

struct BoxCount {
  double size = 0.0;
  std::uint64_t count = 0;
};

struct DimFit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_ = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

struct CutoutStatistics {
  double lebesgue = 0.0;
  std::vector<BoxCount> box_counts;
  DimFit dim_fit;
  double g_last = 0.0;
};

/// Number of grid cells [k delta, (k+1) delta) within [0, T) meeting the set.
inline std::uint64_t box_count(const UncoveredSet& z, double delta) {
  if (!(delta > 0.0)) throw std::domain_error("box size must be > 0");
  const auto max_cell = static_cast<std::int64_t>(std::ceil(z.horizon / delta)) - 1;
  std::int64_t last = -1;
  std::uint64_t n = 0;
  for (const auto& iv : z.intervals) {
    const auto a = std::min(static_cast<std::int64_t>(std::floor(iv.lo / delta)), max_cell);
    const auto b = std::min(static_cast<std::int64_t>(std::floor(iv.hi / delta)), max_cell);
    const auto from = std::max(a, last + 1);
    if (b >= from) n += static_cast<std::uint64_t>(b - from + 1);
    last = std::max(last, b);
  }
  return n;
}

/// Slope of log N(delta) against log(1/delta) with a 95% confidence interval.
inline DimFit fit_dimension(const std::vector<BoxCount>& counts) {
  std::vector<double> x, y;
  for (const auto& c : counts) {
    if (c.count == 0) continue;
    x.push_back(std::log(1.0 / c.size));
    y.push_back(std::log(static_cast<double>(c.count)));
  }
  DimFit d;
  if (x.size() < 2) return d;
  const auto fit = numerics::least_squares(x, y);
  d.slope = fit.slope;
  d.intercept = fit.intercept;
  d.stderr_ = fit.slope_stderr;
  double half = 0.0;
  if (x.size() > 2 && fit.slope_stderr > 0.0) {
    boost::math::students_t_distribution<double> st(static_cast<double>(x.size() - 2));
    half = boost::math::quantile(st, 0.975) * fit.slope_stderr;
  }
  d.ci_lo = d.slope - half;
  d.ci_hi = d.slope + half;
  return d;
}

inline CutoutStatistics statistics(const UncoveredSet& z, const std::vector<double>& grid_sizes) {
  for (std::size_t i = 0; i < grid_sizes.size(); ++i) {
    if (!(grid_sizes[i] > 0.0)) throw std::domain_error("statistics: grid sizes must be > 0");
    if (i > 0 && !(grid_sizes[i] < grid_sizes[i - 1])) {
      throw std::invalid_argument("statistics: grid sizes must be decreasing");
    }
    if (grid_sizes[i] < z.eps) throw std::invalid_argument("statistics: grid size below eps");
  }
  CutoutStatistics s;
  for (const auto& iv : z.intervals) s.lebesgue += iv.length();
  for (double d : grid_sizes) s.box_counts.push_back({d, box_count(z, d)});
  s.dim_fit = fit_dimension(s.box_counts);
  s.g_last = z.intervals.empty() ? 0.0 : z.intervals.back().hi;
  return s;
}

/// Dyadic grid 2^-k_lo, ..., 2^-k_hi.
inline std::vector<double> dyadic_grid(int k_lo, int k_hi) {
  std::vector<double> g;
  for (int k = k_lo; k <= k_hi; ++k) g.push_back(std::ldexp(1.0, -k));
  return g;
}

/// Dyadic box sizes between min(T/16, 1/8) and 64 eps. Cells much coarser than
/// 1 see the large-time regime, cells near eps see the truncation.
inline std::vector<double> default_grid(double T, double eps) {
  const double top = std::min(T / 16.0, 0.125);
  std::vector<double> g;
  for (int k = static_cast<int>(std::ceil(-std::log2(top))); std::ldexp(1.0, -k) >= 64.0 * eps; ++k) {
    g.push_back(std::ldexp(1.0, -k));
  }
  if (g.size() < 3) throw std::invalid_argument("eps too coarse for box counting below the horizon");
  return g;
}

/// Last zero g_inf per replicate. A replicate whose horizon is still uncovered
/// is extended (doubling) rather than clipped.
inline std::vector<double> empirical_gzero(const DurationSampler& sampler, std::size_t n, double T_max,
                                           std::uint64_t seed, unsigned threads = 0) {
  return run_replicates(
      n, seed,
      [&](std::size_t, std::uint64_t s) {
        CutoutStream st(sampler, s);
        double T = T_max;
        st.advance_to(T);
        while (!st.horizon_covered()) {
          T *= 2.0;
          st.advance_to(T);
        }
        return st.g_last();
      },
      threads);
}

inline std::vector<double> empirical_gzero(const BranchingMechanism& psi, const ImmigrationMechanism& phi,
                                           std::size_t n, double T_max, double eps, std::uint64_t seed,
                                           unsigned threads = 0) {
  const auto rep = classify_zero_state(psi, phi);
  if (rep.zero_class == ZeroClass::Recurrent) throw std::domain_error("g_inf undefined (unbounded zero set)");
  if (rep.zero_class != ZeroClass::Transient) {
    throw std::domain_error(std::string("g_inf undefined for zero class ") + std::string(to_string(rep.zero_class)));
  }
  return empirical_gzero(DurationSampler::for_pair(psi, phi, eps), n, T_max, seed, threads);
}

}  // namespace cbi
