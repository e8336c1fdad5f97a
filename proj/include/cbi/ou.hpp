#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "cbi/cutout.hpp"
#include "cbi/random.hpp"

namespace cbi {

/// OU process driven by a strictly stable Levy process of index alpha.
struct StableOUSpec {
  double alpha = 2.0;
  double beta = 0.5;  // 1 - 1/alpha
  double gamma_ou = 1.0;

  static StableOUSpec make(double alpha, double gamma_ou = 1.0) {
    if (!(alpha > 0.0 && alpha <= 2.0)) throw std::domain_error("alpha must lie in (0, 2]");
    if (!(gamma_ou > 0.0)) throw std::domain_error("mean-reversion rate must be > 0");
    return {alpha, 1.0 - 1.0 / alpha, gamma_ou};
  }
};

enum class OuClass { TrivialPoint, CutoutSet };

inline constexpr std::string_view to_string(OuClass c) {
  return c == OuClass::TrivialPoint ? "TrivialPoint" : "CutoutSet";
}

struct OuClassification {
  OuClass cls = OuClass::TrivialPoint;
  bool recurrent = false;
  std::optional<double> dim_theory;   // stated Hausdorff dimension, 1/alpha
  std::optional<double> dim_density;  // 1 - lim z mu_bar(z) = beta, read off the cutting density
};

inline OuClassification ou_classify(double alpha) {
  const auto s = StableOUSpec::make(alpha);
  if (alpha <= 1.0) return {};
  return {OuClass::CutoutSet, true, 1.0 / alpha, s.beta};
}

namespace ou_detail {
inline StableOUSpec require_cutout(double alpha) {
  const auto s = StableOUSpec::make(alpha);
  if (alpha <= 1.0) throw std::domain_error("alpha <= 1: zero set is {0}, no cutting measure");
  return s;
}
}  // namespace ou_detail

/// (1 - beta) e^z / (e^z - 1)^2.
inline double cutting_density(double z, double alpha) {
  const auto s = ou_detail::require_cutout(alpha);
  if (!(z > 0.0)) throw std::domain_error("cutting density needs z > 0");
  const double em1 = std::expm1(z);
  if (z > 350.0) return (1.0 - s.beta) * std::exp(-z);
  return (1.0 - s.beta) * (em1 + 1.0) / (em1 * em1);
}

/// Mass of (z, inf): (1 - beta) / (e^z - 1).
inline double cutting_tail(double z, double alpha) {
  const auto s = ou_detail::require_cutout(alpha);
  if (!(z > 0.0)) throw std::domain_error("cutting tail needs z > 0");
  return (1.0 - s.beta) / std::expm1(z);
}

/// Shape of the Levy tail of the associated subordinator, with C = 1.
inline double levy_tail_shape(double x, double alpha) {
  const auto s = ou_detail::require_cutout(alpha);
  if (!(x > 0.0)) throw std::domain_error("Levy tail needs x > 0");
  return std::pow(std::expm1(x), -(1.0 - s.beta));
}

inline DurationSampler ou_duration_sampler(double alpha, double eps) {
  const auto s = ou_detail::require_cutout(alpha);
  return DurationSampler(InverseExpm1Tail{1.0 - s.beta}, eps);
}

inline UncoveredSet sample_ou_cutout(double alpha, double T, double eps, std::uint64_t seed) {
  return sample_cutout(ou_duration_sampler(alpha, eps), T, seed);
}

/// Samples (t, x) from dt (1-beta) x^-2 dx on t in [1, e^log_tmax], restricted
/// to the region where z = log(1 + x/t) >= z_min, and returns the z values.
/// The t-marginal of the restricted measure is proportional to 1/t.
inline std::vector<double> pushforward_samples(double alpha, std::size_t n, double z_min, std::uint64_t seed,
                                               double log_tmax = 10.0) {
  ou_detail::require_cutout(alpha);
  if (!(z_min > 0.0)) throw std::domain_error("pushforward needs z_min > 0");
  Rng rng(seed);
  const double x_scale = std::expm1(z_min);
  std::vector<double> z(n);
  for (auto& v : z) {
    const double t = std::exp(log_tmax * rng.uniform());
    const double x = t * x_scale / rng.uniform_pos();
    v = std::log1p(x / t);
  }
  return z;
}

}  // namespace cbi
