#include <catch_amalgamated.hpp>

#include <cmath>
#include <thread>
#include <utility>
#include <vector>

#include "cbi/zeroset.hpp"

using namespace cbi;
using Catch::Approx;

namespace {

const auto kFeller = BranchingMechanism::stable(1, 2);

std::vector<std::pair<BranchingMechanism, ImmigrationMechanism>> transient_pairs() {
  return {{kFeller, ImmigrationMechanism::stable(1, 0.5)},
          {kFeller, ImmigrationMechanism::gamma(2, 1)},
          {BranchingMechanism::stable(1, 1.5), ImmigrationMechanism::stable(1, 0.3)},
          {BranchingMechanism::quadratic(-1, 2), ImmigrationMechanism::stable(0.5, 1)},
          {BranchingMechanism::stable(2, 1.8), ImmigrationMechanism::stable(1, 0.5)}};
}

// Trapezoid rule in s = log t; exponentially accurate for smooth decaying integrands.
template <class F>
double log_trapezoid(F&& f, double s_lo, double s_hi, double h) {
  double acc = 0.0;
  for (double s = s_lo; s <= s_hi; s += h) acc += f(std::exp(s)) * std::exp(s);
  return acc * h;
}

}  // namespace

TEST_CASE("Laplace exponent examples") {
  const auto phi = ImmigrationMechanism::stable(0.5, 1);
  CHECK(laplace_exponent(kFeller, phi, 1.0) == Approx(1.0 / std::sqrt(M_PI)).epsilon(1e-6));
  CHECK(laplace_exponent(kFeller, phi, 4.0) == Approx(2.0 / std::sqrt(M_PI)).epsilon(1e-6));
  for (double q : {0.01, 0.3, 30.0, 1e3}) {
    CHECK(laplace_exponent(kFeller, phi, q) == Approx(std::sqrt(q / M_PI)).epsilon(1e-6));
  }
}

TEST_CASE("heavy zero set has a positive drift") {
  // L(q)^-1 = e^2 int e^{-qt - 2 sqrt t} dt, so L(q)/q tends to e^-2.
  const auto phi = ImmigrationMechanism::stable(1, 0.5);
  const double q = 1e6;
  CHECK(laplace_exponent(kFeller, phi, q) / q == Approx(std::exp(-2.0)).epsilon(0.01));
  const auto s = summarize_subordinator(kFeller, phi, {1e4, 1e5, 1e6});
  CHECK(s.drift_estimate == Approx(std::exp(-2.0)).epsilon(0.01));
  CHECK(s.killed.is_yes());
}

TEST_CASE("self-similar pairs give a stable subordinator") {
  for (const auto& [alpha, d, dp] : std::vector<std::tuple<double, double, double>>{
           {2.0, 1.0, 0.5}, {1.5, 1.0, 0.25}, {1.8, 1.0, 0.2}, {1.3, 2.0, 0.3}}) {
    const auto psi = BranchingMechanism::stable(d, alpha);
    const auto phi = ImmigrationMechanism::stable(dp, alpha - 1.0);
    const double g = selfsimilar_index(alpha, d, dp);
    CAPTURE(alpha, d, dp);
    const auto s = summarize_subordinator(psi, phi, {1.0, 10.0, 100.0});
    CHECK(s.gamma_fit.slope == Approx(g).margin(0.01));
    for (std::size_t i = 0; i + 1 < s.L_samples.size(); ++i) {
      const double q1 = s.L_samples[i].first, q2 = s.L_samples[i + 1].first;
      const double local = std::log(s.L_samples[i + 1].second / s.L_samples[i].second) / std::log(q2 / q1);
      CHECK(local == Approx(g).margin(0.01));
    }
    CHECK(s.killed.is_no());
  }
}

TEST_CASE("Laplace exponent is increasing and concave") {
  for (const auto& [psi, phi] : transient_pairs()) {
    const auto qs = numerics::logspace(0.01, 100.0, 9);
    std::vector<double> L;
    for (double q : qs) L.push_back(laplace_exponent(psi, phi, q));
    for (std::size_t i = 1; i < L.size(); ++i) CHECK(L[i] > L[i - 1]);
    for (std::size_t i = 1; i + 1 < qs.size(); ++i) {
      const double lam = (qs[i + 1] - qs[i]) / (qs[i + 1] - qs[i - 1]);
      CHECK(L[i] >= (lam * L[i - 1] + (1.0 - lam) * L[i + 1]) * (1.0 - 1e-8));
    }
  }
}

TEST_CASE("killed iff transient") {
  for (const auto& [psi, phi] : transient_pairs()) {
    REQUIRE(classify_zero_state(psi, phi).zero_class == ZeroClass::Transient);
    CHECK(laplace_exponent(psi, phi, 0.0) > 0.0);
  }
  for (double alpha : {1.3, 1.5, 1.8, 2.0}) {
    for (double ratio : {0.25, 0.5, 0.75}) {
      const auto psi = BranchingMechanism::stable(1, alpha);
      const auto phi = ImmigrationMechanism::stable(ratio * (alpha - 1.0), alpha - 1.0);
      REQUIRE(classify_zero_state(psi, phi).zero_class == ZeroClass::Recurrent);
      CHECK(laplace_exponent(psi, phi, 0.0) == 0.0);
    }
  }
}

TEST_CASE("Laplace exponent errors") {
  CHECK_THROWS_AS(laplace_exponent(kFeller, ImmigrationMechanism::stable(1, 1), 1.0), std::domain_error);
  CHECK_THROWS_AS(laplace_exponent(kFeller, ImmigrationMechanism::stable(0.5, 1), -1.0), std::domain_error);
  CHECK_THROWS_AS(laplace_exponent(BranchingMechanism::quadratic(1, 0), ImmigrationMechanism::stable(1, 0.5), 1.0),
                  std::domain_error);
}

TEST_CASE("last zero law for the heavy Feller pair") {
  const GzeroLaw law(kFeller, ImmigrationMechanism::stable(1, 0.5));
  CHECK(law.k() == Approx(0.5 * std::exp(2.0)).epsilon(1e-8));  // k uses W anchored at v_1
  CHECK(law.density(1.0) == Approx(2.0 * std::exp(-2.0)).epsilon(1e-8));
  CHECK(gzero_density(kFeller, ImmigrationMechanism::stable(1, 0.5), 1.0) == Approx(0.270671).epsilon(1e-5));
  CHECK(law.tail(1.0) == Approx(3.0 * std::exp(-2.0)).epsilon(1e-8));
  for (double t : {0.01, 0.3, 4.0, 50.0}) {
    const double r = 2.0 * std::sqrt(t);
    CHECK(law.density(t) == Approx(2.0 * std::exp(-r)).epsilon(1e-8));
    CHECK(law.cdf(t) == Approx(1.0 - (1.0 + r) * std::exp(-r)).epsilon(1e-8));
  }
  const std::vector<double> ts{4.0, 0.01, 1.0, 0.0, 50.0};
  const auto many = law.cdf(ts);
  for (std::size_t i = 0; i < ts.size(); ++i) CHECK(many[i] == Approx(law.cdf(ts[i])).margin(1e-9));

  // Median: (1 + r) e^-r = 1/2 with r = 2 sqrt t, solved by bisection.
  double lo = 0.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    ((1.0 + mid) * std::exp(-mid) > 0.5 ? lo : hi) = mid;
  }
  const double median = 0.25 * lo * lo;
  CHECK(law.quantile(0.5) == Approx(median).epsilon(1e-7));
}

TEST_CASE("supercritical branching: closed-form last zero law") {
  // Psi = q^2 - q, Phi = q/2: exp(W(t)) = sqrt((e-1)/(e^t-1)), so
  // P[g > t] = (2/pi) atan((e^t-1)^-1/2) and L(0) = 1/(pi sqrt(e-1)).
  const auto psi = BranchingMechanism::quadratic(-1, 2);
  const auto phi = ImmigrationMechanism::stable(0.5, 1);
  CHECK(laplace_exponent(psi, phi, 0.0) == Approx(1.0 / (M_PI * std::sqrt(M_E - 1.0))).epsilon(1e-7));
  const GzeroLaw law(psi, phi);
  for (double t : {0.1, 1.0, 5.0, 30.0, 60.0, 200.0}) {
    CAPTURE(t);
    const double expect = 2.0 / M_PI * std::atan(1.0 / std::sqrt(std::expm1(t)));
    CHECK(law.tail(t) == Approx(expect).epsilon(1e-6));
    const double dens = std::sqrt((M_E - 1.0) / std::expm1(t)) / (M_PI * std::sqrt(M_E - 1.0));
    CHECK(law.density(t) == Approx(dens).epsilon(1e-6));
  }
  const auto many = law.cdf(std::vector<double>{200.0, 1.0, 60.0});
  CHECK(many[0] == Approx(law.cdf(200.0)).margin(1e-12));
  CHECK(many[1] == Approx(law.cdf(1.0)).margin(1e-9));
  CHECK(many[2] == Approx(law.cdf(60.0)).margin(1e-12));
  // Small q puts the anchor time past the root floor.
  CHECK(laplace_exponent(psi, phi, 0.01) > laplace_exponent(psi, phi, 0.0));
}

TEST_CASE("last zero density integrates to one") {
  for (const auto& [psi, phi] : transient_pairs()) {
    const GzeroLaw law(psi, phi);
    const double mass = log_trapezoid([&](double t) { return law.density(t); }, -30.0, 12.0, 0.05);
    CHECK(mass == Approx(1.0).margin(1e-6));
    CHECK(law.tail(1e-8) == Approx(1.0).margin(1e-3));
  }
}

TEST_CASE("last zero law is undefined for unbounded or trivial zero sets") {
  try {
    GzeroLaw(kFeller, ImmigrationMechanism::stable(0.5, 1));
    FAIL("expected an error");
  } catch (const std::domain_error& e) {
    CHECK(std::string(e.what()).find("unbounded zero set") != std::string::npos);
  }
  CHECK_THROWS_AS(GzeroLaw(kFeller, ImmigrationMechanism::stable(1, 1)), std::domain_error);
  CHECK_THROWS_AS(GzeroLaw(BranchingMechanism::quadratic(1, 0), ImmigrationMechanism::stable(1, 0.5)),
                  std::domain_error);
}

TEST_CASE("normalisation is computed once under concurrent readers") {
  const GzeroLaw law(kFeller, ImmigrationMechanism::gamma(2, 1));
  std::vector<double> ks(8, 0.0);
  std::vector<std::thread> pool;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    pool.emplace_back([&, i] {
      const GzeroLaw copy = law;
      ks[i] = copy.k();
    });
  }
  for (auto& t : pool) t.join();
  for (double k : ks) CHECK(k == ks.front());
}

TEST_CASE("self-similar index") {
  CHECK(selfsimilar_index(2.0, 1.0, 0.5) == Approx(0.5));
  CHECK(selfsimilar_index(1.5, 1.0, 0.25) == Approx(0.5));
  CHECK(selfsimilar_index(1.8, 1.0, 1e-12) == Approx(1.0));
  CHECK(selfsimilar_index(2.0, 1.0, 0.0) == 1.0);
  try {
    selfsimilar_index(2.0, 1.0, 1.0);
    FAIL("expected an error");
  } catch (const std::domain_error& e) {
    CHECK(std::string(e.what()) == "polar regime, no subordinator");
  }
  CHECK_THROWS_AS(selfsimilar_index(2.5, 1.0, 0.1), std::domain_error);
}

TEST_CASE("Lamperti subordinator exponent") {
  CHECK(lamperti_kappa(1.0, 0.5) == Approx(0.5).epsilon(1e-14));
  for (double beta : {0.2, 0.5, 0.8}) CHECK(lamperti_kappa(1.0, beta) == Approx(1.0 - beta).epsilon(1e-13));
  CHECK(lamperti_kappa(1e-10, 0.5) < 1e-9);
  CHECK(lamperti_kappa(0.0, 0.5) == 0.0);
  for (double beta : {0.3, 0.5, 0.7}) {
    const double slope = std::log(lamperti_kappa(2e6, beta) / lamperti_kappa(1e6, beta)) / std::log(2.0);
    CHECK(slope == Approx(1.0 - beta).epsilon(0.01));
  }
  CHECK_THROWS_AS(lamperti_kappa(-1.0, 0.5), std::domain_error);
  CHECK_THROWS_AS(lamperti_kappa(1.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(lamperti_kappa(1.0, 1.0), std::domain_error);
}
