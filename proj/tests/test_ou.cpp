#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "cbi/ou.hpp"
#include "cbi/stats.hpp"
#include "cbi/zeroset.hpp"

using namespace cbi;
using Catch::Approx;

TEST_CASE("OU classification") {
  for (double a : {0.3, 0.7, 1.0}) {
    const auto c = ou_classify(a);
    CHECK(c.cls == OuClass::TrivialPoint);
    CHECK_FALSE(c.dim_theory);
  }
  const auto bm = ou_classify(2.0);
  CHECK(bm.cls == OuClass::CutoutSet);
  CHECK(bm.recurrent);
  CHECK(*bm.dim_theory == 0.5);
  CHECK(*bm.dim_density == 0.5);
  CHECK(*ou_classify(1.8).dim_theory == Approx(0.5556).epsilon(1e-4));
  CHECK(*ou_classify(1.8).dim_density == Approx(1.0 - 1.0 / 1.8));
  for (double a : {0.0, -1.0, 2.5, std::nan("")}) CHECK_THROWS_AS(ou_classify(a), std::domain_error);
  CHECK_THROWS_AS(StableOUSpec::make(1.5, 0.0), std::domain_error);
  CHECK(StableOUSpec::make(1.5).beta == Approx(1.0 / 3.0));
}

TEST_CASE("cutting density examples") {
  CHECK(cutting_density(std::log(2.0), 2.0) == Approx(1.0).epsilon(1e-14));
  CHECK(cutting_tail(std::log(2.0), 2.0) == Approx(0.5).epsilon(1e-14));
  CHECK_THROWS_AS(cutting_density(0.0, 2.0), std::domain_error);
  CHECK_THROWS_AS(cutting_density(1.0, 0.8), std::domain_error);
  CHECK_THROWS_AS(cutting_tail(-1.0, 1.5), std::domain_error);
}

TEST_CASE("cutting tail is the integral of the density") {
  for (double alpha : {1.2, 1.5, 2.0}) {
    for (double z : {1e-3, 0.1, 1.0, 5.0}) {
      const double body = numerics::integrate_log([&](double s) { return cutting_density(s, alpha); }, z, z + 60.0, 1e-12);
      const double rest = (1.0 / alpha) * std::exp(-(z + 60.0));
      CHECK(body + rest == Approx(cutting_tail(z, alpha)).epsilon(1e-9));
    }
  }
}

TEST_CASE("cutting density asymptotics") {
  for (double alpha : {1.3, 2.0}) {
    const double c = 1.0 / alpha;  // 1 - beta
    CHECK(cutting_density(40.0, alpha) * std::exp(40.0) == Approx(c).epsilon(1e-12));
    CHECK(cutting_density(400.0, alpha) * std::exp(400.0) == Approx(c).epsilon(1e-12));
    CHECK(cutting_density(1e-6, alpha) * 1e-12 == Approx(c).epsilon(1e-5));
  }
}

TEST_CASE("OU duration sampler follows the cutting tail") {
  const double eps = 1e-3;
  for (double alpha : {1.5, 2.0}) {
    const auto s = ou_duration_sampler(alpha, eps);
    CHECK(s.rate() == Approx(cutting_tail(eps, alpha)));
    const auto x = sample_durations(s, 10000, 5);
    const auto ks = stats::ks_one_sample(x, [&](double z) { return 1.0 - cutting_tail(z, alpha) / cutting_tail(eps, alpha); });
    CHECK(ks.statistic < 0.02);
  }
  CHECK_THROWS_AS(ou_duration_sampler(1.0, eps), std::domain_error);
}

TEST_CASE("pushforward of dt x^-2 dx matches the cutting density") {
  const double z_min = 0.01;
  for (double alpha : {1.5, 1.8, 2.0}) {
    const auto z = pushforward_samples(alpha, 10000, z_min, 17);
    const auto ks = stats::ks_one_sample(z, [&](double v) {
      return v <= z_min ? 0.0 : 1.0 - cutting_tail(v, alpha) / cutting_tail(z_min, alpha);
    });
    CAPTURE(alpha, ks.statistic);
    CHECK(ks.statistic < 0.05);
  }
  CHECK_THROWS_AS(pushforward_samples(2.0, 10, 0.0, 1), std::domain_error);
}

TEST_CASE("Levy tail shape") {
  for (double alpha : {1.2, 1.5, 2.0}) {
    const auto x = numerics::logspace(1e-6, 20.0, 60);
    for (std::size_t i = 1; i < x.size(); ++i) CHECK(levy_tail_shape(x[i], alpha) < levy_tail_shape(x[i - 1], alpha));
    const double slope = std::log(levy_tail_shape(1e-5, alpha) / levy_tail_shape(1e-6, alpha)) / std::log(10.0);
    CHECK(slope == Approx(-1.0 / alpha).epsilon(0.02));
  }
}

TEST_CASE("Lamperti exponent has index 1/alpha at infinity") {
  for (double alpha : {1.2, 1.5, 1.8, 2.0}) {
    const double beta = 1.0 - 1.0 / alpha;
    const double slope = std::log(lamperti_kappa(1e7, beta) / lamperti_kappa(1e6, beta)) / std::log(10.0);
    CHECK(slope == Approx(1.0 / alpha).epsilon(0.01));
  }
}

TEST_CASE("Brownian OU zero set has box dimension 1/2") {
  const auto slopes = run_replicates(
      4, 3,
      [](std::size_t, std::uint64_t seed) {
        return statistics(sample_ou_cutout(2.0, 100.0, 1e-5, seed), dyadic_grid(3, 10)).dim_fit.slope;
      },
      1);
  CHECK(stats::mean(slopes) == Approx(0.5).margin(0.1));
}

TEST_CASE("OU zero set is unbounded") {
  const auto s = ou_duration_sampler(1.5, 1e-3);
  std::vector<double> frac;
  for (double T : {10.0, 20.0, 40.0, 80.0}) {
    const auto g = run_replicates(
        200, 8, [&](std::size_t, std::uint64_t seed) { return sample_cutout(s, T, seed).intervals.back().hi; }, 1);
    frac.push_back(stats::exceed_fraction(g, 0.9 * T));
  }
  CAPTURE(frac[0], frac[1], frac[2], frac[3]);
  CHECK(frac.back() >= frac.front());
  CHECK(frac.back() > 0.9);
}

TEST_CASE("OU cutouts are reproducible") {
  CHECK(sample_ou_cutout(1.7, 5.0, 1e-3, 9) == sample_ou_cutout(1.7, 5.0, 1e-3, 9));
  CHECK_THROWS_AS(sample_ou_cutout(0.9, 5.0, 1e-3, 9), std::domain_error);
}
