#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "gbm/oracles.hpp"

using namespace gbm;

namespace {

McConfig quick(std::uint64_t n, std::int64_t steps, std::uint64_t seed = 11) {
  McConfig cfg;
  cfg.n_samples = n;
  cfg.steps = steps;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("regularized incomplete gamma against reference values") {
  // references computed with mpmath at 30 digits
  struct Ref {
    double s, x, q;
  };
  const Ref refs[] = {
      {0.5, 0.1, 0.65472084601857702},   {0.5, 1.0, 0.15729920705028513},
      {1.0, 1.0, 0.36787944117144232},   {1.0, 0.25, 0.77880078307140487},
      {2.0, 0.5, 0.90979598956895014},   {2.0, 3.0, 0.19914827347145577},
      {2.5, 7.0, 0.015609416100266915},  {5.0, 2.0, 0.94734698265628884},
      {10.0, 10.0, 0.45792971447185221}, {0.25, 1e-3, 0.80384830161727346},
      {3.0, 50.0, 2.509303552201057e-19}, {1.5, 0.75, 0.68227033033621257},
  };
  for (const auto& r : refs) {
    CHECK(gamma_q(r.s, r.x) == doctest::Approx(r.q).epsilon(1e-12));
    CHECK(gamma_p(r.s, r.x) == doctest::Approx(1.0 - r.q).epsilon(1e-10));
  }
}

TEST_CASE("incomplete gamma basics") {
  CHECK(gamma_p(2.0, 0.0) == 0.0);
  CHECK(gamma_q(2.0, 0.0) == 1.0);
  for (double s : {0.3, 1.0, 4.5}) {
    double prev = -1.0;
    for (double x : {0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 20.0}) {
      const double p = gamma_p(s, x);
      CHECK(p + gamma_q(s, x) == doctest::Approx(1.0).epsilon(1e-13));
      CHECK(p > prev);  // strictly increasing in x
      prev = p;
    }
  }
  CHECK_THROWS_AS(gamma_p(0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(gamma_q(1.0, -1.0), std::invalid_argument);
}

TEST_CASE("dufresne cdf is the upper gamma tail") {
  const GammaLawSpec law{2.0};
  CHECK(dufresne_cdf(0.5, law) == doctest::Approx(std::exp(-1.0)).epsilon(1e-13));
  CHECK(dufresne_cdf(1e9, law) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(dufresne_cdf(1e-9, law) == doctest::Approx(0.0).epsilon(1e-12));
  double prev = 0.0;
  for (double x = 0.05; x < 50.0; x *= 1.4) {
    const double f = dufresne_cdf(x, law);
    CHECK(f >= prev);
    prev = f;
  }
  CHECK_THROWS_AS(dufresne_cdf(0.0, law), std::invalid_argument);
  CHECK_THROWS_AS(dufresne_cdf(1.0, GammaLawSpec{-1.0}), std::invalid_argument);
}

TEST_CASE("dufresne ks check passes and rejects controls") {
  const GammaLawSpec law{2.0};
  const auto cfg = quick(20000, 2048);
  const auto ks = dufresne_ks_check(law, 20.0, cfg);
  CHECK(ks.pass);
  CHECK(ks.statistic < ks.threshold);

  // wrong oracle index fails decisively
  const auto wrong = dufresne_ks_check_against(GammaLawSpec{4.0}, 2.0, 20.0, cfg);
  CHECK_FALSE(wrong.pass);
  CHECK(wrong.statistic > 0.2);

  // 10% perturbation of mu also fails
  const auto perturbed =
      dufresne_ks_check_against(GammaLawSpec{2.2}, 2.0, 20.0, quick(100000, 2048));
  CHECK_FALSE(perturbed.pass);

  CHECK(dufresne_default_horizon(2.0) == doctest::Approx(5.0));
  CHECK_THROWS_AS(dufresne_ks_check(law, 0.0, cfg), std::invalid_argument);
  auto tiny = cfg;
  tiny.n_samples = 1;
  CHECK_THROWS_AS(dufresne_ks_check(law, 20.0, tiny), std::invalid_argument);
  auto underpowered = cfg;
  underpowered.n_samples = 999;
  CHECK_THROWS_AS(dufresne_ks_check(law, 20.0, underpowered),
                  std::invalid_argument);
}

TEST_CASE("yor closed form fixed values") {
  CHECK(yor_closed_form(0.0, 1.0) == 1.0);
  CHECK(yor_closed_form(0.0, 4.0) == doctest::Approx(0.5).epsilon(1e-15));
  // (1/sqrt(2)) exp(-(asinh 1)^2 / 2), frozen at build time
  CHECK(yor_closed_form(1.0, 1.0) ==
        doctest::Approx(0.4795134714688156).epsilon(1e-14));
  CHECK(yor_closed_form(2.0, 0.5) ==
        doctest::Approx(0.078690821945218688).epsilon(1e-14));
  // even in u
  for (double u : {0.3, 1.0, 2.7}) {
    CHECK(yor_closed_form(u, 1.7) ==
          doctest::Approx(yor_closed_form(-u, 1.7)).epsilon(1e-15));
  }
  CHECK_THROWS_AS(yor_closed_form(0.0, 0.0), std::invalid_argument);
}

TEST_CASE("yor monte carlo check agrees with the closed form") {
  const auto cfg = quick(100000, 1024, 8);
  const auto r0 = yor_mc_check(0.0, 1.0, cfg);
  CHECK(r0.pass);
  CHECK(r0.rhs.mean == 1.0);
  const auto r4 = yor_mc_check(0.0, 4.0, cfg);
  CHECK(r4.pass);
  CHECK(r4.rhs.mean == doctest::Approx(0.5));
  const auto r1 = yor_mc_check(1.0, 1.0, cfg);
  CHECK(r1.pass);

  // the estimator depends on u only through u^2, so u and -u coincide
  const auto plus = yor_mc_check(1.0, 1.0, cfg);
  const auto minus = yor_mc_check(-1.0, 1.0, cfg);
  CHECK(plus.lhs.mean == minus.lhs.mean);
  CHECK(plus.rhs.mean == minus.rhs.mean);
}

TEST_CASE("perturbed yor oracle fails at scale") {
  // 10% shift of the closed form must be rejected at n = 10^6
  const auto cfg = quick(1000000, 1024, 8);
  const auto bad = yor_mc_check_scaled(1.0, 1.0, 1.1, cfg);
  CHECK_FALSE(bad.pass);
  CHECK(std::abs(bad.z_score) > 10.0);
}
