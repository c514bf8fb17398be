#include <catch2/catch_amalgamated.hpp>

#include "mcd/eos.hpp"

using namespace mcd;

TEST_CASE("gamma-law density") {
  Constitutive c(2.0);
  CHECK(density(c, 1.0, 0.0) == Catch::Approx(1.0));
  CHECK(density(c, 4.0, 0.0) == Catch::Approx(2.0));
  Constitutive c53(5.0 / 3.0);
  CHECK(density(c53, 1.0, std::log(2.0)) == Catch::Approx(std::pow(2.0, -3.0 / 5.0)));
  CHECK_THROWS_AS(density(c, -1.0, 0.0), Error);
  try {
    density(c, 0.0, 0.0);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code == Err::NonPositivePressure);
  }
}

TEST_CASE("sound speed") {
  Constitutive c(2.0);
  CHECK(sound_speed(c, 1.0, 0.0) == Catch::Approx(std::sqrt(2.0)));
  Constitutive c53(5.0 / 3.0);
  CHECK(sound_speed(c53, 1.0, 0.0) == Catch::Approx(std::sqrt(5.0 / 3.0)));
  CHECK_THROWS_AS(Constitutive(1.0), Error);  // degenerate closure excluded

  // out-of-band state rejected
  Constitutive tight(2.0, 0.9, 1.1);
  CHECK_THROWS_AS(sound_speed(tight, 16.0, 0.0), Error);
}

TEST_CASE("hyperbolicity band and margin") {
  Constitutive c(2.0, 0.1, 10.0);
  FluidState u;
  u.p = 1.0;
  u.S = 0.0;  // rho = 1
  auto r = check_hyperbolicity(c, u);
  CHECK(r.ok);
  CHECK(r.margin == Catch::Approx(0.9));

  FluidState lo;
  lo.p = 0.01;
  lo.S = 0.0;  // rho = 0.1 exactly on the lower edge
  CHECK_FALSE(check_hyperbolicity(c, lo).ok);

  Constitutive c2(2.0, 0.1, 2.0);
  FluidState hi;
  hi.p = 9.0;
  hi.S = 0.0;  // rho = 3 = rho^* + 1
  CHECK_FALSE(check_hyperbolicity(c2, hi).ok);
}

TEST_CASE("a^2 rho = gamma p identity on a sweep") {
  Constitutive c(5.0 / 3.0);
  Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    const double p = rng.uniform(0.2, 5.0);
    const double S = rng.uniform(-1.0, 1.0);
    const double a = sound_speed(c, p, S);
    CHECK(std::abs(a * a * c.rho(p, S) - c.gamma * p) < 1e-12 * c.gamma * p);
  }
}

TEST_CASE("density monotone in p") {
  Constitutive c(5.0 / 3.0);
  const double S = 0.3;
  double prev = density(c, 0.05, S);
  for (int i = 1; i < 100; ++i) {
    const double p = 0.05 + 0.05 * i;
    const double cur = density(c, p, S);
    CHECK(cur > prev);
    prev = cur;
  }
}

TEST_CASE("closure derivative consistency") {
  Constitutive c(5.0 / 3.0);
  const double p = 1.3, S = -0.2, el = 1e-6;
  CHECK(c.rho_p(p, S) == Catch::Approx((c.rho(p + el, S) - c.rho(p - el, S)) / (2 * el)));
  CHECK(c.rho_S(p, S) == Catch::Approx((c.rho(p, S + el) - c.rho(p, S - el)) / (2 * el)));
  CHECK(c.rho_pp(p, S) ==
        Catch::Approx((c.rho_p(p + el, S) - c.rho_p(p - el, S)) / (2 * el)).epsilon(1e-5));
  CHECK(c.rho_pS(p, S) ==
        Catch::Approx((c.rho_p(p, S + el) - c.rho_p(p, S - el)) / (2 * el)).epsilon(1e-5));
}

TEST_CASE("tabulated closure is honored") {
  Constitutive c(1.4);
  c.table = TabulatedClosure{
      [](double p, double) { return 2.0 * p; },
      [](double, double) { return 2.0; },
      [](double, double) { return 0.0; },
      [](double, double) { return 0.0; },
      [](double, double) { return 0.0; },
      [](double p, double) { return p; },
  };
  CHECK(density(c, 3.0, 7.0) == Catch::Approx(6.0));
  CHECK(sound_speed(c, 3.0, 7.0) == Catch::Approx(std::sqrt(0.5)));
}

TEST_CASE("background state validation") {
  CHECK_NOTHROW(BackgroundState(1.0, Vec3(0, 0.3, 0), Vec3(1, 0, 0), 0.0, 0.5));
  CHECK_THROWS_AS(BackgroundState(1.0, Vec3(0.1, 0, 0), Vec3(1, 0, 0), 0.0, 0.5), Error);
  CHECK_THROWS_AS(BackgroundState(1.0, Vec3(0, 0, 0), Vec3(0, 1, 0), 0.0, 0.5), Error);
  CHECK_THROWS_AS(BackgroundState(1.0, Vec3(0, 0, 0), Vec3(1, 0, 0), 0.5, 0.5), Error);

  BackgroundState bg(1.0, Vec3(0, 0.1, 0.2), Vec3(1, 0, 0), 0.0, 0.5);
  CHECK(bg.state(Side::plus).S == 0.0);
  CHECK(bg.state(Side::minus).S == 0.5);
  CHECK(bg.state(Side::plus).total_pressure() == Catch::Approx(1.5));
}
