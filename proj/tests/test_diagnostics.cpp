#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "mcd/diagnostics.hpp"

using namespace mcd;
using namespace mcd::testing;

TEST_CASE("sobolev norm basics") {
  auto g = small_grid(16, 32, 4.0);
  const double dt = 0.1;

  SECTION("zero field") {
    std::vector<SlabField> u(5, SlabField(g, 0.0));
    CHECK(sobolev_norm(u, 2, dt) == 0.0);
  }

  SECTION("sin(x2), m = 1: volume * (1/2 + 1/2)") {
    std::vector<SlabField> u(5);
    for (auto& f : u)
      f = SlabField::sample(g, [](double, double x2, double) { return std::sin(x2); });
    const double T = 4 * dt;
    const double vol = T * g.X1 * g.t.L2;
    const double expect = std::sqrt(vol * (0.5 + 0.5));
    CHECK(sobolev_norm(u, 1, dt) == Catch::Approx(expect).epsilon(0.01));
  }

  SECTION("order cap") {
    std::vector<SlabField> u(3, SlabField(g, 0.0));
    CHECK_THROWS_AS(sobolev_norm(u, 5, dt), Error);
  }
}

TEST_CASE("tangential norm is a subset of the full norm") {
  auto g = small_grid(12, 16, 4.0);
  Rng rng(7);
  const double dt = 0.05;
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<SlabField> u;
    for (int k = 0; k < 7; ++k) {
      SlabField f(g);
      for (auto& v : f.a) v = rng.normal();
      u.push_back(std::move(f));
    }
    for (int m = 0; m <= 3; ++m)
      CHECK(sobolev_norm(u, m, dt, DerivSet::tangential) <= sobolev_norm(u, m, dt) + 1e-12);
  }
}

TEST_CASE("norm homogeneity") {
  auto g = small_grid(10, 16, 4.0);
  Rng rng(13);
  std::vector<SlabField> u;
  for (int k = 0; k < 5; ++k) {
    SlabField f(g);
    for (auto& v : f.a) v = rng.normal();
    u.push_back(std::move(f));
  }
  const double alpha = -2.75;
  auto au = u;
  for (auto& f : au)
    for (auto& v : f.a) v *= alpha;
  const double n1 = sobolev_norm(u, 2, 0.05);
  const double n2 = sobolev_norm(au, 2, 0.05);
  CHECK(n2 == Catch::Approx(std::abs(alpha) * n1).epsilon(1e-12));
}

TEST_CASE("norm report and weighted norm") {
  auto g = small_grid(24, 16, 8.0);
  const double dt = 0.05;
  std::vector<PairFields> u;
  for (int k = 0; k < 5; ++k) {
    PairFields p(g);
    for (int sd = 0; sd < 2; ++sd)
      for (int i2 = 0; i2 < g.t.n2; ++i2)
        for (int i1 = 0; i1 <= g.n1; ++i1)
          p.s[sd].c[0].at(i1, i2, 0) = std::sin(g.t.x2(i2)) * std::exp(-g.x1(i1));
    u.push_back(std::move(p));
  }
  auto rep = norm_report(u, dt, 2);
  CHECK(rep.interior_Hm[0] > 0.0);
  CHECK(rep.interior_Hm[1] >= rep.interior_Hm[0]);
  CHECK(rep.interior_Hm[2] >= rep.interior_Hm[1]);
  CHECK(rep.tangential[1] <= rep.interior_Hm[1] + 1e-12);
  CHECK(rep.boundary_trace_l2 > 0.0);
  CHECK(rep.weighted_sigma_d1 > 0.0);

  // bit-reproducibility on identical inputs
  auto rep2 = norm_report(u, dt, 2);
  CHECK(rep.interior_Hm[2] == rep2.interior_Hm[2]);
  CHECK(rep.weighted_sigma_d1 == rep2.weighted_sigma_d1);
}

TEST_CASE("interface norms") {
  Torus2 t;
  t.n2 = 64;
  const double dt = 0.02;
  std::vector<InterfaceField> psi;
  for (int k = 0; k < 9; ++k) {
    const double tt = k * dt;
    psi.push_back(InterfaceField::sample(
        t, [&](double x2, double) { return std::cos(tt) * std::sin(2 * x2); }));
  }
  const double n0 = sobolev_norm(psi, 0, dt);
  const double n1 = sobolev_norm(psi, 1, dt);
  CHECK(n0 > 0.0);
  CHECK(n1 > n0);
}
