#include <catch2/catch_amalgamated.hpp>

#include "mcd/geometry.hpp"

using namespace mcd;

namespace {
Torus2 torus(int n2, int n3 = 1, double L2 = 2 * M_PI, double L3 = 2 * M_PI) {
  Torus2 t;
  t.n2 = n2;
  t.n3 = n3;
  t.L2 = L2;
  t.L3 = L3;
  return t;
}
}  // namespace

TEST_CASE("normal of flat and linear interfaces") {
  auto g = torus(32, 32);
  auto flat = InterfaceField(g, 0.0);
  auto n = normal(flat);
  for (double v : n.N2.a) CHECK(v == 0.0);
  for (double v : n.norm.a) CHECK(v == 1.0);

  // phi = x2 on a non-periodic window: check away from the wrap seam
  auto lin = InterfaceField::sample(g, [](double x2, double) { return x2; });
  auto nl = normal(lin);
  CHECK(nl.N2.at(10, 5) == Catch::Approx(-1.0));
  CHECK(nl.norm.at(10, 5) == Catch::Approx(std::sqrt(2.0)));
}

TEST_CASE("normal finite difference accuracy on sin") {
  auto g = torus(64);
  auto phi = InterfaceField::sample(g, [](double x2, double) { return std::sin(x2); });
  auto n = normal(phi);
  // at x2 = 0: N = (1, -cos 0, 0) = (1, -1, 0) up to O(h^2)
  CHECK(std::abs(n.N2.at(0, 0) + 1.0) < sqr(g.h2()));
}

TEST_CASE("|N|^2 identity with the shared discrete gradient") {
  auto g = torus(48, 24);
  Rng rng(3);
  auto phi = InterfaceField::sample(
      g, [&](double x2, double x3) { return 0.2 * std::sin(x2 + 0.5) * std::cos(2 * x3); });
  auto n = normal(phi);
  for (int i3 = 0; i3 < g.n3; ++i3)
    for (int i2 = 0; i2 < g.n2; ++i2) {
      const double p2 = phi.d2(i2, i3), p3 = phi.d3(i2, i3);
      CHECK(std::abs(sqr(n.norm.at(i2, i3)) - 1.0 - p2 * p2 - p3 * p3) < 1e-14);
    }
  (void)rng;
}

TEST_CASE("tangents orthogonal to N") {
  auto g = torus(40, 20);
  auto phi = InterfaceField::sample(
      g, [](double x2, double x3) { return 0.1 * std::cos(x2) * std::sin(x3); });
  auto t = tangents(phi);
  auto n = normal(phi);
  for (int i3 = 0; i3 < g.n3; ++i3)
    for (int i2 = 0; i2 < g.n2; ++i2) {
      // tau1 . N = d2phi * 1 + 1 * (-d2phi)
      const double dot1 = t.tau1_1.at(i2, i3) * 1.0 + 1.0 * n.N2.at(i2, i3);
      const double dot2 = t.tau2_1.at(i2, i3) * 1.0 + 1.0 * n.N3.at(i2, i3);
      CHECK(std::abs(dot1) < 1e-14);
      CHECK(std::abs(dot2) < 1e-14);
    }

  auto flat = InterfaceField(g, 0.0);
  auto tf = tangents(flat);
  CHECK(tf.tau1_1.at(3, 3) == 0.0);  // tau1 = (0,1,0)
  CHECK(tf.tau2_1.at(3, 3) == 0.0);  // tau2 = (0,0,1)

  auto lin3 = InterfaceField::sample(g, [](double, double x3) { return x3; });
  auto tl = tangents(lin3);
  CHECK(tl.tau2_1.at(5, 5) == Catch::Approx(1.0));  // tau2 = (1,0,1)
}

TEST_CASE("curvature oracle values") {
  auto gc = torus(64, 64);
  auto cst = InterfaceField(gc, 0.7);
  auto Hc = curvature(cst);
  for (double v : Hc.a) CHECK(v == 0.0);

  // paraboloid (x2^2+x3^2)/2 centered in the box; exact H at the center is 2
  auto g = torus(64, 64, 4.0, 4.0);
  auto phi = InterfaceField::sample(
      g, [](double x2, double x3) { return 0.5 * (sqr(x2 - 2.0) + sqr(x3 - 2.0)); });
  auto H = curvature(phi);
  const int ic = 32;  // x = 2.0
  CHECK(H.at(ic, ic) == Catch::Approx(2.0).margin(0.01));

  // grid refinement: order >= 1.9 at the center
  std::vector<double> hs, errs;
  for (int n : {32, 64, 128}) {
    auto gg = torus(n, n, 4.0, 4.0);
    auto pp = InterfaceField::sample(
        gg, [](double x2, double x3) { return 0.5 * (sqr(x2 - 2.0) + sqr(x3 - 2.0)); });
    auto HH = curvature(pp);
    hs.push_back(gg.h2());
    errs.push_back(std::abs(HH.at(n / 2, n / 2) - 2.0));
  }
  CHECK(fit_loglog_slope(hs, errs) >= 1.9);
}

TEST_CASE("linearized curvature matches Taylor expansion") {
  auto g = torus(128);
  const double k = 3.0;
  for (double eps : {1e-2, 1e-3}) {
    auto phi = InterfaceField::sample(
        g, [&](double x2, double) { return eps * std::sin(k * x2); });
    auto H = curvature(phi);
    double max_err = 0.0;
    for (int i2 = 0; i2 < g.n2; ++i2) {
      const double lin = -eps * k * k * std::sin(k * g.x2(i2));
      max_err = std::max(max_err, std::abs(H.at(i2, 0) - lin));
    }
    // O(eps^2) nonlinearity plus O(h^2) discretization
    CHECK(max_err < 10.0 * (eps * eps + sqr(g.h2())) * k * k * k * k);
  }
}

TEST_CASE("cutoff chi properties") {
  CutoffChi chi(4.0);
  CHECK(chi(0.0) == 1.0);
  CHECK(chi(1.0) == 1.0);
  CHECK(chi(-0.5) == 1.0);
  CHECK(chi(4.0) == 0.0);
  CHECK(chi(5.3) == 0.0);
  CHECK(chi(2.0) > 0.0);
  CHECK(chi(2.0) < 1.0);
  CHECK(chi.max_abs_deriv() < 1.0);
  CHECK(chi(2.5) == Catch::Approx(chi(-2.5)));
}

TEST_CASE("lift of graph") {
  SlabGrid g;
  g.n1 = 64;
  g.X1 = 8.0;
  g.t = torus(16);
  CutoffChi chi(4.0);

  auto zero = InterfaceField(g.t, 0.0);
  auto m0 = lift(zero, chi, g);
  CHECK(m0.Phi(Side::plus, 8, 3, 0) == Catch::Approx(g.x1(8)));
  CHECK(m0.Phi(Side::minus, 8, 3, 0) == Catch::Approx(-g.x1(8)));
  CHECK(m0.Psi(Side::plus, 8, 3, 0) == 0.0);

  auto quarter = InterfaceField(g.t, 0.25);
  auto m = lift(quarter, chi, g);
  // chi == 1 on [0,1]: Phi+ = x1 + 1/4 there
  CHECK(m.Phi(Side::plus, 4, 0, 0) == Catch::Approx(g.x1(4) + 0.25));
  // beyond the support: Phi+ = x1
  for (int i1 = 0; i1 <= g.n1; ++i1)
    if (g.x1(i1) >= chi.L) CHECK(m.Phi(Side::plus, i1, 0, 0) == Catch::Approx(g.x1(i1)));
  // sign bounds hold
  CHECK(m.d1Phi(Side::plus, 20, 0, 0) >= 0.5);
  CHECK(m.d1Phi(Side::minus, 20, 0, 0) <= -0.5);

  auto large = InterfaceField(g.t, 0.3);
  CHECK_THROWS_AS(lift(large, chi, g), Error);
}

TEST_CASE("flattened derivatives") {
  SlabGrid g;
  g.n1 = 48;
  g.X1 = 8.0;
  g.t = torus(32);
  CutoffChi chi(4.0);

  SECTION("identity on flat interface") {
    auto m = lift(InterfaceField(g.t, 0.0), chi, g);
    auto u = SlabField::sample(g, [](double x1, double x2, double) {
      return std::sin(x2) * std::exp(-0.3 * x1);
    });
    auto d = flat_derivatives(m, u, Side::plus);
    for (int i2 = 0; i2 < g.t.n2; ++i2)
      for (int i1 = 1; i1 < g.n1; ++i1) {
        CHECK(d.d1.at(i1, i2, 0) == Catch::Approx(u.d1(i1, i2, 0)));
        CHECK(d.d2.at(i1, i2, 0) == Catch::Approx(u.d2(i1, i2, 0)));
      }
  }

  SECTION("chain rule on Phi itself") {
    auto phi = InterfaceField::sample(g.t, [](double x2, double) { return 0.2 * std::sin(x2); });
    auto m = lift(phi, chi, g);
    auto u = SlabField(g);
    for (int i2 = 0; i2 < g.t.n2; ++i2)
      for (int i1 = 0; i1 <= g.n1; ++i1) u.at(i1, i2, 0) = m.Phi(Side::plus, i1, i2, 0);
    auto d = flat_derivatives(m, u, Side::plus);
    for (int i2 = 0; i2 < g.t.n2; ++i2)
      for (int i1 = 2; i1 < g.n1 - 1; ++i1) {
        CHECK(d.d1.at(i1, i2, 0) == Catch::Approx(1.0).margin(0.03));
        CHECK(d.d2.at(i1, i2, 0) == Catch::Approx(0.0).margin(0.03));
      }
  }

  SECTION("manufactured pullback converges at second order") {
    // w(y) = sin(y1) with y1 = Phi+(x): d1^Phi u must equal cos(Phi), d2^Phi u = 0
    std::vector<double> hs, errs;
    for (int n : {32, 64, 128}) {
      SlabGrid gg;
      gg.n1 = n;
      gg.X1 = 8.0;
      gg.t = torus(n);
      auto phi =
          InterfaceField::sample(gg.t, [](double x2, double) { return 0.2 * std::sin(x2); });
      auto m = lift(phi, chi, gg);
      auto u = SlabField(gg);
      for (int i2 = 0; i2 < gg.t.n2; ++i2)
        for (int i1 = 0; i1 <= gg.n1; ++i1)
          u.at(i1, i2, 0) = std::sin(m.Phi(Side::plus, i1, i2, 0));
      auto d = flat_derivatives(m, u, Side::plus);
      double e = 0.0;
      int cnt = 0;
      for (int i2 = 0; i2 < gg.t.n2; ++i2)
        for (int i1 = 1; i1 < gg.n1; ++i1) {
          e += sqr(d.d1.at(i1, i2, 0) - std::cos(m.Phi(Side::plus, i1, i2, 0))) +
               sqr(d.d2.at(i1, i2, 0));
          cnt += 2;
        }
      hs.push_back(gg.h1());
      errs.push_back(std::sqrt(e / cnt));
    }
    CHECK(fit_loglog_slope(hs, errs) >= 1.9);
  }
}

TEST_CASE("flattened divergence") {
  SlabGrid g;
  g.n1 = 48;
  g.X1 = 8.0;
  g.t = torus(48);
  CutoffChi chi(4.0);
  auto flat = lift(InterfaceField(g.t, 0.0), chi, g);

  auto c1 = SlabField(g, 0.4), c2 = SlabField(g, -1.0), c3 = SlabField(g, 2.0);
  auto dz = div_flat(flat, c1, c2, c3, Side::plus);
  for (int i2 = 0; i2 < g.t.n2; ++i2)
    for (int i1 = 1; i1 < g.n1; ++i1) CHECK(dz.at(i1, i2, 0) == Catch::Approx(0.0).margin(1e-14));

  auto x1f = SlabField::sample(g, [](double x1, double, double) { return x1; });
  auto dlin = div_flat(flat, x1f, c2, c3, Side::plus);
  CHECK(dlin.at(5, 7, 0) == Catch::Approx(1.0));

  // divergence-free physical field pulled back through the lift:
  // H(y) = (y1 cos y2, -sin y2, 0), div_y H = cos y2 - cos y2 = 0.
  std::vector<double> hs, errs;
  for (int n : {32, 64, 128}) {
    SlabGrid gg;
    gg.n1 = n;
    gg.X1 = 8.0;
    gg.t = torus(n);
    auto phi = InterfaceField::sample(gg.t, [](double x2, double) { return 0.15 * std::cos(x2); });
    auto m = lift(phi, chi, gg);
    auto H1 = SlabField(gg), H2 = SlabField(gg), H3 = SlabField(gg, 0.0);
    for (int i2 = 0; i2 < gg.t.n2; ++i2)
      for (int i1 = 0; i1 <= gg.n1; ++i1) {
        const double y1 = m.Phi(Side::plus, i1, i2, 0);
        H1.at(i1, i2, 0) = y1 * std::cos(gg.t.x2(i2));
        H2.at(i1, i2, 0) = -std::sin(gg.t.x2(i2));
      }
    auto dv = div_flat(m, H1, H2, H3, Side::plus);
    double e = 0.0;
    int cnt = 0;
    for (int i2 = 0; i2 < gg.t.n2; ++i2)
      for (int i1 = 1; i1 < gg.n1; ++i1) {
        e += sqr(dv.at(i1, i2, 0));
        ++cnt;
      }
    hs.push_back(gg.h1());
    errs.push_back(std::sqrt(e / cnt) + 1e-16);
  }
  CHECK(fit_loglog_slope(hs, errs) >= 1.9);
  CHECK(errs.back() < 1e-3);
}
