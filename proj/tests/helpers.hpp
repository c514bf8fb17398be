#pragma once

// Shared builders for the test suites: constant-background and manufactured
// admissible basic states on small grids.

#include "mcd/init_compat.hpp"
#include "mcd/linearization.hpp"

namespace mcd::testing {

inline SlabGrid small_grid(int n1, int n2, double X1 = 8.0, int n3 = 1) {
  SlabGrid g;
  g.n1 = n1;
  g.X1 = X1;
  g.t.n2 = n2;
  g.t.n3 = n3;
  return g;
}

inline BasicState background_basic(const BackgroundState& bg, const SlabGrid& g, int nlevels,
                                   double dt, double sfrak = 1.0) {
  BasicState bs;
  bs.cons[0] = Constitutive(5.0 / 3.0);
  bs.cons[1] = Constitutive(5.0 / 3.0);
  bs.sfrak = sfrak;
  bs.kappa = std::abs(bg.H_bar(0));
  bs.steady = true;
  bs.flow.g = g;
  bs.flow.dt = dt;
  for (int k = 0; k < nlevels; ++k) {
    PairFields U(g);
    for (Side s : {Side::plus, Side::minus}) {
      const Vec8 u = bg.state(s).as_vec();
      for (int i3 = 0; i3 < g.t.n3; ++i3)
        for (int i2 = 0; i2 < g.t.n2; ++i2)
          for (int i1 = 0; i1 <= g.n1; ++i1) U.side(s).set(i1, i2, i3, u);
    }
    bs.flow.U.push_back(U);
    bs.flow.phi.push_back(InterfaceField(g.t, 0.0));
  }
  return bs;
}

struct ManufacturedOpts {
  double amp = 0.05;     // interface amplitude
  double beta = 0.4;     // linear-in-t growth of the interface
  double vamp = 0.08;    // tangential velocity modulation
  double hamp = 0.06;    // tangential magnetic modulation
  double pamp = 0.05;    // pressure modulation
  double sfrak = 1.0;
  int nlevels = 3;
  double dt = 0.01;
};

// Admissible manufactured basic state: [v] = [H] = 0 on the boundary, the
// kinematic identity holds against the *discrete* derivatives, |H.N| >= k/2,
// hyperbolicity everywhere.  phi is linear in t so the time stencils are
// exact.
inline BasicState manufactured_basic(const SlabGrid& g, const ManufacturedOpts& o = {}) {
  BasicState bs;
  bs.cons[0] = Constitutive(5.0 / 3.0);
  bs.cons[1] = Constitutive(5.0 / 3.0);
  bs.sfrak = o.sfrak;
  bs.kappa = 0.8;
  bs.flow.g = g;
  bs.flow.dt = o.dt;

  auto depth = [](double x1) { return std::exp(-0.5 * x1); };
  for (int k = 0; k < o.nlevels; ++k) {
    const double t = k * o.dt;
    auto phi = InterfaceField::sample(g.t, [&](double x2, double x3) {
      return o.amp * (1.0 + o.beta * t) * std::sin(x2) * (g.t.planar() ? 1.0 : std::cos(x3));
    });
    bs.flow.phi.push_back(phi);
  }
  for (int k = 0; k < o.nlevels; ++k) {
    const auto& phi = bs.flow.phi[k];
    InterfaceField dtphi = dt_series(bs.flow.phi, k, o.dt);
    PairFields U(g);
    for (int i3 = 0; i3 < g.t.n3; ++i3)
      for (int i2 = 0; i2 < g.t.n2; ++i2) {
        const double x2 = g.t.x2(i2);
        // boundary traces shared by both sides
        const double v2b = 0.1 + o.vamp * std::cos(x2);
        const double v3b = g.t.planar() ? 0.0 : 0.05 * std::sin(x2);
        const double H2b = o.hamp * std::sin(x2);
        const double H3b = 0.0;
        // kinematic trace from the discrete interface gradient
        const double w1b = dtphi.at(i2, i3) + v2b * phi.d2(i2, i3) + v3b * phi.d3(i2, i3);
        for (int i1 = 0; i1 <= g.n1; ++i1) {
          const double x1 = g.x1(i1);
          const double f = depth(x1);
          for (Side s : {Side::plus, Side::minus}) {
            const double sideoff = (s == Side::plus) ? 0.0 : 0.02;
            Vec8 u;
            u(0) = 1.0 + o.pamp * std::cos(x2) * f * (1 - f) + sideoff * (1.0 - f);
            u(1) = w1b * f;
            u(2) = v2b + 0.03 * x1 * f;
            u(3) = v3b;
            u(4) = 1.0 + 0.05 * (1.0 - f);
            u(5) = H2b + 0.04 * x1 * f;
            u(6) = H3b;
            u(7) = (s == Side::plus ? 0.1 : -0.2) + 0.02 * std::sin(x2) * f * (1 - f);
            U.side(s).set(i1, i2, i3, u);
          }
        }
      }
    bs.flow.U.push_back(U);
  }
  return bs;
}

// Random smooth perturbation pair (low-frequency trigonometric samples).
inline PairFields random_smooth_pair(const SlabGrid& g, Rng& rng, double amp = 1.0) {
  PairFields V(g);
  for (Side s : {Side::plus, Side::minus})
    for (int m = 0; m < 8; ++m) {
      const double a1 = rng.normal(0, amp), a2 = rng.normal(0, amp), ph = rng.uniform(0, 6.28);
      const double q1 = rng.uniform(0.2, 0.8), k2 = rng.integer(1, 3);
      for (int i3 = 0; i3 < g.t.n3; ++i3)
        for (int i2 = 0; i2 < g.t.n2; ++i2)
          for (int i1 = 0; i1 <= g.n1; ++i1)
            V.side(s).c[m].at(i1, i2, i3) =
                a1 * std::cos(k2 * g.t.x2(i2) + ph) * std::exp(-q1 * g.x1(i1)) +
                a2 * std::sin(0.5 * g.x1(i1));
    }
  return V;
}

inline InterfaceField random_smooth_psi(const Torus2& t, Rng& rng, double amp = 1.0) {
  const double a = rng.normal(0, amp), ph = rng.uniform(0, 6.28);
  const int k2 = rng.integer(1, 3);
  return InterfaceField::sample(
      t, [&](double x2, double) { return a * std::sin(k2 * x2 + ph); });
}

// Order-1 compatible small initial data: static background (v = 0), curved
// interface, and the tension pressure-lift split between the sides in
// density-weighted proportion so the first-order velocity jump cancels.
inline InitialData order1_compatible_data(const SlabGrid& g, double amp, double sfrak = 1.0,
                                          double Splus = 0.0, double Sminus = 1.5) {
  InitialData d;
  d.cons[0] = d.cons[1] = Constitutive(5.0 / 3.0);
  d.sfrak = sfrak;
  d.kappa = 0.8;
  d.U0 = PairFields(g);
  BackgroundState bg(1.0, Vec3(0, 0, 0), Vec3(1, 0, 0), Splus, Sminus);
  for (Side s : {Side::plus, Side::minus}) {
    const Vec8 u = bg.state(s).as_vec();
    for (int i3 = 0; i3 < g.t.n3; ++i3)
      for (int i2 = 0; i2 < g.t.n2; ++i2)
        for (int i1 = 0; i1 <= g.n1; ++i1) d.U0.side(s).set(i1, i2, i3, u);
  }
  d.phi0 = InterfaceField::sample(g.t, [&](double x2, double x3) {
    return amp * std::sin(x2) * (g.t.planar() ? 1.0 : std::cos(x3));
  });
  InterfaceField curv = curvature(d.phi0);
  const double rp = d.cons[0].rho(1.0, Splus);
  const double rm = d.cons[1].rho(1.0, Sminus);
  const double cp = rp / (rp - rm), cm = rm / (rp - rm);  // cp - cm = 1
  std::vector<double> chiv(g.np1());
  for (int i = 0; i <= g.n1; ++i) chiv[i] = d.chi(g.x1(i));
  for (int i3 = 0; i3 < g.t.n3; ++i3)
    for (int i2 = 0; i2 < g.t.n2; ++i2)
      for (int i1 = 0; i1 <= g.n1; ++i1) {
        const double lift = chiv[i1] * sfrak * curv.at(i2, i3);
        d.U0.side(Side::plus).c[0].at(i1, i2, i3) += cp * lift;
        d.U0.side(Side::minus).c[0].at(i1, i2, i3) += cm * lift;
      }
  return d;
}

// Interior-supported compatible data: the perturbation vanishes identically
// near the interface, so every boundary compatibility condition holds to all
// orders (the traces only see the constant background).
inline InitialData interior_supported_data(const SlabGrid& g, double amp, double sfrak = 1.0) {
  InitialData d;
  d.cons[0] = d.cons[1] = Constitutive(5.0 / 3.0);
  d.sfrak = sfrak;
  d.kappa = 0.8;
  d.U0 = PairFields(g);
  d.phi0 = InterfaceField(g.t, 0.0);
  BackgroundState bg(1.0, Vec3(0, 0, 0), Vec3(1, 0, 0), 0.0, 0.7);
  for (Side s : {Side::plus, Side::minus}) {
    const Vec8 u = bg.state(s).as_vec();
    for (int i3 = 0; i3 < g.t.n3; ++i3)
      for (int i2 = 0; i2 < g.t.n2; ++i2)
        for (int i1 = 0; i1 <= g.n1; ++i1) d.U0.side(s).set(i1, i2, i3, u);
  }
  // compactly supported bump in x1 in [1, 3], multi-scale in x2 so the
  // slowly-growing smoothing scale admits content progressively
  auto bump = [](double x1) {
    const double u = (x1 - 1.0) / 2.0;
    return (u <= 0.0 || u >= 1.0) ? 0.0 : std::exp(-1.0 / (u * (1.0 - u)) + 4.0);
  };
  for (int i3 = 0; i3 < g.t.n3; ++i3)
    for (int i2 = 0; i2 < g.t.n2; ++i2)
      for (int i1 = 0; i1 <= g.n1; ++i1) {
        const double b = bump(g.x1(i1));
        const double x2 = g.t.x2(i2);
        double wave = 0.0, wave2 = 0.0;
        for (int kk = 1; kk <= 5; ++kk) {
          wave += std::cos(kk * x2 + 0.3 * kk) / kk;
          wave2 += std::sin(kk * x2 - 0.2 * kk) / kk;
        }
        d.U0.side(Side::plus).c[0].at(i1, i2, i3) += amp * b * wave;
        d.U0.side(Side::plus).c[2].at(i1, i2, i3) += 0.5 * amp * b * wave2;
        d.U0.side(Side::minus).c[0].at(i1, i2, i3) += 0.7 * amp * b * wave2;
      }
  return d;
}

}  // namespace mcd::testing
