#pragma once

#include "mcd/common.hpp"

namespace mcd {

// Periodic grid in the tangential variables x' = (x2, x3).  The 2D planar
// reduction uses n3 = 1 (no x3 dependence; d/dx3 = 0).
struct Torus2 {
  int n2 = 1, n3 = 1;
  double L2 = 2.0 * M_PI, L3 = 2.0 * M_PI;
  double h2() const { return L2 / n2; }
  double h3() const { return L3 / n3; }
  int size() const { return n2 * n3; }
  int idx(int i2, int i3) const { return i3 * n2 + i2; }
  int wrap2(int i) const { return (i % n2 + n2) % n2; }
  int wrap3(int i) const { return (i % n3 + n3) % n3; }
  double x2(int i) const { return i * h2(); }
  double x3(int i) const { return i * h3(); }
  bool planar() const { return n3 == 1; }
};

// Scalar field on the torus; one time slice.
struct InterfaceField {
  Torus2 g;
  std::vector<double> a;

  InterfaceField() = default;
  explicit InterfaceField(const Torus2& grid, double fill = 0.0)
      : g(grid), a(grid.size(), fill) {}

  double& at(int i2, int i3) { return a[g.idx(g.wrap2(i2), g.wrap3(i3))]; }
  double at(int i2, int i3) const { return a[g.idx(g.wrap2(i2), g.wrap3(i3))]; }

  double d2(int i2, int i3) const { return (at(i2 + 1, i3) - at(i2 - 1, i3)) / (2.0 * g.h2()); }
  double d3(int i2, int i3) const {
    if (g.planar()) return 0.0;
    return (at(i2, i3 + 1) - at(i2, i3 - 1)) / (2.0 * g.h3());
  }
  double d4_axis2(int i2, int i3) const {  // fourth derivative, 5-point stencil
    return (at(i2 - 2, i3) - 4 * at(i2 - 1, i3) + 6 * at(i2, i3) - 4 * at(i2 + 1, i3) +
            at(i2 + 2, i3)) / std::pow(g.h2(), 4);
  }
  double d4_axis3(int i2, int i3) const {
    if (g.planar()) return 0.0;
    return (at(i2, i3 - 2) - 4 * at(i2, i3 - 1) + 6 * at(i2, i3) - 4 * at(i2, i3 + 1) +
            at(i2, i3 + 2)) / std::pow(g.h3(), 4);
  }
  double max_abs() const {
    double m = 0.0;
    for (double x : a) m = std::max(m, std::abs(x));
    return m;
  }
  template <typename F> static InterfaceField sample(const Torus2& g, F f) {
    InterfaceField out(g);
    for (int i3 = 0; i3 < g.n3; ++i3)
      for (int i2 = 0; i2 < g.n2; ++i2) out.at(i2, i3) = f(g.x2(i2), g.x3(i3));
    return out;
  }
};

// Smooth even cutoff: chi == 1 on [-1,1], supported in [-L,L], C-infinity,
// with max |chi'| < 1.  The transition is the normalized integral of
// exp(-1/((u-1)(L-u))).
struct CutoffChi {
  double L = 4.0;
  double total = 0.0;  // integral of the transition bump over (1, L)
  int quad_n = 4096;

  explicit CutoffChi(double support = 4.0) : L(support) {
    require(L > 1.0, Err::ConfigInvalid, "cutoff support must exceed 1");
    total = 0.0;
    const double h = (L - 1.0) / quad_n;
    for (int i = 0; i < quad_n; ++i) {
      const double u = 1.0 + (i + 0.5) * h;
      total += bump(u) * h;
    }
  }
  double bump(double u) const {
    if (u <= 1.0 || u >= L) return 0.0;
    return std::exp(-1.0 / ((u - 1.0) * (L - u)));
  }
  double operator()(double s) const {
    const double r = std::abs(s);
    if (r <= 1.0) return 1.0;
    if (r >= L) return 0.0;
    const int n = 512;
    const double h = (r - 1.0) / n;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += bump(1.0 + (i + 0.5) * h) * h;
    return 1.0 - acc / total;
  }
  double deriv(double s) const {
    const double r = std::abs(s);
    if (r <= 1.0 || r >= L) return 0.0;
    const double d = -bump(r) / total;
    return s > 0 ? d : -d;
  }
  double max_abs_deriv() const {
    double m = 0.0;
    for (int i = 0; i <= 1000; ++i) m = std::max(m, std::abs(deriv(1.0 + i * (L - 1.0) / 1000.0)));
    return m;
  }
};

// Half-space slab grid {0 <= x1 <= X1} x torus.
struct SlabGrid {
  int n1 = 1;  // cells; n1+1 nodes
  double X1 = 8.0;
  Torus2 t;
  double h1() const { return X1 / n1; }
  int np1() const { return n1 + 1; }
  int size() const { return np1() * t.size(); }
  int idx(int i1, int i2, int i3) const { return (i3 * t.n2 + i2) * np1() + i1; }
  double x1(int i) const { return i * h1(); }
};

// Scalar field on the slab.
struct SlabField {
  SlabGrid g;
  std::vector<double> a;

  SlabField() = default;
  explicit SlabField(const SlabGrid& grid, double fill = 0.0) : g(grid), a(grid.size(), fill) {}

  double& at(int i1, int i2, int i3) { return a[g.idx(i1, g.t.wrap2(i2), g.t.wrap3(i3))]; }
  double at(int i1, int i2, int i3) const { return a[g.idx(i1, g.t.wrap2(i2), g.t.wrap3(i3))]; }

  // centered in the interior, one-sided second order at the slab ends
  double d1(int i1, int i2, int i3) const {
    const double h = g.h1();
    if (i1 == 0) return (-3 * at(0, i2, i3) + 4 * at(1, i2, i3) - at(2, i2, i3)) / (2 * h);
    if (i1 == g.n1)
      return (3 * at(g.n1, i2, i3) - 4 * at(g.n1 - 1, i2, i3) + at(g.n1 - 2, i2, i3)) / (2 * h);
    return (at(i1 + 1, i2, i3) - at(i1 - 1, i2, i3)) / (2 * h);
  }
  double d2(int i1, int i2, int i3) const {
    return (at(i1, i2 + 1, i3) - at(i1, i2 - 1, i3)) / (2 * g.t.h2());
  }
  double d3(int i1, int i2, int i3) const {
    if (g.t.planar()) return 0.0;
    return (at(i1, i2, i3 + 1) - at(i1, i2, i3 - 1)) / (2 * g.t.h3());
  }
  template <typename F> static SlabField sample(const SlabGrid& g, F f) {
    SlabField out(g);
    for (int i3 = 0; i3 < g.t.n3; ++i3)
      for (int i2 = 0; i2 < g.t.n2; ++i2)
        for (int i1 = 0; i1 <= g.n1; ++i1)
          out.at(i1, i2, i3) = f(g.x1(i1), g.t.x2(i2), g.t.x3(i3));
    return out;
  }
};

struct NormalField {
  InterfaceField N2, N3;     // N = (1, -d2 phi, -d3 phi)
  InterfaceField norm;       // |N|
};

inline NormalField normal(const InterfaceField& phi) {
  NormalField n{InterfaceField(phi.g), InterfaceField(phi.g), InterfaceField(phi.g)};
  for (int i3 = 0; i3 < phi.g.n3; ++i3)
    for (int i2 = 0; i2 < phi.g.n2; ++i2) {
      const double p2 = phi.d2(i2, i3), p3 = phi.d3(i2, i3);
      n.N2.at(i2, i3) = -p2;
      n.N3.at(i2, i3) = -p3;
      n.norm.at(i2, i3) = std::sqrt(1.0 + p2 * p2 + p3 * p3);
    }
  return n;
}

struct TangentField {
  InterfaceField tau1_1, tau2_1;  // tau1 = (d2 phi, 1, 0), tau2 = (d3 phi, 0, 1)
};

inline TangentField tangents(const InterfaceField& phi) {
  TangentField t{InterfaceField(phi.g), InterfaceField(phi.g)};
  for (int i3 = 0; i3 < phi.g.n3; ++i3)
    for (int i2 = 0; i2 < phi.g.n2; ++i2) {
      t.tau1_1.at(i2, i3) = phi.d2(i2, i3);
      t.tau2_1.at(i2, i3) = phi.d3(i2, i3);
    }
  return t;
}

// Twice the mean curvature in divergence form:
// H(phi) = D_x' . ( D_x' phi / sqrt(1 + |D_x' phi|^2) ).
inline InterfaceField curvature(const InterfaceField& phi) {
  InterfaceField F2(phi.g), F3(phi.g);
  for (int i3 = 0; i3 < phi.g.n3; ++i3)
    for (int i2 = 0; i2 < phi.g.n2; ++i2) {
      const double p2 = phi.d2(i2, i3), p3 = phi.d3(i2, i3);
      const double r = std::sqrt(1.0 + p2 * p2 + p3 * p3);
      F2.at(i2, i3) = p2 / r;
      F3.at(i2, i3) = p3 / r;
    }
  InterfaceField H(phi.g);
  for (int i3 = 0; i3 < phi.g.n3; ++i3)
    for (int i2 = 0; i2 < phi.g.n2; ++i2) H.at(i2, i3) = F2.d2(i2, i3) + F3.d3(i2, i3);
  return H;
}

// Linearization of the curvature about a base interface:
// d/dtheta H(phi + theta psi)|_0 in divergence form (the boundary operator's
// surface-tension bracket).
inline InterfaceField curvature_linearized(const InterfaceField& phi, const InterfaceField& psi) {
  InterfaceField F2(phi.g), F3(phi.g);
  for (int i3 = 0; i3 < phi.g.n3; ++i3)
    for (int i2 = 0; i2 < phi.g.n2; ++i2) {
      const double p2 = phi.d2(i2, i3), p3 = phi.d3(i2, i3);
      const double q2 = psi.d2(i2, i3), q3 = psi.d3(i2, i3);
      const double nn = 1.0 + p2 * p2 + p3 * p3;
      const double r = std::sqrt(nn);
      const double dot = p2 * q2 + p3 * q3;
      F2.at(i2, i3) = q2 / r - dot * p2 / (nn * r);
      F3.at(i2, i3) = q3 / r - dot * p3 / (nn * r);
    }
  InterfaceField out(phi.g);
  for (int i3 = 0; i3 < phi.g.n3; ++i3)
    for (int i2 = 0; i2 < phi.g.n2; ++i2) out.at(i2, i3) = F2.d2(i2, i3) + F3.d3(i2, i3);
  return out;
}

// Lift Phi+-(x) = +-x1 + chi(+-x1) phi(x') of the interface graph to the
// half-space slab; Psi+- is the perturbation part.  chi is even, so
// chi(+-x1) agrees on both sides and d/dx1 chi(+-x1) = chi'(x1) for both.
struct LiftedMap {
  SlabGrid g;
  InterfaceField phi;
  std::vector<double> chi_v, chi_d;  // chi(x1), chi'(x1) at the slab nodes

  LiftedMap(const SlabGrid& grid, const CutoffChi& cut, const InterfaceField& f)
      : g(grid), phi(f), chi_v(grid.np1()), chi_d(grid.np1()) {
    for (int i = 0; i <= grid.n1; ++i) {
      chi_v[i] = cut(grid.x1(i));
      chi_d[i] = cut.deriv(grid.x1(i));
    }
  }

  double chi_at(int i1) const { return chi_v[i1]; }
  double Psi(Side, int i1, int i2, int i3) const { return chi_v[i1] * phi.at(i2, i3); }
  double Phi(Side s, int i1, int i2, int i3) const {
    return side_sign(s) * g.x1(i1) + Psi(s, i1, i2, i3);
  }
  double d1Phi(Side s, int i1, int i2, int i3) const {
    return side_sign(s) + chi_d[i1] * phi.at(i2, i3);
  }
  double d2Phi(Side, int i1, int i2, int i3) const { return chi_v[i1] * phi.d2(i2, i3); }
  double d3Phi(Side, int i1, int i2, int i3) const { return chi_v[i1] * phi.d3(i2, i3); }
};

inline LiftedMap lift(const InterfaceField& phi, const CutoffChi& chi, const SlabGrid& grid) {
  require(phi.max_abs() <= 0.25 + 1e-14, Err::LiftInadmissible, "lift requires |phi| <= 1/4");
  LiftedMap m(grid, chi, phi);
  for (int i3 = 0; i3 < grid.t.n3; ++i3)
    for (int i2 = 0; i2 < grid.t.n2; ++i2)
      for (int i1 = 0; i1 <= grid.n1; ++i1) {
        require(m.d1Phi(Side::plus, i1, i2, i3) >= 0.5, Err::LiftInadmissible,
                "d1 Phi+ < 1/2 on the grid");
        require(m.d1Phi(Side::minus, i1, i2, i3) <= -0.5, Err::LiftInadmissible,
                "d1 Phi- > -1/2 on the grid");
      }
  return m;
}

// Flattened spatial derivatives of a scalar field:
//   d1^Phi u = d1 u / d1 Phi,   di^Phi u = di u - (di Phi / d1 Phi) d1 u.
struct FlatDerivs {
  SlabField d1, d2, d3;
};

inline FlatDerivs flat_derivatives(const LiftedMap& m, const SlabField& u, Side s) {
  FlatDerivs out{SlabField(u.g), SlabField(u.g), SlabField(u.g)};
  for (int i3 = 0; i3 < u.g.t.n3; ++i3)
    for (int i2 = 0; i2 < u.g.t.n2; ++i2)
      for (int i1 = 0; i1 <= u.g.n1; ++i1) {
        const double J = m.d1Phi(s, i1, i2, i3);
        require(std::abs(J) >= 1e-6, Err::DegenerateJacobian, "flat_derivatives");
        const double u1 = u.d1(i1, i2, i3);
        out.d1.at(i1, i2, i3) = u1 / J;
        out.d2.at(i1, i2, i3) = u.d2(i1, i2, i3) - m.d2Phi(s, i1, i2, i3) / J * u1;
        out.d3.at(i1, i2, i3) = u.d3(i1, i2, i3) - m.d3Phi(s, i1, i2, i3) / J * u1;
      }
  return out;
}

// Time-flattened derivative dt^Phi u = dt u - (dt Phi / d1 Phi) d1 u, given
// discrete time derivatives of u and Phi.
inline SlabField flat_time_derivative(const LiftedMap& m, const SlabField& dtu,
                                      const SlabField& dtPhi, const SlabField& u, Side s) {
  SlabField out(u.g);
  for (int i3 = 0; i3 < u.g.t.n3; ++i3)
    for (int i2 = 0; i2 < u.g.t.n2; ++i2)
      for (int i1 = 0; i1 <= u.g.n1; ++i1) {
        const double J = m.d1Phi(s, i1, i2, i3);
        require(std::abs(J) >= 1e-6, Err::DegenerateJacobian, "flat_time_derivative");
        out.at(i1, i2, i3) =
            dtu.at(i1, i2, i3) - dtPhi.at(i1, i2, i3) / J * u.d1(i1, i2, i3);
      }
  return out;
}

inline SlabField div_flat(const LiftedMap& m, const SlabField& H1, const SlabField& H2,
                          const SlabField& H3, Side s) {
  SlabField out(H1.g);
  FlatDerivs d1 = flat_derivatives(m, H1, s);
  FlatDerivs d2 = flat_derivatives(m, H2, s);
  FlatDerivs d3 = flat_derivatives(m, H3, s);
  for (std::size_t i = 0; i < out.a.size(); ++i)
    out.a[i] = d1.d1.a[i] + d2.d2.a[i] + d3.d3.a[i];
  return out;
}

}  // namespace mcd
