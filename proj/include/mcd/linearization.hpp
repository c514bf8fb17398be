#pragma once

#include "mcd/geometry.hpp"
#include "mcd/symbols.hpp"

namespace mcd {

// 8-component field on one side of the slab.
struct SideFields {
  std::array<SlabField, 8> c;
  SideFields() = default;
  explicit SideFields(const SlabGrid& g) {
    for (auto& f : c) f = SlabField(g);
  }
  Vec8 at(int i1, int i2, int i3) const {
    Vec8 u;
    for (int m = 0; m < 8; ++m) u(m) = c[m].at(i1, i2, i3);
    return u;
  }
  void set(int i1, int i2, int i3, const Vec8& u) {
    for (int m = 0; m < 8; ++m) c[m].at(i1, i2, i3) = u(m);
  }
  Vec8 d1(int i1, int i2, int i3) const {
    Vec8 u;
    for (int m = 0; m < 8; ++m) u(m) = c[m].d1(i1, i2, i3);
    return u;
  }
  Vec8 d2(int i1, int i2, int i3) const {
    Vec8 u;
    for (int m = 0; m < 8; ++m) u(m) = c[m].d2(i1, i2, i3);
    return u;
  }
  Vec8 d3(int i1, int i2, int i3) const {
    Vec8 u;
    for (int m = 0; m < 8; ++m) u(m) = c[m].d3(i1, i2, i3);
    return u;
  }
};

struct PairFields {
  SideFields s[2];
  PairFields() = default;
  explicit PairFields(const SlabGrid& g) : s{SideFields(g), SideFields(g)} {}
  SideFields& side(Side sd) { return s[side_index(sd)]; }
  const SideFields& side(Side sd) const { return s[side_index(sd)]; }
};

inline void axpy(PairFields& y, double a, const PairFields& x) {
  for (int sd = 0; sd < 2; ++sd)
    for (int m = 0; m < 8; ++m)
      for (std::size_t i = 0; i < y.s[sd].c[m].a.size(); ++i)
        y.s[sd].c[m].a[i] += a * x.s[sd].c[m].a[i];
}

inline void scale(PairFields& y, double a) {
  for (int sd = 0; sd < 2; ++sd)
    for (int m = 0; m < 8; ++m)
      for (double& v : y.s[sd].c[m].a) v *= a;
}

inline double max_abs(const PairFields& y) {
  double r = 0.0;
  for (int sd = 0; sd < 2; ++sd)
    for (int m = 0; m < 8; ++m)
      for (double v : y.s[sd].c[m].a) r = std::max(r, std::abs(v));
  return r;
}

// (U, phi) over uniform time levels t0 + k dt.  U holds full states, not
// perturbations.
struct FlowHistory {
  SlabGrid g;
  CutoffChi chi{4.0};
  double t0 = 0.0;
  double dt = 1.0;
  std::vector<PairFields> U;
  std::vector<InterfaceField> phi;

  int nlevels() const { return static_cast<int>(U.size()); }
  double time(int k) const { return t0 + k * dt; }
};

// Discrete time derivative of a series: centered second-order in the
// interior, one-sided at the window ends, zero for a single level.
inline InterfaceField dt_series(const std::vector<InterfaceField>& f, int k, double dt) {
  const int n = static_cast<int>(f.size());
  InterfaceField out(f[k].g, 0.0);
  if (n == 1) return out;
  auto acc = [&](double a, const InterfaceField& x) {
    for (std::size_t i = 0; i < out.a.size(); ++i) out.a[i] += a * x.a[i];
  };
  if (n == 2) {  // first order is all the data supports
    acc(1.0 / dt, f[1]);
    acc(-1.0 / dt, f[0]);
    return out;
  }
  if (k == 0) {
    acc(-1.5 / dt, f[0]);
    acc(2.0 / dt, f[1]);
    acc(-0.5 / dt, f[2]);
  } else if (k == n - 1) {
    acc(1.5 / dt, f[n - 1]);
    acc(-2.0 / dt, f[n - 2]);
    acc(0.5 / dt, f[n - 3]);
  } else {
    acc(0.5 / dt, f[k + 1]);
    acc(-0.5 / dt, f[k - 1]);
  }
  return out;
}

inline PairFields dt_series(const std::vector<PairFields>& f, int k, double dt) {
  const int n = static_cast<int>(f.size());
  PairFields out(f[k].s[0].c[0].g);
  if (n == 1) return out;
  auto acc = [&](double a, const PairFields& x) { axpy(out, a, x); };
  if (n == 2) {
    acc(1.0 / dt, f[1]);
    acc(-1.0 / dt, f[0]);
    return out;
  }
  if (k == 0) {
    acc(-1.5 / dt, f[0]);
    acc(2.0 / dt, f[1]);
    acc(-0.5 / dt, f[2]);
  } else if (k == n - 1) {
    acc(1.5 / dt, f[n - 1]);
    acc(-2.0 / dt, f[n - 2]);
    acc(0.5 / dt, f[n - 3]);
  } else {
    acc(0.5 / dt, f[k + 1]);
    acc(-0.5 / dt, f[k - 1]);
  }
  return out;
}

// Basic state around which the problem is linearized.  Holds the full state
// history plus the constitutive pair and the interface parameters.
struct BasicState {
  FlowHistory flow;
  Constitutive cons[2];
  double sfrak = 1.0;   // surface tension coefficient
  double kappa = 0.5;   // lower bound for |H . N| on the boundary
  double K = 1.0;       // norm bound (bookkeeping only)
  bool steady = false;  // time-independent coefficients (caches reused)

  const Constitutive& cons_of(Side s) const { return cons[side_index(s)]; }

  LiftedMap map(int k) const { return LiftedMap(flow.g, flow.chi, flow.phi[k]); }

  // admissibility checks (hyperbolicity band, |H.N| >= kappa/2, boundary
  // matching conditions) with the stated tolerance
  void validate(double tol = 1e-10) const;
};

// Per-level cache used by the operator applications.
struct BasicSlice {
  const BasicState* bs;
  int k;
  LiftedMap map;
  InterfaceField dtphi;
  PairFields dtU;

  BasicSlice(const BasicState& b, int level)
      : bs(&b),
        k(level),
        map(b.map(level)),
        dtphi(dt_series(b.flow.phi, level, b.flow.dt)),
        dtU(dt_series(b.flow.U, level, b.flow.dt)) {}

  const SlabGrid& grid() const { return bs->flow.g; }
  Vec8 state(Side s, int i1, int i2, int i3) const {
    return bs->flow.U[k].side(s).at(i1, i2, i3);
  }
  LiftSlopes slopes(Side s, int i1, int i2, int i3) const {
    LiftSlopes ls;
    ls.dt = map.chi_at(i1) * dtphi.at(i2, i3);
    ls.d1 = map.d1Phi(s, i1, i2, i3);
    ls.d2 = map.d2Phi(s, i1, i2, i3);
    ls.d3 = map.d3Phi(s, i1, i2, i3);
    return ls;
  }
};

inline void BasicState::validate(double tol) const {
  for (int k = 0; k < flow.nlevels(); ++k) {
    auto m = map(k);
    const auto& U = flow.U[k];
    for (int i3 = 0; i3 < flow.g.t.n3; ++i3)
      for (int i2 = 0; i2 < flow.g.t.n2; ++i2) {
        // boundary conditions bas1c on the trace
        const Vec8 up = U.side(Side::plus).at(0, i2, i3);
        const Vec8 um = U.side(Side::minus).at(0, i2, i3);
        for (int m8 = 1; m8 <= 6; ++m8)
          require(std::abs(up(m8) - um(m8)) <= tol, Err::AdmissibilityLost,
                  "basic state: [v] or [H] jump on the boundary");
        const double p2 = flow.phi[k].d2(i2, i3), p3 = flow.phi[k].d3(i2, i3);
        const Vec3 N(1.0, -p2, -p3);
        const Vec3 vp(up(1), up(2), up(3)), Hp(up(4), up(5), up(6));
        const double dtph = dt_series(flow.phi, k, flow.dt).at(i2, i3);
        require(std::abs(dtph - vp.dot(N)) <= std::max(tol, 1e-8), Err::AdmissibilityLost,
                "basic state: kinematic condition violated");
        require(std::abs(Hp.dot(N)) >= kappa / 2.0, Err::AdmissibilityLost,
                "basic state: |H.N| < kappa/2 on the boundary");
        for (int i1 = 0; i1 <= flow.g.n1; ++i1)
          for (Side s : {Side::plus, Side::minus}) {
            FluidState u = FluidState::from_vec(U.side(s).at(i1, i2, i3), s);
            require(check_hyperbolicity(cons_of(s), u).ok, Err::AdmissibilityLost,
                    "basic state: hyperbolicity violated");
          }
        (void)m;
      }
  }
}

// --------------------------------------------------------------------------
// Good unknown

struct GoodUnknown {
  PairFields Vdot;
  InterfaceField psi;
};

// Vdot = V - (Psi / d1 Phi) d1 U around a basic-state slice.
inline PairFields good_unknown(const BasicSlice& sl, const PairFields& V,
                               const InterfaceField& psi) {
  const SlabGrid& g = sl.grid();
  PairFields out(g);
  for (Side s : {Side::plus, Side::minus})
    for (int i3 = 0; i3 < g.t.n3; ++i3)
      for (int i2 = 0; i2 < g.t.n2; ++i2)
        for (int i1 = 0; i1 <= g.n1; ++i1) {
          const double Psi = sl.map.chi_at(i1) * psi.at(i2, i3);
          const double J = sl.map.d1Phi(s, i1, i2, i3);
          require(std::abs(J) >= 1e-6, Err::DegenerateJacobian, "good_unknown");
          const Vec8 dU1 = sl.bs->flow.U[sl.k].side(s).d1(i1, i2, i3);
          out.side(s).set(i1, i2, i3,
                          V.side(s).at(i1, i2, i3) - (Psi / J) * dU1);
        }
  return out;
}

// inverse map: V = Vdot + (Psi / d1 Phi) d1 U
inline PairFields good_unknown_inverse(const BasicSlice& sl, const PairFields& Vdot,
                                       const InterfaceField& psi) {
  const SlabGrid& g = sl.grid();
  PairFields out(g);
  for (Side s : {Side::plus, Side::minus})
    for (int i3 = 0; i3 < g.t.n3; ++i3)
      for (int i2 = 0; i2 < g.t.n2; ++i2)
        for (int i1 = 0; i1 <= g.n1; ++i1) {
          const double Psi = sl.map.chi_at(i1) * psi.at(i2, i3);
          const double J = sl.map.d1Phi(s, i1, i2, i3);
          const Vec8 dU1 = sl.bs->flow.U[sl.k].side(s).d1(i1, i2, i3);
          out.side(s).set(i1, i2, i3,
                          Vdot.side(s).at(i1, i2, i3) + (Psi / J) * dU1);
        }
  return out;
}

// --------------------------------------------------------------------------
// Interior operators

// Zero-order coefficient C(U,Phi): column k is
// dA0/dU_k dtU + dA1~/dU_k d1U + dA2/dU_k d2U + dA3/dU_k d3U.
inline Mat8 c_matrix(const Constitutive& c, const FluidState& u, const LiftSlopes& ls,
                     const Vec8& dtU, const Vec8& d1U, const Vec8& d2U, const Vec8& d3U) {
  Mat8 C;
  for (int k = 0; k < 8; ++k) {
    Vec8 col = dA0_dU(c, u, k) * dtU + dtildeA1_dU(c, u, ls, k) * d1U +
               dAi_dU(c, u, 2, k) * d2U + dAi_dU(c, u, 3, k) * d3U;
    C.col(k) = col;
  }
  return C;
}

// L(U,Phi) applied to a perturbation slice: A0 dtV + A1~ d1V + A2 d2V + A3 d3V.
// dtV must be supplied (computed from a series by the caller).
inline PairFields apply_L(const BasicSlice& sl, const PairFields& V, const PairFields& dtV) {
  const SlabGrid& g = sl.grid();
  PairFields out(g);
  for (Side s : {Side::plus, Side::minus}) {
    const Constitutive& c = sl.bs->cons_of(s);
    for (int i3 = 0; i3 < g.t.n3; ++i3)
      for (int i2 = 0; i2 < g.t.n2; ++i2)
        for (int i1 = 0; i1 <= g.n1; ++i1) {
          const FluidState u = FluidState::from_vec(sl.state(s, i1, i2, i3), s);
          const LiftSlopes ls = sl.slopes(s, i1, i2, i3);
          const Vec8 r = assemble_A0(c, u) * dtV.side(s).at(i1, i2, i3) +
                         assemble_tildeA1(c, u, ls) * V.side(s).d1(i1, i2, i3) +
                         assemble_Ai(c, u, 2) * V.side(s).d2(i1, i2, i3) +
                         assemble_Ai(c, u, 3) * V.side(s).d3(i1, i2, i3);
          out.side(s).set(i1, i2, i3, r);
        }
  }
  return out;
}

// Effective linearized interior operator: L'_e V = L V + C V.
inline PairFields apply_Lprime_e(const BasicSlice& sl, const PairFields& V,
                                 const PairFields& dtV) {
  const SlabGrid& g = sl.grid();
  PairFields out = apply_L(sl, V, dtV);
  for (Side s : {Side::plus, Side::minus}) {
    const Constitutive& c = sl.bs->cons_of(s);
    for (int i3 = 0; i3 < g.t.n3; ++i3)
      for (int i2 = 0; i2 < g.t.n2; ++i2)
        for (int i1 = 0; i1 <= g.n1; ++i1) {
          const FluidState u = FluidState::from_vec(sl.state(s, i1, i2, i3), s);
          const LiftSlopes ls = sl.slopes(s, i1, i2, i3);
          const Mat8 C = c_matrix(c, u, ls, sl.dtU.side(s).at(i1, i2, i3),
                                  sl.bs->flow.U[sl.k].side(s).d1(i1, i2, i3),
                                  sl.bs->flow.U[sl.k].side(s).d2(i1, i2, i3),
                                  sl.bs->flow.U[sl.k].side(s).d3(i1, i2, i3));
          out.side(s).set(i1, i2, i3,
                          out.side(s).at(i1, i2, i3) + C * V.side(s).at(i1, i2, i3));
        }
  }
  return out;
}

// Full linearization L'(V, Psi) with Psi = chi(+-x1) psi: adds the lift
// sensitivity -(dt Psi A0 + d2 Psi A2 + d3 Psi A3 + d1 Psi A1~) d1 U / d1 Phi.
inline PairFields apply_Lprime(const BasicSlice& sl, const PairFields& V, const PairFields& dtV,
                               const InterfaceField& psi, const InterfaceField& dtpsi) {
  const SlabGrid& g = sl.grid();
  PairFields out = apply_Lprime_e(sl, V, dtV);
  for (Side s : {Side::plus, Side::minus}) {
    const Constitutive& c = sl.bs->cons_of(s);
    for (int i3 = 0; i3 < g.t.n3; ++i3)
      for (int i2 = 0; i2 < g.t.n2; ++i2)
        for (int i1 = 0; i1 <= g.n1; ++i1) {
          const FluidState u = FluidState::from_vec(sl.state(s, i1, i2, i3), s);
          const LiftSlopes ls = sl.slopes(s, i1, i2, i3);
          // Psi = chi(x1) psi on both sides; d1 Psi = chi'(x1) psi
          const double chi = sl.map.chi_v[i1], dchi = sl.map.chi_d[i1];
          const double dtPsi = chi * dtpsi.at(i2, i3);
          const double d1Psi = dchi * psi.at(i2, i3);
          const double d2Psi = chi * psi.d2(i2, i3);
          const double d3Psi = chi * psi.d3(i2, i3);
          const Vec8 dU1 = sl.bs->flow.U[sl.k].side(s).d1(i1, i2, i3);
          const Vec8 extra = -(dtPsi * assemble_A0(c, u) + d2Psi * assemble_Ai(c, u, 2) +
                               d3Psi * assemble_Ai(c, u, 3) +
                               d1Psi * assemble_tildeA1(c, u, ls)) *
                             dU1 / ls.d1;
          out.side(s).set(i1, i2, i3, out.side(s).at(i1, i2, i3) + extra);
        }
  }
  return out;
}

// Nonlinear interior operator L(U, Phi) U on a history level.
inline PairFields apply_nonlinear_L(const FlowHistory& hist, const Constitutive cons[2], int k) {
  BasicState tmp;
  tmp.flow = hist;
  tmp.cons[0] = cons[0];
  tmp.cons[1] = cons[1];
  BasicSlice sl(tmp, k);
  return apply_L(sl, hist.U[k], sl.dtU);
}

// --------------------------------------------------------------------------
// Boundary operators (all rows are fields on the torus)

struct BoundaryRows {
  std::array<InterfaceField, 7> r;
  explicit BoundaryRows(const Torus2& t) {
    for (auto& f : r) f = InterfaceField(t);
  }
  BoundaryRows() = default;
  double max_abs() const {
    double m = 0.0;
    for (const auto& f : r) m = std::max(m, f.max_abs());
    return m;
  }
};

struct ACoeffs {
  std::array<InterfaceField, 8> a;  // a[1]..a[7] used; a[0] unused
};

// Boundary coefficients a1..a7 from basic-state traces (one-sided d1 at i1=0).
inline ACoeffs a_coeffs(const BasicSlice& sl) {
  const Torus2& t = sl.grid().t;
  ACoeffs ac;
  for (auto& f : ac.a) f = InterfaceField(t);
  const auto& Up = sl.bs->flow.U[sl.k].side(Side::plus);
  const auto& Um = sl.bs->flow.U[sl.k].side(Side::minus);
  const auto& phi = sl.bs->flow.phi[sl.k];
  for (int i3 = 0; i3 < t.n3; ++i3)
    for (int i2 = 0; i2 < t.n2; ++i2) {
      const Vec8 d1p = Up.d1(0, i2, i3), d1m = Um.d1(0, i2, i3);
      const double p2 = phi.d2(i2, i3), p3 = phi.d3(i2, i3);
      const Vec3 N(1.0, -p2, -p3), tau1(p2, 1.0, 0.0), tau2(p3, 0.0, 1.0);
      const Vec3 dvp(d1p(1), d1p(2), d1p(3)), dvm(d1m(1), d1m(2), d1m(3));
      const Vec3 dHp(d1p(4), d1p(5), d1p(6)), dHm(d1m(4), d1m(5), d1m(6));
      ac.a[1].at(i2, i3) = -d1p(0) - d1m(0);
      ac.a[2].at(i2, i3) = -N.dot(dvp + dvm);
      ac.a[3].at(i2, i3) = -dvp(1) - dvm(1);
      ac.a[4].at(i2, i3) = -dvp(2) - dvm(2);
      ac.a[5].at(i2, i3) = -tau1.dot(dHp + dHm);
      ac.a[6].at(i2, i3) = -tau2.dot(dHp + dHm);
      ac.a[7].at(i2, i3) = -dvp.dot(N);
    }
  return ac;
}

// Effective linearized boundary operator B'_e(Vdot, psi); rows ordered
// (pressure-tension, v1, v2, v3, H.tau1, H.tau2, kinematic).
inline BoundaryRows boundary_effective(const BasicSlice& sl, const PairFields& Vdot,
                                       const InterfaceField& psi, const InterfaceField& dtpsi) {
  const Torus2& t = sl.grid().t;
  BoundaryRows out(t);
  const auto ac = a_coeffs(sl);
  const auto& phi = sl.bs->flow.phi[sl.k];
  InterfaceField tension = curvature_linearized(phi, psi);
  const auto& Up = sl.bs->flow.U[sl.k].side(Side::plus);
  const auto& Um = sl.bs->flow.U[sl.k].side(Side::minus);
  for (int i3 = 0; i3 < t.n3; ++i3)
    for (int i2 = 0; i2 < t.n2; ++i2) {
      const Vec8 vp = Vdot.side(Side::plus).at(0, i2, i3);
      const Vec8 vm = Vdot.side(Side::minus).at(0, i2, i3);
      const double p2 = phi.d2(i2, i3), p3 = phi.d3(i2, i3);
      const Vec3 N(1.0, -p2, -p3), tau1(p2, 1.0, 0.0), tau2(p3, 0.0, 1.0);
      const double ps = psi.at(i2, i3);
      out.r[0].at(i2, i3) =
          (vp(0) - vm(0)) - ac.a[1].at(i2, i3) * ps - sl.bs->sfrak * tension.at(i2, i3);
      const Vec8 d1p = Up.d1(0, i2, i3), d1m = Um.d1(0, i2, i3);
      for (int j = 0; j < 3; ++j)
        out.r[1 + j].at(i2, i3) = (vp(1 + j) - vm(1 + j)) + ps * (d1p(1 + j) + d1m(1 + j));
      const Vec3 dH(vp(4) - vm(4), vp(5) - vm(5), vp(6) - vm(6));
      out.r[4].at(i2, i3) = dH.dot(tau1) - ac.a[5].at(i2, i3) * ps;
      out.r[5].at(i2, i3) = dH.dot(tau2) - ac.a[6].at(i2, i3) * ps;
      const Vec8 bp = sl.bs->flow.U[sl.k].side(Side::plus).at(0, i2, i3);
      const Vec3 vdot_p(vp(1), vp(2), vp(3));
      out.r[6].at(i2, i3) = dtpsi.at(i2, i3) + bp(2) * psi.d2(i2, i3) + bp(3) * psi.d3(i2, i3) -
                            vdot_p.dot(N) + ac.a[7].at(i2, i3) * ps;
    }
  return out;
}

// Full linearized boundary operator B'(V, psi), including the [H1] d psi
// terms that vanish when the base satisfies [H] = 0.
inline BoundaryRows boundary_linearized(const BasicSlice& sl, const PairFields& V,
                                        const InterfaceField& psi, const InterfaceField& dtpsi) {
  const Torus2& t = sl.grid().t;
  BoundaryRows out(t);
  const auto& phi = sl.bs->flow.phi[sl.k];
  InterfaceField tension = curvature_linearized(phi, psi);
  const auto& Up = sl.bs->flow.U[sl.k].side(Side::plus);
  const auto& Um = sl.bs->flow.U[sl.k].side(Side::minus);
  for (int i3 = 0; i3 < t.n3; ++i3)
    for (int i2 = 0; i2 < t.n2; ++i2) {
      const Vec8 vp = V.side(Side::plus).at(0, i2, i3);
      const Vec8 vm = V.side(Side::minus).at(0, i2, i3);
      const Vec8 bp = Up.at(0, i2, i3), bm = Um.at(0, i2, i3);
      const double p2 = phi.d2(i2, i3), p3 = phi.d3(i2, i3);
      const Vec3 N(1.0, -p2, -p3), tau1(p2, 1.0, 0.0), tau2(p3, 0.0, 1.0);
      out.r[0].at(i2, i3) = (vp(0) - vm(0)) - sl.bs->sfrak * tension.at(i2, i3);
      for (int j = 0; j < 3; ++j) out.r[1 + j].at(i2, i3) = vp(1 + j) - vm(1 + j);
      const Vec3 dH(vp(4) - vm(4), vp(5) - vm(5), vp(6) - vm(6));
      const double jumpH1 = bp(4) - bm(4);
      out.r[4].at(i2, i3) = dH.dot(tau1) + jumpH1 * psi.d2(i2, i3);
      out.r[5].at(i2, i3) = dH.dot(tau2) + jumpH1 * psi.d3(i2, i3);
      const Vec3 v_p(vp(1), vp(2), vp(3));
      out.r[6].at(i2, i3) = dtpsi.at(i2, i3) + bp(2) * psi.d2(i2, i3) + bp(3) * psi.d3(i2, i3) -
                            v_p.dot(N);
    }
  return out;
}

// Nonlinear boundary operator B(U+, U-, phi) on a history level.
inline BoundaryRows apply_nonlinear_B(const FlowHistory& hist, int k, double sfrak) {
  const Torus2& t = hist.g.t;
  BoundaryRows out(t);
  const auto& phi = hist.phi[k];
  InterfaceField dtphi = dt_series(hist.phi, k, hist.dt);
  InterfaceField curv = curvature(phi);
  for (int i3 = 0; i3 < t.n3; ++i3)
    for (int i2 = 0; i2 < t.n2; ++i2) {
      const Vec8 up = hist.U[k].side(Side::plus).at(0, i2, i3);
      const Vec8 um = hist.U[k].side(Side::minus).at(0, i2, i3);
      const double p2 = phi.d2(i2, i3), p3 = phi.d3(i2, i3);
      const Vec3 N(1.0, -p2, -p3), tau1(p2, 1.0, 0.0), tau2(p3, 0.0, 1.0);
      out.r[0].at(i2, i3) = (up(0) - um(0)) - sfrak * curv.at(i2, i3);
      for (int j = 0; j < 3; ++j) out.r[1 + j].at(i2, i3) = up(1 + j) - um(1 + j);
      const Vec3 dH(up(4) - um(4), up(5) - um(5), up(6) - um(6));
      out.r[4].at(i2, i3) = dH.dot(tau1);
      out.r[5].at(i2, i3) = dH.dot(tau2);
      const Vec3 v_p(up(1), up(2), up(3));
      out.r[6].at(i2, i3) = dtphi.at(i2, i3) - v_p.dot(N);
    }
  return out;
}

// Second derivative of the boundary operator; symmetric bilinear form in
// ((V1,psi1),(V2,psi2)).  Row 1 is the second variation of the tension term.
inline BoundaryRows boundary_second_derivative(const BasicSlice& sl, const PairFields& V1,
                                               const InterfaceField& psi1, const PairFields& V2,
                                               const InterfaceField& psi2) {
  const Torus2& t = sl.grid().t;
  BoundaryRows out(t);
  const auto& phi = sl.bs->flow.phi[sl.k];
  // row 1: s D . ( (z0.z2) z1 + (z1.z2) z0 + (z0.z1) z2 - 3 (z0.z1)(z0.z2) z0 / |N|^2 ) / |N|^3
  InterfaceField F2(t), F3(t);
  for (int i3 = 0; i3 < t.n3; ++i3)
    for (int i2 = 0; i2 < t.n2; ++i2) {
      const Vec2 z0(phi.d2(i2, i3), phi.d3(i2, i3));
      const Vec2 z1(psi1.d2(i2, i3), psi1.d3(i2, i3));
      const Vec2 z2(psi2.d2(i2, i3), psi2.d3(i2, i3));
      const double nn = 1.0 + z0.squaredNorm();
      const double n3 = nn * std::sqrt(nn), n5 = nn * n3;
      const Vec2 flux = (z0.dot(z2) * z1 + z1.dot(z2) * z0 + z0.dot(z1) * z2) / n3 -
                        3.0 * z0.dot(z1) * z0.dot(z2) * z0 / n5;
      F2.at(i2, i3) = flux(0);
      F3.at(i2, i3) = flux(1);
    }
  for (int i3 = 0; i3 < t.n3; ++i3)
    for (int i2 = 0; i2 < t.n2; ++i2) {
      out.r[0].at(i2, i3) = sl.bs->sfrak * (F2.d2(i2, i3) + F3.d3(i2, i3));
      const Vec8 a = V1.side(Side::plus).at(0, i2, i3);
      const Vec8 am = V1.side(Side::minus).at(0, i2, i3);
      const Vec8 b = V2.side(Side::plus).at(0, i2, i3);
      const Vec8 bm = V2.side(Side::minus).at(0, i2, i3);
      const double jump1_H1 = a(4) - am(4);
      const double jump2_H1 = b(4) - bm(4);
      out.r[1].at(i2, i3) = out.r[2].at(i2, i3) = out.r[3].at(i2, i3) = 0.0;
      out.r[4].at(i2, i3) = jump1_H1 * psi2.d2(i2, i3) + jump2_H1 * psi1.d2(i2, i3);
      out.r[5].at(i2, i3) = jump1_H1 * psi2.d3(i2, i3) + jump2_H1 * psi1.d3(i2, i3);
      out.r[6].at(i2, i3) = b(2) * psi1.d2(i2, i3) + b(3) * psi1.d3(i2, i3) +
                            a(2) * psi2.d2(i2, i3) + a(3) * psi2.d3(i2, i3);
    }
  return out;
}

// --------------------------------------------------------------------------
// W transform

// J = diag(1, Jv, JH, 1) built from (a, b) = (d2 Phi, d3 Phi).
inline Mat8 j_matrix(double a, double b) {
  Mat8 J = Mat8::Identity();
  J(1, 2) = a;
  J(1, 3) = b;
  const double nn = 1.0 + a * a + b * b;
  J.block<3, 3>(4, 4) << a / nn, b / nn, 1.0 / nn,
      (1.0 + b * b) / nn, -a * b / nn, -a / nn,
      -a * b / nn, (1.0 + a * a) / nn, -b / nn;
  return J;
}

// Closed-form inverse: rows of the H block are tau1, tau2, N.
inline Mat8 j_inverse(double a, double b) {
  Mat8 J = Mat8::Identity();
  J(1, 2) = -a;
  J(1, 3) = -b;
  J.block<3, 3>(4, 4) << a, 1.0, 0.0,
      b, 0.0, 1.0,
      1.0, -a, -b;
  return J;
}

struct WSplit {
  PairFields W;
  // noncharacteristic part = components 0..5, characteristic part = 6..7
};

inline PairFields w_from_v(const BasicSlice& sl, const PairFields& V) {
  const SlabGrid& g = sl.grid();
  PairFields out(g);
  for (Side s : {Side::plus, Side::minus})
    for (int i3 = 0; i3 < g.t.n3; ++i3)
      for (int i2 = 0; i2 < g.t.n2; ++i2)
        for (int i1 = 0; i1 <= g.n1; ++i1) {
          const Mat8 Ji = j_inverse(sl.map.d2Phi(s, i1, i2, i3), sl.map.d3Phi(s, i1, i2, i3));
          out.side(s).set(i1, i2, i3, Ji * V.side(s).at(i1, i2, i3));
        }
  return out;
}

inline PairFields v_from_w(const BasicSlice& sl, const PairFields& W) {
  const SlabGrid& g = sl.grid();
  PairFields out(g);
  for (Side s : {Side::plus, Side::minus})
    for (int i3 = 0; i3 < g.t.n3; ++i3)
      for (int i2 = 0; i2 < g.t.n2; ++i2)
        for (int i1 = 0; i1 <= g.n1; ++i1) {
          const Mat8 J = j_matrix(sl.map.d2Phi(s, i1, i2, i3), sl.map.d3Phi(s, i1, i2, i3));
          out.side(s).set(i1, i2, i3, J * W.side(s).at(i1, i2, i3));
        }
  return out;
}

// --------------------------------------------------------------------------
// Decomposition A1(bold) = A(0) + A(1) with A(0) vanishing on the boundary.

// Sparse boundary part A(1) from local magnetic trace values.
inline Mat8 a1_sparse_part(Side s, const Vec3& H, const Vec3& Nloc) {
  const double HN = H.dot(Nloc);
  Mat8 A = Mat8::Zero();
  A(0, 1) = A(1, 0) = 1.0;
  A(1, 4) = A(4, 1) = H(1);
  A(1, 5) = A(5, 1) = H(2);
  A(2, 4) = A(4, 2) = -HN;
  A(3, 5) = A(5, 3) = -HN;
  return side_sign(s) * A;
}

// A1(bold) = J^T A1~ J at a grid point.
inline Mat8 a1_bold(const BasicSlice& sl, Side s, int i1, int i2, int i3) {
  const Constitutive& c = sl.bs->cons_of(s);
  const FluidState u = FluidState::from_vec(sl.state(s, i1, i2, i3), s);
  const LiftSlopes ls = sl.slopes(s, i1, i2, i3);
  const Mat8 J = j_matrix(ls.d2, ls.d3);
  return J.transpose() * assemble_tildeA1(c, u, ls) * J;
}

struct A1Decomposition {
  Mat8 a0_part;  // vanishes on the boundary trace
  Mat8 a1_part;  // sparse displayed matrix
};

inline A1Decomposition decompose_A1(const BasicSlice& sl, Side s, int i1, int i2, int i3) {
  const Vec8 u = sl.state(s, i1, i2, i3);
  const LiftSlopes ls = sl.slopes(s, i1, i2, i3);
  const Vec3 H(u(4), u(5), u(6));
  const Vec3 Nloc(1.0, -ls.d2, -ls.d3);
  A1Decomposition d;
  d.a1_part = a1_sparse_part(s, H, Nloc);
  d.a0_part = a1_bold(sl, s, i1, i2, i3) - d.a1_part;
  return d;
}

}  // namespace mcd
