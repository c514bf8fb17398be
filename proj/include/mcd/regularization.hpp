#pragma once

#include "mcd/linearization.hpp"

namespace mcd {

// Selector matrices of the regularized interior operator.  J- is constant;
// J+ carries the Gram matrix of the invertible H-block of the W transform,
// evaluated from (a, b) = (d2 Phi+, d3 Phi+).
inline Mat8 j_reg_minus() {
  Mat8 J = Mat8::Zero();
  J(0, 0) = J(1, 1) = J(2, 2) = J(3, 3) = 1.0;
  return J;
}

inline Mat8 j_reg_plus(double a, double b) {
  Mat8 J = Mat8::Zero();
  J(1, 1) = 1.0;
  const double nn = 1.0 + a * a + b * b;
  J(4, 4) = (1.0 + b * b) / nn;
  J(4, 5) = J(5, 4) = -a * b / nn;
  J(5, 5) = (1.0 + a * a) / nn;
  J(6, 6) = 1.0 / nn;
  return J;
}

inline Mat8 j_reg(Side s, double a, double b) {
  return s == Side::plus ? j_reg_plus(a, b) : j_reg_minus();
}

// Increasing C-infinity weight with sigma(x1) = x1 on [0,1] and sigma = 2
// for x1 >= 4 (the transition finishes at x1 = 3).
struct SigmaWeight {
  static constexpr int n = 4096;
  double xmax = 4.0;
  std::vector<double> table;

  SigmaWeight() : table(n + 1) {
    auto estep = [](double w) {  // C-infinity step on [0,1]
      if (w <= 0.0) return 0.0;
      if (w >= 1.0) return 1.0;
      const double g0 = std::exp(-1.0 / w), g1 = std::exp(-1.0 / (1.0 - w));
      return g0 / (g0 + g1);
    };
    auto slope = [&](double u) { return u <= 1.0 ? 1.0 : 1.0 - estep((u - 1.0) / 2.0); };
    double acc = 0.0;
    const double h = xmax / n;
    table[0] = 0.0;
    for (int i = 1; i <= n; ++i) {
      const double um = (i - 0.5) * h;
      acc += slope(um) * h;
      table[i] = acc;
    }
    // normalize so that sigma -> exactly 2 at the end of the transition
    const double target = 2.0;
    const double tail = table[n];
    for (int i = 0; i <= n; ++i) table[i] *= target / tail;
  }

  double operator()(double x1) const {
    if (x1 <= 0.0) return 0.0;
    if (x1 >= xmax) return 2.0;
    const double r = x1 / xmax * n;
    const int i = std::min(static_cast<int>(r), n - 1);
    const double f = r - i;
    return (1.0 - f) * table[i] + f * table[i + 1];
  }
};

struct EpsilonSystem {
  double epsilon = 1e-3;
  double epsilon0 = 0.1;  // admissible upper bound found by bisection
  SigmaWeight sigma;
};

// Regularized boundary matrix diag(eps J+ - A1+, eps J- - A1-) at one
// boundary point of a basic-state slice.
inline Eigen::Matrix<double, 16, 16> boundary_matrix_reg(const BasicSlice& sl, double eps,
                                                         int i2, int i3) {
  Eigen::Matrix<double, 16, 16> M;
  M.setZero();
  for (Side s : {Side::plus, Side::minus}) {
    const double a = sl.map.d2Phi(s, 0, i2, i3), b = sl.map.d3Phi(s, 0, i2, i3);
    const Mat8 A1 = a1_bold(sl, s, 0, i2, i3);
    const Mat8 B = eps * j_reg(s, a, b) - A1;
    const int off = (s == Side::plus) ? 0 : 8;
    M.block<8, 8>(off, off) = B;
  }
  return M;
}

inline Inertia boundary_inertia_reg(const BasicSlice& sl, double eps, int i2, int i3) {
  // no ambiguity band here: small eps legitimately creates small eigenvalues
  return count_inertia(boundary_matrix_reg(sl, eps, i2, i3), 1e-12, 1.0000001e-12);
}

// Checked variant used by the solver: throws if the incoming count is wrong.
inline Inertia require_incoming_six(const BasicSlice& sl, double eps, int i2, int i3) {
  Inertia in = boundary_inertia_reg(sl, eps, i2, i3);
  require(in.n_minus == 6, Err::InertiaChanged,
          "regularized boundary matrix does not have 6 negative eigenvalues");
  return in;
}

// Largest epsilon in (lo, hi] keeping 6 negative eigenvalues at every
// boundary point of the slice, found by bisection.
inline double find_epsilon0(const BasicSlice& sl, double lo = 1e-8, double hi = 1e-1,
                            int iters = 40) {
  auto ok = [&](double eps) {
    for (int i3 = 0; i3 < sl.grid().t.n3; ++i3)
      for (int i2 = 0; i2 < sl.grid().t.n2; ++i2)
        if (boundary_inertia_reg(sl, eps, i2, i3).n_minus != 6) return false;
    return true;
  };
  require(ok(lo), Err::InertiaChanged, "incoming count wrong even at the smallest epsilon");
  if (ok(hi)) return hi;
  double a = lo, b = hi;
  for (int i = 0; i < iters; ++i) {
    const double m = 0.5 * (a + b);
    (ok(m) ? a : b) = m;
  }
  return a;
}

// Quadratic boundary form of the regularization: sum over sides of
// (eps J - A1) U . U at one boundary point.
inline double boundary_quadratic_form(const BasicSlice& sl, double eps, int i2, int i3,
                                      const Vec8& Wp, const Vec8& Wm) {
  const auto M = boundary_matrix_reg(sl, eps, i2, i3);
  Eigen::Matrix<double, 16, 1> u;
  u << Wp, Wm;
  return u.dot(M * u);
}

// Interior operator of the reduced problem in W coordinates:
// L W = J^T L'_e (J W); the regularization subtracts eps J_reg d1 W.
// With eps == 0 the subtraction is skipped and the code path is identical
// to the unregularized operator.
inline PairFields regularized_interior(const EpsilonSystem& sys, const BasicState& bs, int k,
                                       const std::vector<PairFields>& Wseries) {
  require(sys.epsilon >= 0.0 && sys.epsilon <= sys.epsilon0, Err::EpsilonOutOfRange,
          "epsilon outside (0, epsilon0]");
  BasicSlice sl(bs, k);
  const SlabGrid& g = bs.flow.g;
  // V = J W per level for the time derivative
  std::vector<PairFields> Vs;
  Vs.reserve(Wseries.size());
  for (int l = 0; l < static_cast<int>(Wseries.size()); ++l)
    Vs.push_back(v_from_w(BasicSlice(bs, l), Wseries[l]));
  auto dtV = dt_series(Vs, k, bs.flow.dt);
  auto rV = apply_Lprime_e(sl, Vs[k], dtV);

  PairFields out(g);
  for (Side s : {Side::plus, Side::minus})
    for (int i3 = 0; i3 < g.t.n3; ++i3)
      for (int i2 = 0; i2 < g.t.n2; ++i2)
        for (int i1 = 0; i1 <= g.n1; ++i1) {
          const Mat8 Jt =
              j_matrix(sl.map.d2Phi(s, i1, i2, i3), sl.map.d3Phi(s, i1, i2, i3)).transpose();
          Vec8 r = Jt * rV.side(s).at(i1, i2, i3);
          if (sys.epsilon != 0.0) {
            const Mat8 Jr = j_reg(s, sl.map.d2Phi(s, i1, i2, i3), sl.map.d3Phi(s, i1, i2, i3));
            r -= sys.epsilon * (Jr * Wseries[k].side(s).d1(i1, i2, i3));
          }
          out.side(s).set(i1, i2, i3, r);
        }
  return out;
}

// Residual of the regularized kinematic boundary condition:
// W2+ - [(dt + v2+ d2 + v3+ d3) psi + a7 psi + eps (d2^4 + d3^4) psi].
inline InterfaceField regularized_kinematic(const EpsilonSystem& sys, const BasicState& bs,
                                            int k, const InterfaceField& W2plus,
                                            const std::vector<InterfaceField>& psi_series) {
  BasicSlice sl(bs, k);
  const Torus2& t = bs.flow.g.t;
  InterfaceField out(t);
  const auto ac = a_coeffs(sl);
  const auto& psi = psi_series[k];
  InterfaceField dtpsi = dt_series(psi_series, k, bs.flow.dt);
  for (int i3 = 0; i3 < t.n3; ++i3)
    for (int i2 = 0; i2 < t.n2; ++i2) {
      const Vec8 up = bs.flow.U[k].side(Side::plus).at(0, i2, i3);
      double rhs = dtpsi.at(i2, i3) + up(2) * psi.d2(i2, i3) + up(3) * psi.d3(i2, i3) +
                   ac.a[7].at(i2, i3) * psi.at(i2, i3);
      if (sys.epsilon != 0.0)
        rhs += sys.epsilon * (psi.d4_axis2(i2, i3) + psi.d4_axis3(i2, i3));
      out.at(i2, i3) = W2plus.at(i2, i3) - rhs;
    }
  return out;
}

// Transport speed w1 = (v . N - dt Phi) / d1 Phi of the basic state; zero on
// the boundary trace by the matching conditions.
inline SlabField w1_ring(const BasicSlice& sl, Side s) {
  const SlabGrid& g = sl.grid();
  SlabField out(g);
  for (int i3 = 0; i3 < g.t.n3; ++i3)
    for (int i2 = 0; i2 < g.t.n2; ++i2)
      for (int i1 = 0; i1 <= g.n1; ++i1) {
        const Vec8 u = sl.state(s, i1, i2, i3);
        const LiftSlopes ls = sl.slopes(s, i1, i2, i3);
        const Vec3 Nloc(1.0, -ls.d2, -ls.d3);
        const Vec3 v(u(1), u(2), u(3));
        out.at(i1, i2, i3) = (v.dot(Nloc) - ls.dt) / ls.d1;
      }
  return out;
}

// Scalar transport residual (dt + w1 d1 + v2 d2 + v3 d3 [- eps d1]) q - rhs
// for fields on one side; eps_d1 engages the + side regularization term.
inline SlabField transport_residual(const BasicSlice& sl, Side s,
                                    const std::vector<SlabField>& q_series, int k,
                                    const SlabField& rhs, double eps_d1) {
  const SlabGrid& g = sl.grid();
  SlabField out(g);
  SlabField w1 = w1_ring(sl, s);
  const auto& q = q_series[k];
  // discrete time derivative of the scalar series
  std::vector<InterfaceField> dummy;
  SlabField dtq(g);
  {
    const int n = static_cast<int>(q_series.size());
    auto acc = [&](double a, const SlabField& x) {
      for (std::size_t i = 0; i < dtq.a.size(); ++i) dtq.a[i] += a * x.a[i];
    };
    const double dt = sl.bs->flow.dt;
    if (n >= 3) {
      if (k == 0) {
        acc(-1.5 / dt, q_series[0]);
        acc(2.0 / dt, q_series[1]);
        acc(-0.5 / dt, q_series[2]);
      } else if (k == n - 1) {
        acc(1.5 / dt, q_series[n - 1]);
        acc(-2.0 / dt, q_series[n - 2]);
        acc(0.5 / dt, q_series[n - 3]);
      } else {
        acc(0.5 / dt, q_series[k + 1]);
        acc(-0.5 / dt, q_series[k - 1]);
      }
    } else if (n == 2) {
      acc(1.0 / dt, q_series[1]);
      acc(-1.0 / dt, q_series[0]);
    }
  }
  for (int i3 = 0; i3 < g.t.n3; ++i3)
    for (int i2 = 0; i2 < g.t.n2; ++i2)
      for (int i1 = 0; i1 <= g.n1; ++i1) {
        const Vec8 u = sl.state(s, i1, i2, i3);
        double r = dtq.at(i1, i2, i3) + w1.at(i1, i2, i3) * q.d1(i1, i2, i3) +
                   u(2) * q.d2(i1, i2, i3) + u(3) * q.d3(i1, i2, i3) -
                   rhs.at(i1, i2, i3);
        if (eps_d1 != 0.0) r -= eps_d1 * q.d1(i1, i2, i3);
        out.at(i1, i2, i3) = r;
      }
  return out;
}

// Linearized magnetic divergence from the W variables (the xi identity):
// xi = (1/d1 Phi) d1 W7 + sum_k [ (d1 dk Phi / d1 Phi) H_k + dkH_k ].
inline SlabField xi_from_w(const BasicSlice& sl, Side s, const SideFields& W) {
  const SlabGrid& g = sl.grid();
  SlabField out(g);
  // reconstruct H components pointwise
  SlabField H1(g), H2(g), H3(g);
  for (int i3 = 0; i3 < g.t.n3; ++i3)
    for (int i2 = 0; i2 < g.t.n2; ++i2)
      for (int i1 = 0; i1 <= g.n1; ++i1) {
        const double a = sl.map.d2Phi(s, i1, i2, i3), b = sl.map.d3Phi(s, i1, i2, i3);
        const Mat8 J = j_matrix(a, b);
        const Vec8 w = W.at(i1, i2, i3);
        const Vec3 H = J.block<3, 3>(4, 4) * Vec3(w(4), w(5), w(6));
        H1.at(i1, i2, i3) = H(0);
        H2.at(i1, i2, i3) = H(1);
        H3.at(i1, i2, i3) = H(2);
      }
  for (int i3 = 0; i3 < g.t.n3; ++i3)
    for (int i2 = 0; i2 < g.t.n2; ++i2)
      for (int i1 = 0; i1 <= g.n1; ++i1) {
        const double J1 = sl.map.d1Phi(s, i1, i2, i3);
        // d1 dk Phi = chi'(x1) dk phi
        const double d1d2 = sl.map.chi_d[i1] * sl.map.phi.d2(i2, i3);
        const double d1d3 = sl.map.chi_d[i1] * sl.map.phi.d3(i2, i3);
        out.at(i1, i2, i3) = W.c[6].d1(i1, i2, i3) / J1 +
                             (d1d2 / J1) * H2.at(i1, i2, i3) + H2.d2(i1, i2, i3) +
                             (d1d3 / J1) * H3.at(i1, i2, i3) + H3.d3(i1, i2, i3);
      }
  return out;
}

}  // namespace mcd
