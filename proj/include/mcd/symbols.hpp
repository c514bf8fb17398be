#pragma once

#include "mcd/eos.hpp"

namespace mcd {

// Symmetric hyperbolic form of ideal compressible MHD in the variables
// U = (p, v1, v2, v3, H1, H2, H3, S).  All entries follow that ordering.

inline Mat8 assemble_A0(const Constitutive& c, const FluidState& u) {
  require(check_hyperbolicity(c, u).ok, Err::HyperbolicityViolated, "assemble_A0");
  const double rho = c.rho(u.p, u.S);
  const double rp = c.rho_p(u.p, u.S);  // 1/(rho a^2) = rho_p / rho
  Mat8 A = Mat8::Zero();
  A(0, 0) = rp / rho;
  A(1, 1) = A(2, 2) = A(3, 3) = rho;
  A(4, 4) = A(5, 5) = A(6, 6) = A(7, 7) = 1.0;
  return A;
}

inline Mat8 assemble_Ai(const Constitutive& c, const FluidState& u, int axis) {
  require(axis >= 1 && axis <= 3, Err::ConfigInvalid, "axis must be 1, 2 or 3");
  require(check_hyperbolicity(c, u).ok, Err::HyperbolicityViolated, "assemble_Ai");
  const double rho = c.rho(u.p, u.S);
  const double rp = c.rho_p(u.p, u.S);
  const double vi = u.v(axis - 1);
  Mat8 A = Mat8::Zero();
  A(0, 0) = vi * rp / rho;
  A(0, axis) = 1.0;
  A(axis, 0) = 1.0;
  for (int j = 0; j < 3; ++j) A(1 + j, 1 + j) = rho * vi;
  // magnetic coupling e_i (x) H - H_i I3 and its transpose
  for (int j = 0; j < 3; ++j)
    for (int k = 0; k < 3; ++k) {
      const double m = (j == axis - 1 ? u.H(k) : 0.0) - (j == k ? u.H(axis - 1) : 0.0);
      A(1 + j, 4 + k) = m;
      A(4 + k, 1 + j) = m;
    }
  A(4, 4) = A(5, 5) = A(6, 6) = vi;
  A(7, 7) = vi;
  return A;
}

// Partial derivative of A0 with respect to state component k.
inline Mat8 dA0_dU(const Constitutive& c, const FluidState& u, int k) {
  Mat8 D = Mat8::Zero();
  if (k != 0 && k != 7) return D;
  const double rho = c.rho(u.p, u.S);
  const double rp = c.rho_p(u.p, u.S);
  if (k == 0) {
    D(0, 0) = (c.rho_pp(u.p, u.S) * rho - rp * rp) / (rho * rho);
    D(1, 1) = D(2, 2) = D(3, 3) = rp;
  } else {
    const double rS = c.rho_S(u.p, u.S);
    D(0, 0) = (c.rho_pS(u.p, u.S) * rho - rp * rS) / (rho * rho);
    D(1, 1) = D(2, 2) = D(3, 3) = rS;
  }
  return D;
}

// Partial derivative of A_axis with respect to state component k.
inline Mat8 dAi_dU(const Constitutive& c, const FluidState& u, int axis, int k) {
  const double rho = c.rho(u.p, u.S);
  const double rp = c.rho_p(u.p, u.S);
  const double vi = u.v(axis - 1);
  Mat8 D = Mat8::Zero();
  if (k == 0 || k == 7) {
    const double dr = (k == 0) ? rp : c.rho_S(u.p, u.S);
    const double dq = (k == 0) ? (c.rho_pp(u.p, u.S) * rho - rp * rp) / (rho * rho)
                               : (c.rho_pS(u.p, u.S) * rho - rp * c.rho_S(u.p, u.S)) / (rho * rho);
    D(0, 0) = vi * dq;
    for (int j = 0; j < 3; ++j) D(1 + j, 1 + j) = dr * vi;
  } else if (k >= 1 && k <= 3) {
    const int m = k - 1;  // velocity component
    if (m == axis - 1) {
      D(0, 0) = rp / rho;
      for (int j = 0; j < 3; ++j) D(1 + j, 1 + j) = rho;
      D(4, 4) = D(5, 5) = D(6, 6) = 1.0;
      D(7, 7) = 1.0;
    }
  } else {
    const int m = k - 4;  // magnetic component
    for (int j = 0; j < 3; ++j)
      for (int l = 0; l < 3; ++l) {
        const double d = (j == axis - 1 && l == m ? 1.0 : 0.0) -
                         (m == axis - 1 && j == l ? 1.0 : 0.0);
        D(1 + j, 4 + l) += d;
        D(4 + l, 1 + j) += d;
      }
  }
  return D;
}

// Pointwise derivatives of the lift entering the flattened coefficient
// \tilde A_1 = (A_1 - dtPhi A_0 - d2Phi A_2 - d3Phi A_3) / d1Phi.
struct LiftSlopes {
  double dt = 0.0;   // \partial_t Phi
  double d1 = 1.0;   // \partial_1 Phi
  double d2 = 0.0;   // \partial_2 Phi
  double d3 = 0.0;   // \partial_3 Phi
};

inline Mat8 assemble_tildeA1(const Constitutive& c, const FluidState& u, const LiftSlopes& s) {
  require(std::abs(s.d1) >= 1e-6, Err::DegenerateJacobian, "assemble_tildeA1: |d1 Phi| too small");
  Mat8 A = assemble_Ai(c, u, 1) - s.dt * assemble_A0(c, u) - s.d2 * assemble_Ai(c, u, 2) -
           s.d3 * assemble_Ai(c, u, 3);
  return A / s.d1;
}

inline Mat8 dtildeA1_dU(const Constitutive& c, const FluidState& u, const LiftSlopes& s, int k) {
  Mat8 D = dAi_dU(c, u, 1, k) - s.dt * dA0_dU(c, u, k) - s.d2 * dAi_dU(c, u, 2, k) -
           s.d3 * dAi_dU(c, u, 3, k);
  return D / s.d1;
}

// 16x16 boundary matrix on Sigma for the flattened two-phase problem:
// blockdiag(-A1~(U+), -A1~(U-)) with d1 Phi = +-1 and the shared interface
// slopes (dt phi, D_x' phi).
struct BoundaryMatrix {
  Eigen::Matrix<double, 16, 16> M;
};

struct InterfaceSlopes {
  double dt_phi = 0.0;
  double d2_phi = 0.0;
  double d3_phi = 0.0;
};

inline BoundaryMatrix assemble_boundary_matrix(const Constitutive& cp, const FluidState& up,
                                               const Constitutive& cm, const FluidState& um,
                                               const InterfaceSlopes& s) {
  LiftSlopes lp{s.dt_phi, +1.0, s.d2_phi, s.d3_phi};
  LiftSlopes lm{s.dt_phi, -1.0, s.d2_phi, s.d3_phi};
  BoundaryMatrix b;
  b.M.setZero();
  b.M.block<8, 8>(0, 0) = -assemble_tildeA1(cp, up, lp);
  b.M.block<8, 8>(8, 8) = -assemble_tildeA1(cm, um, lm);
  return b;
}

struct Inertia {
  int n_plus = 0, n_minus = 0, n_zero = 0;
};

// Eigenvalue sign counts with a relative zero threshold.  Eigenvalues inside
// the ambiguity band [1e-9, 1e-6]*||M|| are rejected.
template <typename Mat>
inline Inertia count_inertia(const Mat& M, double zero_tol = 1e-9, double band_hi = 1e-6) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  const double scale = es.eigenvalues().cwiseAbs().maxCoeff();
  Inertia in;
  if (scale == 0.0) {
    in.n_zero = static_cast<int>(M.rows());
    return in;
  }
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    const double lam = es.eigenvalues()(i);
    const double r = std::abs(lam) / scale;
    require(r < zero_tol || r > band_hi, Err::IllConditionedSpectrum,
            "eigenvalue inside the zero-ambiguity band");
    if (r < zero_tol)
      ++in.n_zero;
    else if (lam > 0)
      ++in.n_plus;
    else
      ++in.n_minus;
  }
  return in;
}

inline Inertia boundary_inertia(const BoundaryMatrix& b) { return count_inertia(b.M); }

// Correct number of boundary conditions: 6 incoming characteristics plus one
// condition determining the interface function.
inline int bc_count() { return 7; }

}  // namespace mcd
