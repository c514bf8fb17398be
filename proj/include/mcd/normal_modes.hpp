#pragma once

#include "mcd/symbols.hpp"

namespace mcd {

// Dense normal-mode oracle for the constant contact background.
//
// One tangential Fourier mode exp(i k . x'): the two half-space problems
// couple through the seven interface conditions with the surface-tension
// term s |k|^2 psi.  The semidiscretization is summation-by-parts in x1 with
// penalty (SAT) coupling constructed so that the discrete energy
//    E = sum_sides sum_j w_j A0 V_j . V_j + s |k|^2 |psi|^2
// is nonincreasing for every state; the temporal eigenvalues of the pencil
// therefore satisfy Re(lambda) <= 0 up to rounding, matching the neutral
// stability of the continuous problem.  Interface penalties cancel the
// physical flux exchange exactly and damp the jump residuals; the outer end
// carries characteristic absorption.

struct NormalModeOptions {
  int n1 = 32;          // cells in x1
  double X1 = 6.0;
  double beta = 1.0;    // jump dissipation strength
  double beta_p = 1.0;  // pressure-jump dissipation strength
  double localization_cut = 0.5;   // fraction of X1 counted as "near"
  double localization_tol = 0.05;  // far-energy fraction for a decaying mode
};

struct NormalModeResult {
  std::vector<std::complex<double>> all_modes;
  std::vector<std::complex<double>> surface_modes;  // decaying + jump-consistent
  std::vector<double> far_fraction;                 // of all_modes
  std::vector<double> bc_residual;                  // jump-consistency of all_modes
  double max_re_surface = 0.0;
  double max_re_all = 0.0;
};

inline NormalModeResult normal_modes(const BackgroundState& bg, const Constitutive& cons,
                                     double sfrak, const Vec2& k,
                                     const NormalModeOptions& opt = {}) {
  using Cplx = std::complex<double>;
  using CMat = Eigen::MatrixXcd;

  const int N = opt.n1;
  const double h = opt.X1 / N;
  const int nn = N + 1;
  const int dim = 16 * nn + 1;
  const int psi_slot = 16 * nn;
  const double w0 = 0.5 * h, wN = 0.5 * h;
  const double ksq = k.squaredNorm();

  const FluidState up = bg.state(Side::plus);
  const FluidState um = bg.state(Side::minus);
  const Mat8 A0p = assemble_A0(cons, up), A0m = assemble_A0(cons, um);
  const Mat8 A1p = assemble_Ai(cons, up, 1), A1m = assemble_Ai(cons, um, 1);
  const Mat8 Tp = k(0) * assemble_Ai(cons, up, 2) + k(1) * assemble_Ai(cons, up, 3);
  const Mat8 Tm = k(0) * assemble_Ai(cons, um, 2) + k(1) * assemble_Ai(cons, um, 3);

  auto node = [&](int side, int j, int comp) { return side * 8 * nn + 8 * j + comp; };

  CMat A = CMat::Zero(dim, dim);
  const Cplx I(0.0, 1.0);

  // interior: A0 dV/dt = -/+ A1 D1 V - i T V    (minus side has A1~ = -A1)
  for (int side = 0; side < 2; ++side) {
    const Mat8& A1 = side == 0 ? A1p : A1m;
    const Mat8& T = side == 0 ? Tp : Tm;
    const double sgn = side == 0 ? 1.0 : -1.0;
    for (int j = 0; j <= N; ++j) {
      auto add_d1 = [&](int jj, double coef) {
        for (int r = 0; r < 8; ++r)
          for (int c = 0; c < 8; ++c)
            A(node(side, j, r), node(side, jj, c)) += -sgn * coef * A1(r, c);
      };
      if (j == 0) {
        add_d1(0, -1.0 / h);
        add_d1(1, 1.0 / h);
      } else if (j == N) {
        add_d1(N - 1, -1.0 / h);
        add_d1(N, 1.0 / h);
      } else {
        add_d1(j - 1, -0.5 / h);
        add_d1(j + 1, 0.5 / h);
      }
      for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) A(node(side, j, r), node(side, j, c)) += -I * T(r, c);
    }
  }

  // state component slots: p=0, v=1..3, H=4..6, S=7
  const Vec3 Hb = bg.H_bar;
  // jump functionals J_r(x): r_p, dv1, dv2, dv3, dH2, dH3
  auto add_jump_row = [&](Eigen::Matrix<Cplx, 6, Eigen::Dynamic>& Jrows) {
    Jrows.setZero(6, dim);
    Jrows(0, node(0, 0, 0)) = 1.0;
    Jrows(0, node(1, 0, 0)) = -1.0;
    Jrows(0, psi_slot) = sfrak * ksq;
    for (int i = 0; i < 3; ++i) {
      Jrows(1 + i, node(0, 0, 1 + i)) = 1.0;
      Jrows(1 + i, node(1, 0, 1 + i)) = -1.0;
    }
    Jrows(4, node(0, 0, 5)) = 1.0;
    Jrows(4, node(1, 0, 5)) = -1.0;
    Jrows(5, node(0, 0, 6)) = 1.0;
    Jrows(5, node(1, 0, 6)) = -1.0;
  };
  Eigen::Matrix<Cplx, 6, Eigen::Dynamic> Jrows;
  add_jump_row(Jrows);

  // conservative coupling G (pairs jump residuals with trace averages so the
  // non-tension part of the interface flux cancels exactly)
  Eigen::Matrix<double, 6, 8> G = Eigen::Matrix<double, 6, 8>::Zero();
  G(0, 1) = 1.0;                       // r_p with v1
  G(1, 0) = 1.0;                       // dv1 with p
  G(1, 5) = Hb(1);
  G(1, 6) = Hb(2);
  G(2, 5) = -Hb(0);
  G(3, 6) = -Hb(0);
  G(4, 1) = Hb(1);
  G(4, 2) = -Hb(0);
  G(5, 1) = Hb(2);
  G(5, 3) = -Hb(0);

  // average functionals at the interface
  auto avg_col = [&](int comp) {
    Eigen::RowVectorXcd row = Eigen::RowVectorXcd::Zero(dim);
    row(node(0, 0, comp)) = 0.5;
    row(node(1, 0, comp)) = 0.5;
    return row;
  };

  // Conservative coupling: SAT(node 0, both sides, same sign)
  //   += -(1/(2 w0)) G^T J,
  // which cancels the indefinite jump-average pairing of the interface flux
  // exactly, leaving only the tension exchange absorbed by the psi energy.
  for (int r = 0; r < 6; ++r)
    for (int a = 0; a < 8; ++a) {
      const double gra = G(r, a);
      if (gra == 0.0) continue;
      for (int side = 0; side < 2; ++side)
        A.row(node(side, 0, a)) += -(1.0 / (2.0 * w0)) * gra * Jrows.row(r);
    }

  // jump dissipation on (v, H2, H3) and on the tension-corrected pressure jump
  for (int r = 1; r < 6; ++r) {
    const int slot = (r <= 3) ? r : r + 1;
    A.row(node(0, 0, slot)) += -(opt.beta / (2.0 * w0)) * Jrows.row(r);
    A.row(node(1, 0, slot)) += +(opt.beta / (2.0 * w0)) * Jrows.row(r);
  }
  A.row(node(0, 0, 0)) += -(opt.beta_p / (2.0 * w0)) * Jrows.row(0);
  A.row(node(1, 0, 0)) += +(opt.beta_p / (2.0 * w0)) * Jrows.row(0);

  // kinematic row: dpsi/dt = avg(v1) - i (k . v_tan) psi - (beta_p/2) r_p
  A.row(psi_slot) += avg_col(1);
  A(psi_slot, psi_slot) += -I * (k(0) * bg.v_bar(1) + k(1) * bg.v_bar(2));
  A.row(psi_slot) += -(opt.beta_p / 2.0) * Jrows.row(0);

  // outer absorption: SAT+ = +(1/wN)(A1)_- V_N, SAT- = -(1/wN)(A1)_+ V_N
  auto neg_part = [&](const Mat8& M) {
    Eigen::SelfAdjointEigenSolver<Mat8> es(M);
    Mat8 out = Mat8::Zero();
    for (int m = 0; m < 8; ++m)
      if (es.eigenvalues()(m) < 0)
        out += es.eigenvalues()(m) * es.eigenvectors().col(m) *
               es.eigenvectors().col(m).transpose();
    return out;
  };
  const Mat8 A1p_neg = neg_part(A1p);
  const Mat8 A1m_pos = -neg_part(-A1m);
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) {
      A(node(0, N, r), node(0, N, c)) += (1.0 / wN) * A1p_neg(r, c);
      A(node(1, N, r), node(1, N, c)) += -(1.0 / wN) * A1m_pos(r, c);
    }

  // reduce the generalized problem M x' = A x with M = blockdiag(A0, ..., 1)
  // to a standard one via the SPD square root of M
  Eigen::SelfAdjointEigenSolver<Mat8> esp(A0p), esm(A0m);
  const Mat8 Sp_inv = esp.operatorInverseSqrt();
  const Mat8 Sm_inv = esm.operatorInverseSqrt();
  CMat B = CMat::Zero(dim, dim);
  {
    // B = Minv_sqrt * A * Minv_sqrt, applied blockwise
    CMat tmp = A;
    for (int j = 0; j <= N; ++j) {
      tmp.middleRows(node(0, j, 0), 8) = Sp_inv * tmp.middleRows(node(0, j, 0), 8);
      tmp.middleRows(node(1, j, 0), 8) = Sm_inv * tmp.middleRows(node(1, j, 0), 8);
    }
    for (int j = 0; j <= N; ++j) {
      tmp.middleCols(node(0, j, 0), 8) = tmp.middleCols(node(0, j, 0), 8) * Sp_inv;
      tmp.middleCols(node(1, j, 0), 8) = tmp.middleCols(node(1, j, 0), 8) * Sm_inv;
    }
    B = std::move(tmp);
  }

  Eigen::ComplexEigenSolver<CMat> ces(B, /*computeEigenvectors=*/true);
  require(ces.info() == Eigen::Success, Err::NoDecayingBasis, "eigensolve failed");

  NormalModeResult res;
  res.max_re_all = -1e300;
  for (int m = 0; m < dim; ++m) {
    const Cplx lam = ces.eigenvalues()(m);
    res.all_modes.push_back(lam);
    res.max_re_all = std::max(res.max_re_all, lam.real());
    // energy split of the eigenvector (y = M^{1/2} x, so |y|^2 is the
    // A0-weighted state energy; psi carries unit weight)
    double near = 0.0, far = 0.0;
    const auto& y = ces.eigenvectors().col(m);
    for (int side = 0; side < 2; ++side)
      for (int j = 0; j <= N; ++j) {
        const double wj = (j == 0 || j == N) ? 0.5 * h : h;
        double e = 0.0;
        for (int c = 0; c < 8; ++c) e += std::norm(y(node(side, j, c)));
        ((j * h <= opt.localization_cut * opt.X1) ? near : far) += wj * e;
      }
    near += std::norm(y(psi_slot));
    const double frac = far / std::max(1e-300, near + far);
    res.far_fraction.push_back(frac);
    // jump-consistency: the physical state x = M^{-1/2} y must satisfy the
    // interface conditions; penalty-damped artifacts violate them at O(1)
    Eigen::VectorXcd x = y;
    for (int j = 0; j <= N; ++j) {
      x.segment(node(0, j, 0), 8) = Sp_inv * x.segment(node(0, j, 0), 8);
      x.segment(node(1, j, 0), 8) = Sm_inv * x.segment(node(1, j, 0), 8);
    }
    const double bc = (Jrows * x).norm();
    double trace_scale = std::abs(x(psi_slot));
    for (int c = 0; c < 8; ++c)
      trace_scale += std::abs(x(node(0, 0, c))) + std::abs(x(node(1, 0, c)));
    const double bc_rel = bc / std::max(1e-300, trace_scale);
    res.bc_residual.push_back(bc_rel);
    if (frac <= opt.localization_tol && bc_rel <= 0.05) {
      res.surface_modes.push_back(lam);
      res.max_re_surface = std::max(res.max_re_surface, lam.real());
    }
  }
  require(!res.all_modes.empty(), Err::NoDecayingBasis, "empty spectrum");
  return res;
}

}  // namespace mcd
