#pragma once

#include <memory>

#include "mcd/diagnostics.hpp"
#include "mcd/smoothing.hpp"

namespace mcd {

struct Grid {
  int nx1 = 64;
  int nx2 = 64;
  int nx3 = 1;
  double X1 = 8.0;
  double dt = 0.01;
  int nt = 100;
  double cfl_limit = 0.9;
  double dissipation = 0.02;  // fourth-difference damping of grid-scale waves

  SlabGrid slab(double L2 = 2.0 * M_PI, double L3 = 2.0 * M_PI) const {
    SlabGrid g;
    g.n1 = nx1;
    g.X1 = X1;
    g.t.n2 = nx2;
    g.t.n3 = nx3;
    g.t.L2 = L2;
    g.t.L3 = L3;
    return g;
  }
  double min_h(const SlabGrid& g) const {
    double h = std::min(g.h1(), g.t.h2());
    if (!g.t.planar()) h = std::min(h, g.t.h3());
    return h;
  }
};

// Effective linear problem data.  The interior source f and the boundary
// source g must vanish in the past; the basic state must span the window.
struct LinearProblem {
  BasicState bs;
  std::vector<PairFields> f;      // good-unknown coordinates, per time level
  std::vector<BoundaryRows> g;    // 7 rows on Sigma, per time level
  double epsilon = 1e-3;
  double epsilon0 = 0.1;
  enum class Coords { good_unknown, w } coords = Coords::good_unknown;
};

struct LinearSolution {
  std::vector<PairFields> W;        // reduced unknown (homogenized problem)
  std::vector<PairFields> Vdot;     // good-unknown coordinates, V_flat + V_natural
  std::vector<InterfaceField> psi;
  double dt = 0.0;
  int store_every = 1;

  // per-step diagnostics
  std::vector<double> l2_series;           // ||W(t)||_{L2(Omega)}
  std::vector<double> bc_residual_series;  // max jump-row residual after correction
  std::vector<double> energy_form_series;  // boundary quadratic form integral
  double h1_W = 0.0, l2_boundary = 0.0, h1_psi = 0.0;
  double h1_source = 0.0;
  double epsilon_used = 0.0;
  std::vector<double> cauchy_diffs;  // solve_effective schedule differences
  double extrapolation_estimate = 0.0;
};

// --------------------------------------------------------------------------
// Boundary-source homogenization: V_nat with B'_e(V_nat, 0) = g, realized by
// constant-in-x1 extension times the cutoff.

inline std::vector<PairFields> lift_boundary_source(const BasicState& bs,
                                                    const std::vector<BoundaryRows>& g) {
  const SlabGrid& sg = bs.flow.g;
  CutoffChi chi = bs.flow.chi;
  std::vector<double> chiv(sg.np1());
  for (int i = 0; i <= sg.n1; ++i) chiv[i] = chi(sg.x1(i));
  std::vector<PairFields> out;
  out.reserve(g.size());
  for (const auto& rows : g) {
    PairFields V(sg);
    for (int i3 = 0; i3 < sg.t.n3; ++i3)
      for (int i2 = 0; i2 < sg.t.n2; ++i2) {
        const double g1 = rows.r[0].at(i2, i3), g2 = rows.r[1].at(i2, i3);
        const double g3 = rows.r[2].at(i2, i3), g4 = rows.r[3].at(i2, i3);
        const double g5 = rows.r[4].at(i2, i3), g6 = rows.r[5].at(i2, i3);
        const double g7 = rows.r[6].at(i2, i3);
        for (int i1 = 0; i1 <= sg.n1; ++i1) {
          const double c = chiv[i1];
          V.side(Side::plus).c[0].at(i1, i2, i3) = c * g1;    // p+
          V.side(Side::plus).c[1].at(i1, i2, i3) = -c * g7;   // v1+
          V.side(Side::plus).c[5].at(i1, i2, i3) = c * g5;    // H2+
          V.side(Side::plus).c[6].at(i1, i2, i3) = c * g6;    // H3+
          V.side(Side::minus).c[1].at(i1, i2, i3) = -c * (g2 + g7);
          V.side(Side::minus).c[2].at(i1, i2, i3) = -c * g3;
          V.side(Side::minus).c[3].at(i1, i2, i3) = -c * g4;
        }
      }
    out.push_back(std::move(V));
  }
  return out;
}

// Reduce to homogeneous boundary source: returns the modified problem and the
// lift V_nat (needed to map the solution back).
inline LinearProblem homogenize_boundary(const LinearProblem& prob,
                                         std::vector<PairFields>* v_nat_out = nullptr) {
  LinearProblem out = prob;
  auto v_nat = lift_boundary_source(prob.bs, prob.g);
  for (int k = 0; k < static_cast<int>(prob.f.size()); ++k) {
    BasicSlice sl(prob.bs, k);
    auto dtv = dt_series(v_nat, k, prob.bs.flow.dt);
    auto LeV = apply_Lprime_e(sl, v_nat[k], dtv);
    axpy(out.f[k], -1.0, LeV);
    for (auto& row : out.g[k].r)
      for (auto& v : row.a) v = 0.0;
  }
  if (v_nat_out) *v_nat_out = std::move(v_nat);
  return out;
}

// --------------------------------------------------------------------------
// Solver internals

namespace solver_detail {

// per-node frozen coefficients for one basic-state slice
struct Coeffs {
  std::vector<Mat8> A0inv[2], At1[2], A2[2], A3[2], C[2];
  std::vector<Mat8> JregV[2];  // J^{-T} Jreg J^{-1} in V coordinates
  SlabGrid g;
  double max_speed = 0.0;

  void build(const BasicSlice& sl) {
    g = sl.grid();
    const int n = g.size();
    for (int sd = 0; sd < 2; ++sd) {
      A0inv[sd].resize(n);
      At1[sd].resize(n);
      A2[sd].resize(n);
      A3[sd].resize(n);
      C[sd].resize(n);
      JregV[sd].resize(n);
    }
    for (Side s : {Side::plus, Side::minus}) {
      const int sd = side_index(s);
      const Constitutive& cons = sl.bs->cons_of(s);
      for (int i3 = 0; i3 < g.t.n3; ++i3)
        for (int i2 = 0; i2 < g.t.n2; ++i2)
          for (int i1 = 0; i1 <= g.n1; ++i1) {
            const int id = g.idx(i1, i2, i3);
            const FluidState u = FluidState::from_vec(sl.state(s, i1, i2, i3), s);
            const LiftSlopes ls = sl.slopes(s, i1, i2, i3);
            const Mat8 A0 = assemble_A0(cons, u);
            A0inv[sd][id] = A0.inverse();
            At1[sd][id] = assemble_tildeA1(cons, u, ls);
            A2[sd][id] = assemble_Ai(cons, u, 2);
            A3[sd][id] = assemble_Ai(cons, u, 3);
            C[sd][id] = c_matrix(cons, u, ls, sl.dtU.side(s).at(i1, i2, i3),
                                 sl.bs->flow.U[sl.k].side(s).d1(i1, i2, i3),
                                 sl.bs->flow.U[sl.k].side(s).d2(i1, i2, i3),
                                 sl.bs->flow.U[sl.k].side(s).d3(i1, i2, i3));
            const Mat8 Ji = j_inverse(ls.d2, ls.d3);
            JregV[sd][id] = Ji.transpose() * j_reg(s, ls.d2, ls.d3) * Ji;
            if (i1 % 8 == 0 && i2 % 8 == 0) {
              Eigen::SelfAdjointEigenSolver<Mat8> es(
                  0.5 * (A0inv[sd][id] * At1[sd][id] +
                         (A0inv[sd][id] * At1[sd][id]).transpose()));
              max_speed = std::max(max_speed, es.eigenvalues().cwiseAbs().maxCoeff());
              Eigen::SelfAdjointEigenSolver<Mat8> e2(
                  0.5 * (A0inv[sd][id] * A2[sd][id] + (A0inv[sd][id] * A2[sd][id]).transpose()));
              max_speed = std::max(max_speed, e2.eigenvalues().cwiseAbs().maxCoeff());
            }
          }
    }
  }
};

// incoming-mode bases of the regularized boundary matrix at each interface
// point, plus the outer-boundary characteristic bases
struct BoundaryBasis {
  // interface: per point, incoming eigenvector columns (in W coordinates)
  std::vector<Eigen::Matrix<double, 8, Eigen::Dynamic>> in_plus, in_minus;
  // outer end: A0-orthonormal characteristic bases and incoming masks
  std::vector<Mat8> outer_Q[2];
  std::vector<std::array<bool, 8>> outer_incoming[2];
  std::vector<Mat8> outer_QtA0[2];
};

inline void build_boundary_basis(const BasicSlice& sl, double eps, BoundaryBasis& bb) {
  const SlabGrid& g = sl.grid();
  const int nb = g.t.size();
  bb.in_plus.resize(nb);
  bb.in_minus.resize(nb);
  for (int sd = 0; sd < 2; ++sd) {
    bb.outer_Q[sd].resize(nb);
    bb.outer_incoming[sd].resize(nb);
    bb.outer_QtA0[sd].resize(nb);
  }
  for (int i3 = 0; i3 < g.t.n3; ++i3)
    for (int i2 = 0; i2 < g.t.n2; ++i2) {
      const int id = g.t.idx(i2, i3);
      int total_in = 0;
      for (Side s : {Side::plus, Side::minus}) {
        const double a = sl.map.d2Phi(s, 0, i2, i3), b = sl.map.d3Phi(s, 0, i2, i3);
        const Mat8 M = eps * j_reg(s, a, b) - a1_bold(sl, s, 0, i2, i3);
        const Mat8 A0b = j_matrix(a, b).transpose() *
                         assemble_A0(sl.bs->cons_of(s),
                                     FluidState::from_vec(sl.state(s, 0, i2, i3), s)) *
                         j_matrix(a, b);
        Eigen::GeneralizedSelfAdjointEigenSolver<Mat8> es(M, A0b);
        std::vector<int> in;
        for (int m = 0; m < 8; ++m)
          if (es.eigenvalues()(m) < -1e-11) in.push_back(m);
        Eigen::Matrix<double, 8, Eigen::Dynamic> Q(8, in.size());
        for (std::size_t q = 0; q < in.size(); ++q) Q.col(q) = es.eigenvectors().col(in[q]);
        ((s == Side::plus) ? bb.in_plus[id] : bb.in_minus[id]) = Q;
        total_in += static_cast<int>(in.size());
      }
      require(total_in == 6, Err::InertiaChanged,
              "interface incoming count != 6 for the regularized problem");
      // outer end: flux matrix B = At1 - eps*JregV in V coordinates
      for (Side s : {Side::plus, Side::minus}) {
        const int sd = side_index(s);
        const Constitutive& cons = sl.bs->cons_of(s);
        const FluidState u = FluidState::from_vec(sl.state(s, g.n1, i2, i3), s);
        const LiftSlopes ls = sl.slopes(s, g.n1, i2, i3);
        const Mat8 A0 = assemble_A0(cons, u);
        const Mat8 Ji = j_inverse(ls.d2, ls.d3);
        const Mat8 B = assemble_tildeA1(cons, u, ls) -
                       eps * Ji.transpose() * j_reg(s, ls.d2, ls.d3) * Ji;
        Eigen::GeneralizedSelfAdjointEigenSolver<Mat8> es(B, A0);
        bb.outer_Q[sd][id] = es.eigenvectors();
        bb.outer_QtA0[sd][id] = es.eigenvectors().transpose() * A0;
        for (int m = 0; m < 8; ++m)
          bb.outer_incoming[sd][id][m] = es.eigenvalues()(m) < -1e-11;
      }
    }
}

}  // namespace solver_detail

// --------------------------------------------------------------------------
// Time-domain solver for the regularized effective problem on the slab.

class RegularizedSolver {
 public:
  RegularizedSolver(const LinearProblem& prob_in, const Grid& grid, int store_every = 1)
      : grid_(grid), store_every_(store_every) {
    prob_ = homogenize_boundary(prob_in, &v_nat_);
    const SlabGrid& g = prob_.bs.flow.g;
    require(g.n1 == grid.nx1 && g.t.n2 == grid.nx2, Err::ConfigInvalid,
            "grid does not match the basic state");
    require(grid.X1 >= 2.0 * prob_.bs.flow.chi.L, Err::ConfigInvalid,
            "slab depth must cover twice the cutoff support");
    require(static_cast<int>(prob_.f.size()) >= grid.nt + 1, Err::ConfigInvalid,
            "source series shorter than the time window");
    V_ = PairFields(g);
    psi_ = InterfaceField(g.t, 0.0);
    psi_prev_ = psi_;
    build_d4_factor();
  }

  // advance one step; n is the step index (time t = n dt -> (n+1) dt)
  void step(int n) {
    auto& bs = prob_.bs;
    const int want = bs.steady ? 0 : n;
    if (want != cached_level_) {
      slice_ = std::make_unique<BasicSlice>(bs, want);
      coeffs_.build(*slice_);
      solver_detail::build_boundary_basis(*slice_, prob_.epsilon, bbasis_);
      acoef_ = a_coeffs(*slice_);
      cached_level_ = want;
      const double cfl = coeffs_.max_speed * grid_.dt / grid_.min_h(bs.flow.g);
      require(cfl <= grid_.cfl_limit, Err::CFLViolated, "CFL number exceeds the limit");
    }
    // SSP-RK3 for the hyperbolic part; the source is sampled at the stage
    // times (t_n, t_n + dt, t_n + dt/2)
    const PairFields& f0 = prob_.f[n];
    const PairFields& f1 = prob_.f[std::min<std::size_t>(n + 1, prob_.f.size() - 1)];
    PairFields fhalf = f0;
    scale(fhalf, 0.5);
    axpy(fhalf, 0.5, f1);

    PairFields k1 = rhs(V_, f0);
    InterfaceField pk1 = psi_rhs(V_, psi_);
    PairFields V1 = V_;
    axpy(V1, grid_.dt, k1);
    InterfaceField psi1 = add(psi_, grid_.dt, pk1);
    impose_interface(V1, psi1);

    PairFields k2 = rhs(V1, f1);
    InterfaceField pk2 = psi_rhs(V1, psi1);
    PairFields V2 = blend(V_, 0.75, V1, 0.25, k2, 0.25 * grid_.dt);
    InterfaceField psi2 = blend(psi_, 0.75, psi1, 0.25, pk2, 0.25 * grid_.dt);
    impose_interface(V2, psi2);

    PairFields k3 = rhs(V2, fhalf);
    InterfaceField pk3 = psi_rhs(V2, psi2);
    PairFields Vn = blend(V_, 1.0 / 3.0, V2, 2.0 / 3.0, k3, 2.0 / 3.0 * grid_.dt);
    InterfaceField psin = blend(psi_, 1.0 / 3.0, psi2, 2.0 / 3.0, pk3, 2.0 / 3.0 * grid_.dt);

    // implicit treatment of the stiff regularization terms
    if (prob_.epsilon != 0.0) {
      implicit_eps_sweep(Vn);
      implicit_psi_d4(psin);
    }
    impose_interface(Vn, psin);
    impose_outer(Vn);

    psi_prev_ = psi_;
    V_ = std::move(Vn);
    psi_ = std::move(psin);

    const double scale = 1.0 + source_scale_;
    require(max_abs(V_) < 1e6 * scale, Err::SolveDiverged, "solution norm blew up");
  }

  LinearSolution run() {
    LinearSolution sol;
    sol.dt = grid_.dt;
    sol.store_every = store_every_;
    sol.epsilon_used = prob_.epsilon;
    source_scale_ = 0.0;
    for (const auto& f : prob_.f) source_scale_ = std::max(source_scale_, max_abs(f));
    store(sol, 0);
    for (int n = 0; n < grid_.nt; ++n) {
      step(n);
      if ((n + 1) % store_every_ == 0 || n + 1 == grid_.nt) store(sol, n + 1);
      record_diagnostics(sol, n + 1);
    }
    finalize_norms(sol);
    return sol;
  }

  const PairFields& state() const { return V_; }
  const InterfaceField& interface_state() const { return psi_; }
  const LinearProblem& problem() const { return prob_; }
  const std::vector<PairFields>& v_natural() const { return v_nat_; }

  // W = J^inv V of the current homogenized state
  PairFields current_W() const { return w_from_v(*slice_, V_); }

 private:
  Grid grid_;
  int store_every_;
  LinearProblem prob_;
  std::vector<PairFields> v_nat_;
  PairFields V_;
  InterfaceField psi_, psi_prev_;
  std::unique_ptr<BasicSlice> slice_;
  solver_detail::Coeffs coeffs_;
  solver_detail::BoundaryBasis bbasis_;
  ACoeffs acoef_;
  int cached_level_ = -1;
  double source_scale_ = 0.0;
  Eigen::PartialPivLU<Eigen::MatrixXd> d4_lu_;
  bool d4_ready_ = false;

  static InterfaceField add(const InterfaceField& a, double s, const InterfaceField& b) {
    InterfaceField out = a;
    for (std::size_t i = 0; i < out.a.size(); ++i) out.a[i] += s * b.a[i];
    return out;
  }
  static PairFields blend(const PairFields& a, double wa, const PairFields& b, double wb,
                          const PairFields& k, double wk) {
    PairFields out = a;
    scale(out, wa);
    axpy(out, wb, b);
    axpy(out, wk, k);
    return out;
  }
  static InterfaceField blend(const InterfaceField& a, double wa, const InterfaceField& b,
                              double wb, const InterfaceField& k, double wk) {
    InterfaceField out = a;
    for (std::size_t i = 0; i < out.a.size(); ++i)
      out.a[i] = wa * a.a[i] + wb * b.a[i] + wk * k.a[i];
    return out;
  }

  // dV/dt = A0^{-1} (f - At1 d1V - A2 d2V - A3 d3V - C V)
  PairFields rhs(const PairFields& V, const PairFields& f) const {
    const SlabGrid& g = prob_.bs.flow.g;
    const int np = g.np1();
    const double ih1 = 0.5 / g.h1(), ih2 = 0.5 / g.t.h2(), ih3 = 0.5 / g.t.h3();
    PairFields out(g);
    for (int sd = 0; sd < 2; ++sd) {
      const auto& Vf = V.s[sd].c;
      const auto& Ff = f.s[sd].c;
      auto& Of = out.s[sd].c;
      for (int i3 = 0; i3 < g.t.n3; ++i3)
        for (int i2 = 0; i2 < g.t.n2; ++i2) {
          const int col = (i3 * g.t.n2 + i2) * np;
          const int colL = (i3 * g.t.n2 + g.t.wrap2(i2 - 1)) * np;
          const int colR = (i3 * g.t.n2 + g.t.wrap2(i2 + 1)) * np;
          const int colD = g.t.planar() ? col : (g.t.wrap3(i3 - 1) * g.t.n2 + i2) * np;
          const int colU = g.t.planar() ? col : (g.t.wrap3(i3 + 1) * g.t.n2 + i2) * np;
          for (int i1 = 0; i1 <= g.n1; ++i1) {
            const int id = col + i1;
            Vec8 v, d1, d2, d3, r;
            for (int m = 0; m < 8; ++m) {
              const double* a = Vf[m].a.data();
              v(m) = a[id];
              if (i1 == 0)
                d1(m) = (-3 * a[col] + 4 * a[col + 1] - a[col + 2]) * ih1;
              else if (i1 == g.n1)
                d1(m) = (3 * a[id] - 4 * a[id - 1] + a[id - 2]) * ih1;
              else
                d1(m) = (a[id + 1] - a[id - 1]) * ih1;
              d2(m) = (a[colR + i1] - a[colL + i1]) * ih2;
              if (!g.t.planar()) d3(m) = (a[colU + i1] - a[colD + i1]) * ih3;
              r(m) = Ff[m].a[id];
            }
            r.noalias() -= coeffs_.At1[sd][id] * d1;
            r.noalias() -= coeffs_.A2[sd][id] * d2;
            if (!g.t.planar()) r.noalias() -= coeffs_.A3[sd][id] * d3;
            r.noalias() -= coeffs_.C[sd][id] * v;
            Vec8 dv = coeffs_.A0inv[sd][id] * r;
            if (grid_.dissipation > 0.0) {
              // undivided fourth differences damp the 2h modes the centered
              // stencils leave neutral
              const double sig = grid_.dissipation * coeffs_.max_speed;
              for (int m = 0; m < 8; ++m) {
                const double* a = Vf[m].a.data();
                double d4 = 0.0;
                if (i1 >= 2 && i1 + 2 <= g.n1)
                  d4 += (a[id - 2] - 4 * a[id - 1] + 6 * a[id] - 4 * a[id + 1] + a[id + 2]) /
                        g.h1();
                const int l2 = colL + i1, r2 = colR + i1;
                const int ll = (i3 * g.t.n2 + g.t.wrap2(i2 - 2)) * np + i1;
                const int rr = (i3 * g.t.n2 + g.t.wrap2(i2 + 2)) * np + i1;
                d4 += (a[ll] - 4 * a[l2] + 6 * a[id] - 4 * a[r2] + a[rr]) / g.t.h2();
                dv(m) -= sig * d4;
              }
            }
            for (int m = 0; m < 8; ++m) Of[m].a[id] = dv(m);
          }
        }
    }
    return out;
  }

  // dpsi/dt = W2+ - v2+ d2 psi - v3+ d3 psi - a7 psi   (eps D4 term implicit)
  InterfaceField psi_rhs(const PairFields& V, const InterfaceField& psi) const {
    const SlabGrid& g = prob_.bs.flow.g;
    InterfaceField out(g.t);
    for (int i3 = 0; i3 < g.t.n3; ++i3)
      for (int i2 = 0; i2 < g.t.n2; ++i2) {
        const Vec8 v = V.side(Side::plus).at(0, i2, i3);
        const Vec3 Nl(1.0, -slice_->map.d2Phi(Side::plus, 0, i2, i3),
                      -slice_->map.d3Phi(Side::plus, 0, i2, i3));
        const double W2 = Vec3(v(1), v(2), v(3)).dot(Nl);
        const Vec8 up = slice_->bs->flow.U[slice_->k].side(Side::plus).at(0, i2, i3);
        out.at(i2, i3) = W2 - up(2) * psi.d2(i2, i3) - up(3) * psi.d3(i2, i3) -
                         acoef_.a[7].at(i2, i3) * psi.at(i2, i3);
      }
    return out;
  }

  // solve the 6 jump conditions for the incoming-mode amplitudes
  void impose_interface(PairFields& V, const InterfaceField& psi) {
    const SlabGrid& g = prob_.bs.flow.g;
    InterfaceField tension = curvature_linearized(prob_.bs.flow.phi[slice_->k], psi);
    for (int i3 = 0; i3 < g.t.n3; ++i3)
      for (int i2 = 0; i2 < g.t.n2; ++i2) {
        const int id = g.t.idx(i2, i3);
        const auto& Qp = bbasis_.in_plus[id];
        const auto& Qm = bbasis_.in_minus[id];
        const int np = static_cast<int>(Qp.cols()), nm = static_cast<int>(Qm.cols());
        // current W traces
        const Mat8 Jip = j_inverse(slice_->map.d2Phi(Side::plus, 0, i2, i3),
                                   slice_->map.d3Phi(Side::plus, 0, i2, i3));
        const Mat8 Jim = j_inverse(slice_->map.d2Phi(Side::minus, 0, i2, i3),
                                   slice_->map.d3Phi(Side::minus, 0, i2, i3));
        Vec8 Wp = Jip * V.side(Side::plus).at(0, i2, i3);
        Vec8 Wm = Jim * V.side(Side::minus).at(0, i2, i3);
        // target jumps
        Eigen::Matrix<double, 6, 1> rhs;
        rhs(0) = prob_.bs.sfrak * tension.at(i2, i3) + acoef_.a[1].at(i2, i3) * psi.at(i2, i3) -
                 (Wp(0) - Wm(0));
        for (int r = 1; r < 6; ++r)
          rhs(r) = acoef_.a[r + 1].at(i2, i3) * psi.at(i2, i3) - (Wp(r) - Wm(r));
        require(np + nm == 6, Err::InertiaChanged, "incoming mode count changed");
        Eigen::Matrix<double, 6, 6> Mcorr = Eigen::Matrix<double, 6, 6>::Zero();
        for (int q = 0; q < np; ++q) Mcorr.col(q) = Qp.col(q).head<6>();
        for (int q = 0; q < nm; ++q) Mcorr.col(np + q) = -Qm.col(q).head<6>();
        auto lu = Mcorr.fullPivLu();
        require(lu.isInvertible(), Err::LinearSolveFailed,
                "interface coupling matrix is singular");
        Eigen::Matrix<double, 6, 1> c = lu.solve(rhs);
        for (int q = 0; q < np; ++q) Wp += c(q) * Qp.col(q);
        for (int q = 0; q < nm; ++q) Wm += c(np + q) * Qm.col(q);
        const Mat8 Jp = j_matrix(slice_->map.d2Phi(Side::plus, 0, i2, i3),
                                 slice_->map.d3Phi(Side::plus, 0, i2, i3));
        const Mat8 Jm = j_matrix(slice_->map.d2Phi(Side::minus, 0, i2, i3),
                                 slice_->map.d3Phi(Side::minus, 0, i2, i3));
        V.side(Side::plus).set(0, i2, i3, Jp * Wp);
        V.side(Side::minus).set(0, i2, i3, Jm * Wm);
      }
  }

  // characteristic extrapolation at the artificial outer end
  void impose_outer(PairFields& V) {
    const SlabGrid& g = prob_.bs.flow.g;
    for (int sd = 0; sd < 2; ++sd)
      for (int i3 = 0; i3 < g.t.n3; ++i3)
        for (int i2 = 0; i2 < g.t.n2; ++i2) {
          const int id = g.t.idx(i2, i3);
          const Side s = sd == 0 ? Side::plus : Side::minus;
          const Mat8& Q = bbasis_.outer_Q[sd][id];
          const Mat8& QtA0 = bbasis_.outer_QtA0[sd][id];
          Vec8 a_end = QtA0 * V.side(s).at(g.n1, i2, i3);
          const Vec8 a_in = QtA0 * V.side(s).at(g.n1 - 1, i2, i3);
          for (int m = 0; m < 8; ++m)
            if (bbasis_.outer_incoming[sd][id][m]) a_end(m) = a_in(m);
          V.side(s).set(g.n1, i2, i3, Q * a_end);
        }
  }

  // backward-Euler sweep for the -eps Jreg d1 term (transport toward the
  // boundary; forward one-sided difference, solved from the outer end in)
  void implicit_eps_sweep(PairFields& V) {
    const SlabGrid& g = prob_.bs.flow.g;
    const double lam = prob_.epsilon * grid_.dt / g.h1();
    for (int sd = 0; sd < 2; ++sd) {
      const Side s = sd == 0 ? Side::plus : Side::minus;
      for (int i3 = 0; i3 < g.t.n3; ++i3)
        for (int i2 = 0; i2 < g.t.n2; ++i2) {
          Vec8 Vnext = V.side(s).at(g.n1, i2, i3);  // outermost node unchanged
          for (int i1 = g.n1 - 1; i1 >= 0; --i1) {
            const int id = g.idx(i1, i2, i3);
            const Mat8 T = coeffs_.A0inv[sd][id] * coeffs_.JregV[sd][id];
            const Vec8 rhsv = V.side(s).at(i1, i2, i3) + lam * (T * Vnext);
            const Mat8 Msys = Mat8::Identity() + lam * T;
            const Vec8 Vnew = Msys.partialPivLu().solve(rhsv);
            V.side(s).set(i1, i2, i3, Vnew);
            Vnext = Vnew;
          }
        }
    }
  }

  void build_d4_factor() {
    const Torus2& t = prob_.bs.flow.g.t;
    if (prob_.epsilon == 0.0 || t.n2 < 5) return;
    // periodic (I + dt eps D4) along x2 (and x3 handled by the same factor
    // applied in each direction when present)
    const int n = t.n2;
    Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n);
    const double c = prob_.epsilon * grid_.dt / std::pow(t.h2(), 4);
    for (int i = 0; i < n; ++i) {
      M(i, (i - 2 + n) % n) += c;
      M(i, (i - 1 + n) % n) += -4 * c;
      M(i, i) += 6 * c;
      M(i, (i + 1) % n) += -4 * c;
      M(i, (i + 2) % n) += c;
    }
    d4_lu_ = Eigen::PartialPivLU<Eigen::MatrixXd>(M);
    d4_ready_ = true;
  }

  void implicit_psi_d4(InterfaceField& psi) {
    if (!d4_ready_) return;
    const Torus2& t = prob_.bs.flow.g.t;
    Eigen::VectorXd line(t.n2);
    for (int i3 = 0; i3 < t.n3; ++i3) {
      for (int i2 = 0; i2 < t.n2; ++i2) line(i2) = psi.at(i2, i3);
      line = d4_lu_.solve(line);
      for (int i2 = 0; i2 < t.n2; ++i2) psi.at(i2, i3) = line(i2);
    }
    // x3 direction uses the same pentadiagonal structure when present
    if (!t.planar() && t.n3 >= 5) {
      const int n = t.n3;
      Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n);
      const double c = prob_.epsilon * grid_.dt / std::pow(t.h3(), 4);
      for (int i = 0; i < n; ++i) {
        M(i, (i - 2 + n) % n) += c;
        M(i, (i - 1 + n) % n) += -4 * c;
        M(i, i) += 6 * c;
        M(i, (i + 1) % n) += -4 * c;
        M(i, (i + 2) % n) += c;
      }
      Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);
      Eigen::VectorXd l3(n);
      for (int i2 = 0; i2 < t.n2; ++i2) {
        for (int i3 = 0; i3 < n; ++i3) l3(i3) = psi.at(i2, i3);
        l3 = lu.solve(l3);
        for (int i3 = 0; i3 < n; ++i3) psi.at(i2, i3) = l3(i3);
      }
    }
  }

  void store(LinearSolution& sol, int level) {
    sol.W.push_back(w_from_v(level == 0 ? BasicSlice(prob_.bs, 0) : *slice_, V_));
    PairFields vd = V_;
    axpy(vd, 1.0, v_nat_[std::min<std::size_t>(level, v_nat_.size() - 1)]);
    sol.Vdot.push_back(std::move(vd));
    sol.psi.push_back(psi_);
  }

  void record_diagnostics(LinearSolution& sol, int level) {
    const SlabGrid& g = prob_.bs.flow.g;
    // L2 norm of W
    auto W = current_W();
    double l2 = 0.0;
    const double dv = g.h1() * g.t.h2() * (g.t.planar() ? 1.0 : g.t.h3());
    for (int sd = 0; sd < 2; ++sd)
      for (int c = 0; c < 8; ++c)
        for (double v : W.s[sd].c[c].a) l2 += v * v * dv;
    sol.l2_series.push_back(std::sqrt(l2));

    // jump-row residual after correction
    InterfaceField tension = curvature_linearized(prob_.bs.flow.phi[slice_->k], psi_);
    double bc = 0.0;
    double eform = 0.0;
    for (int i3 = 0; i3 < g.t.n3; ++i3)
      for (int i2 = 0; i2 < g.t.n2; ++i2) {
        const Vec8 Wp = W.side(Side::plus).at(0, i2, i3);
        const Vec8 Wm = W.side(Side::minus).at(0, i2, i3);
        bc = std::max(bc, std::abs((Wp(0) - Wm(0)) - prob_.bs.sfrak * tension.at(i2, i3) -
                                   acoef_.a[1].at(i2, i3) * psi_.at(i2, i3)));
        for (int r = 1; r < 6; ++r)
          bc = std::max(bc, std::abs((Wp(r) - Wm(r)) -
                                     acoef_.a[r + 1].at(i2, i3) * psi_.at(i2, i3)));
        eform += boundary_quadratic_form(*slice_, prob_.epsilon, i2, i3, Wp, Wm) * g.t.h2() *
                 (g.t.planar() ? 1.0 : g.t.h3());
      }
    sol.bc_residual_series.push_back(bc);
    sol.energy_form_series.push_back(eform);
    (void)level;
  }

  void finalize_norms(LinearSolution& sol) {
    sol.h1_W = sobolev_norm(sol.W, 1, grid_.dt * store_every_);
    sol.l2_boundary = boundary_l2(sol.W, grid_.dt * store_every_);
    sol.h1_psi = sobolev_norm(sol.psi, 1, grid_.dt * store_every_);
    // H1 norm of the W-coordinate source
    std::vector<PairFields> fw;
    for (int k = 0; k < static_cast<int>(sol.W.size()); ++k) {
      const int lvl = std::min(k * store_every_, static_cast<int>(prob_.f.size()) - 1);
      BasicSlice sl(prob_.bs, lvl);
      PairFields f(prob_.bs.flow.g);
      const SlabGrid& g = prob_.bs.flow.g;
      for (Side s : {Side::plus, Side::minus})
        for (int i3 = 0; i3 < g.t.n3; ++i3)
          for (int i2 = 0; i2 < g.t.n2; ++i2)
            for (int i1 = 0; i1 <= g.n1; ++i1) {
              const Mat8 Jt =
                  j_matrix(sl.map.d2Phi(s, i1, i2, i3), sl.map.d3Phi(s, i1, i2, i3)).transpose();
              f.side(s).set(i1, i2, i3, Jt * prob_.f[lvl].side(s).at(i1, i2, i3));
            }
      fw.push_back(std::move(f));
    }
    sol.h1_source = sobolev_norm(fw, 1, grid_.dt * store_every_);
  }
};

inline LinearSolution solve_regularized(const LinearProblem& prob, const Grid& grid,
                                        int store_every = 1) {
  require(prob.epsilon >= 0.0 && prob.epsilon <= prob.epsilon0, Err::EpsilonOutOfRange,
          "epsilon outside (0, epsilon0]");
  RegularizedSolver s(prob, grid, store_every);
  return s.run();
}

// Solve along a strictly decreasing epsilon schedule; report Cauchy
// differences in a discrete H1 surrogate and return the smallest-epsilon
// solution (with an extrapolation estimate of the remaining distance).
inline LinearSolution solve_effective(const LinearProblem& prob, const Grid& grid,
                                      const std::vector<double>& schedule,
                                      int store_every = 1) {
  require(!schedule.empty(), Err::ConfigInvalid, "empty epsilon schedule");
  for (std::size_t i = 1; i < schedule.size(); ++i)
    require(schedule[i] < schedule[i - 1], Err::ConfigInvalid,
            "epsilon schedule must decrease");
  std::vector<LinearSolution> sols;
  for (double eps : schedule) {
    LinearProblem p = prob;
    p.epsilon = eps;
    sols.push_back(solve_regularized(p, grid, store_every));
  }
  const double sdt = grid.dt * store_every;
  std::vector<double> diffs;
  for (std::size_t i = 0; i + 1 < sols.size(); ++i) {
    // H1 norm of the difference of stored series
    std::vector<PairFields> diff = sols[i].W;
    for (std::size_t k = 0; k < diff.size(); ++k) axpy(diff[k], -1.0, sols[i + 1].W[k]);
    diffs.push_back(sobolev_norm(diff, 1, sdt));
  }
  LinearSolution out = std::move(sols.back());
  out.cauchy_diffs = diffs;
  if (!diffs.empty()) {
    const double r = schedule.back() / schedule[schedule.size() - 2];
    out.extrapolation_estimate = diffs.back() * r / (1.0 - r);
  }
  for (std::size_t i = 1; i < diffs.size(); ++i)
    require(diffs[i] <= diffs[i - 1] * (1.0 + 1e-9), Err::NotCauchy,
            "epsilon-schedule differences do not decrease");
  return out;
}

// --------------------------------------------------------------------------
// Diagnostics over solutions (the measurable certificates)

struct EnergyCertificate {
  double lhs = 0.0, rhs = 0.0, ratio = 0.0;
  bool trivial = false;  // zero sources
};

inline EnergyCertificate energy_certificate(const LinearSolution& sol) {
  EnergyCertificate c;
  c.lhs = sol.h1_W + sol.l2_boundary + sol.h1_psi;
  c.rhs = sol.h1_source;
  if (c.rhs == 0.0) {
    c.trivial = true;
    c.ratio = 0.0;
  } else {
    c.ratio = c.lhs / c.rhs;
  }
  return c;
}

struct TameCertificate {
  double slope = 0.0, intercept = 0.0, max_rel_residual = 0.0;
};

// affine fit of solution norms against basic-state norms
inline TameCertificate tame_certificate(const std::vector<double>& state_norms,
                                        const std::vector<double>& solution_norms) {
  TameCertificate t;
  const std::size_t n = state_norms.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += state_norms[i];
    sy += solution_norms[i];
    sxx += state_norms[i] * state_norms[i];
    sxy += state_norms[i] * solution_norms[i];
  }
  const double den = n * sxx - sx * sx;
  if (den != 0.0) {
    t.slope = (n * sxy - sx * sy) / den;
    t.intercept = (sy - t.slope * sx) / n;
  } else {
    t.intercept = sy / n;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double fit = t.intercept + t.slope * state_norms[i];
    if (solution_norms[i] != 0.0)
      t.max_rel_residual =
          std::max(t.max_rel_residual, std::abs(fit - solution_norms[i]) /
                                           std::abs(solution_norms[i]));
  }
  return t;
}

// --------------------------------------------------------------------------
// Noncharacteristic normal-derivative recovery near the boundary.

// The recovery matrix, defined where |H . N| stays away from zero.
inline Mat8 b_matrix(const BasicSlice& sl, Side s, int i1, int i2, int i3, double kappa_floor) {
  const Vec8 u = sl.state(s, i1, i2, i3);
  const LiftSlopes ls = sl.slopes(s, i1, i2, i3);
  const Vec3 Nloc(1.0, -ls.d2, -ls.d3);
  const Vec3 H(u(4), u(5), u(6));
  const double HN = H.dot(Nloc);
  require(std::abs(HN) >= kappa_floor, Err::DegenerateJacobian,
          "recovery matrix needs |H.N| bounded below");
  Mat8 B = Mat8::Zero();
  B(0, 1) = HN;
  B(0, 2) = H(1);
  B(0, 3) = H(2);
  B(1, 0) = HN;
  B(2, 0) = H(1);
  B(2, 4) = -1.0;
  B(3, 0) = H(2);
  B(3, 5) = -1.0;
  B(4, 2) = -1.0;
  B(5, 3) = -1.0;
  return side_sign(s) / HN * B;
}

// d1 W_nc recovered from the interior identity: B (f - A4 W - sum_l A_l d_l W
// - A(0) d1 W).  On a discrete solution of the unregularized system this
// reduces to B A(1) d1 W up to the residual of the equations.
inline Vec8 recover_d1_wnc(const BasicSlice& sl, Side s, int i1, int i2, int i3,
                           const SideFields& W, double kappa_floor) {
  const Mat8 B = b_matrix(sl, s, i1, i2, i3, kappa_floor);
  const auto dec = decompose_A1(sl, s, i1, i2, i3);
  return B * (dec.a1_part * W.d1(i1, i2, i3));
}

struct ConstraintSeries {
  std::vector<double> xi_l2;        // || xi(t) ||_{L2} per stored level
  std::vector<double> hn_mismatch;  // boundary [H] . N trace norm per level
};

inline ConstraintSeries constraint_monitor(const LinearSolution& sol, const BasicState& bs) {
  ConstraintSeries out;
  const SlabGrid& g = bs.flow.g;
  const double dv = g.h1() * g.t.h2() * (g.t.planar() ? 1.0 : g.t.h3());
  for (std::size_t k = 0; k < sol.W.size(); ++k) {
    const int lvl = std::min<int>(static_cast<int>(k) * sol.store_every,
                                  bs.flow.nlevels() - 1);
    BasicSlice sl(bs, lvl);
    double x2 = 0.0;
    for (Side s : {Side::plus, Side::minus}) {
      auto xi = xi_from_w(sl, s, sol.W[k].side(s));
      for (double v : xi.a) x2 += v * v * dv;
    }
    out.xi_l2.push_back(std::sqrt(x2));
    double mis = 0.0;
    for (int i3 = 0; i3 < g.t.n3; ++i3)
      for (int i2 = 0; i2 < g.t.n2; ++i2) {
        // W7 is H . N per side; continuity of the local normals on Sigma
        const double jump = sol.W[k].side(Side::plus).c[6].at(0, i2, i3) -
                            sol.W[k].side(Side::minus).c[6].at(0, i2, i3);
        mis += jump * jump * g.t.h2() * (g.t.planar() ? 1.0 : g.t.h3());
      }
    out.hn_mismatch.push_back(std::sqrt(mis));
  }
  return out;
}

}  // namespace mcd
