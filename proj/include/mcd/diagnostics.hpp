#pragma once

#include "mcd/regularization.hpp"

namespace mcd {

// Discrete Sobolev machinery on space-time cylinders.  Fields are uniform
// time series of slab or interface fields; derivatives are second-order
// centered (one-sided at the window and slab ends), quadrature is trapezoid
// in t and x1 and exact in the periodic directions.

namespace detail {

// one time-derivative of a series of scalar slab fields
inline std::vector<SlabField> dt_once(const std::vector<SlabField>& f, double dt) {
  const int n = static_cast<int>(f.size());
  std::vector<SlabField> out(n, SlabField(f[0].g));
  for (int k = 0; k < n; ++k) {
    auto acc = [&](double a, const SlabField& x) {
      for (std::size_t i = 0; i < out[k].a.size(); ++i) out[k].a[i] += a * x.a[i];
    };
    if (n == 1) continue;
    if (n == 2) {
      acc(1.0 / dt, f[1]);
      acc(-1.0 / dt, f[0]);
    } else if (k == 0) {
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
  }
  return out;
}

inline std::vector<SlabField> dx_once(const std::vector<SlabField>& f, int axis) {
  std::vector<SlabField> out;
  out.reserve(f.size());
  for (const auto& u : f) {
    SlabField d(u.g);
    for (int i3 = 0; i3 < u.g.t.n3; ++i3)
      for (int i2 = 0; i2 < u.g.t.n2; ++i2)
        for (int i1 = 0; i1 <= u.g.n1; ++i1)
          d.at(i1, i2, i3) = axis == 1   ? u.d1(i1, i2, i3)
                             : axis == 2 ? u.d2(i1, i2, i3)
                                         : u.d3(i1, i2, i3);
    out.push_back(std::move(d));
  }
  return out;
}

inline double l2_sq(const std::vector<SlabField>& f, double dt, int i1_min = 0) {
  const SlabGrid& g = f[0].g;
  const double dv = g.h1() * g.t.h2() * (g.t.planar() ? 1.0 : g.t.h3());
  double total = 0.0;
  const int n = static_cast<int>(f.size());
  for (int k = 0; k < n; ++k) {
    double s = 0.0;
    for (int i3 = 0; i3 < g.t.n3; ++i3)
      for (int i2 = 0; i2 < g.t.n2; ++i2)
        for (int i1 = i1_min; i1 <= g.n1; ++i1) {
          const double w1 = (i1 == i1_min || i1 == g.n1) ? 0.5 : 1.0;
          s += w1 * sqr(f[k].at(i1, i2, i3));
        }
    const double wt = (n == 1) ? 1.0 : ((k == 0 || k == n - 1) ? 0.5 : 1.0) * dt;
    total += wt * s * dv;
  }
  return total;
}

// interface-series versions
inline std::vector<InterfaceField> dt_once(const std::vector<InterfaceField>& f, double dt) {
  const int n = static_cast<int>(f.size());
  std::vector<InterfaceField> out(n, InterfaceField(f[0].g));
  for (int k = 0; k < n; ++k) out[k] = dt_series(f, k, dt);
  return out;
}

inline std::vector<InterfaceField> dx_once(const std::vector<InterfaceField>& f, int axis) {
  std::vector<InterfaceField> out;
  out.reserve(f.size());
  for (const auto& u : f) {
    InterfaceField d(u.g);
    for (int i3 = 0; i3 < u.g.n3; ++i3)
      for (int i2 = 0; i2 < u.g.n2; ++i2)
        d.at(i2, i3) = axis == 2 ? u.d2(i2, i3) : u.d3(i2, i3);
    out.push_back(std::move(d));
  }
  return out;
}

inline double l2_sq(const std::vector<InterfaceField>& f, double dt) {
  const Torus2& g = f[0].g;
  const double dv = g.h2() * (g.planar() ? 1.0 : g.h3());
  double total = 0.0;
  const int n = static_cast<int>(f.size());
  for (int k = 0; k < n; ++k) {
    double s = 0.0;
    for (double v : f[k].a) s += v * v;
    const double wt = (n == 1) ? 1.0 : ((k == 0 || k == n - 1) ? 0.5 : 1.0) * dt;
    total += wt * s * dv;
  }
  return total;
}

// enumerate multi-indices (a0, a1, a2, a3) with |alpha| <= m
template <typename F>
void for_multi_indices(int m, int naxes, F f) {
  std::array<int, 4> a{0, 0, 0, 0};
  std::function<void(int, int)> rec = [&](int pos, int left) {
    if (pos == naxes) {
      f(a);
      return;
    }
    for (int v = 0; v <= left; ++v) {
      a[pos] = v;
      rec(pos + 1, left - v);
    }
    a[pos] = 0;
  };
  rec(0, m);
}

}  // namespace detail

enum class NormRegion { interior, boundary };
enum class DerivSet { full, tangential };

// H^m norm (squared sum over all derivatives up to order m) of a scalar
// interior series.  i1_min > 0 integrates over the open interior only (the
// boundary plane has measure zero in the continuum norm).
inline double sobolev_norm(const std::vector<SlabField>& u, int m, double dt,
                           DerivSet set = DerivSet::full, int i1_min = 0) {
  require(m >= 0 && m <= 4, Err::OrderTooHigh, "sobolev_norm supports m <= 4");
  double total = 0.0;
  const bool planar = u[0].g.t.planar();
  detail::for_multi_indices(m, 4, [&](const std::array<int, 4>& a) {
    if (set == DerivSet::tangential && a[1] > 0) return;
    if (planar && a[3] > 0) return;
    auto f = u;
    for (int i = 0; i < a[0]; ++i) f = detail::dt_once(f, dt);
    for (int i = 0; i < a[1]; ++i) f = detail::dx_once(f, 1);
    for (int i = 0; i < a[2]; ++i) f = detail::dx_once(f, 2);
    for (int i = 0; i < a[3]; ++i) f = detail::dx_once(f, 3);
    total += detail::l2_sq(f, dt, i1_min);
  });
  return std::sqrt(total);
}

inline double sobolev_norm(const std::vector<InterfaceField>& u, int m, double dt) {
  require(m >= 0 && m <= 4, Err::OrderTooHigh, "sobolev_norm supports m <= 4");
  double total = 0.0;
  const bool planar = u[0].g.planar();
  detail::for_multi_indices(m, 3, [&](const std::array<int, 4>& a) {
    // axes here: (t, x2, x3)
    if (planar && a[2] > 0) return;
    auto f = u;
    for (int i = 0; i < a[0]; ++i) f = detail::dt_once(f, dt);
    for (int i = 0; i < a[1]; ++i) f = detail::dx_once(f, 2);
    for (int i = 0; i < a[2]; ++i) f = detail::dx_once(f, 3);
    total += detail::l2_sq(f, dt);
  });
  return std::sqrt(total);
}

// H^m norm of an 8-component pair series (root of the summed squares).
inline double sobolev_norm(const std::vector<PairFields>& u, int m, double dt,
                           DerivSet set = DerivSet::full, int i1_min = 0) {
  double total = 0.0;
  for (int sd = 0; sd < 2; ++sd)
    for (int c = 0; c < 8; ++c) {
      std::vector<SlabField> comp;
      comp.reserve(u.size());
      for (const auto& lvl : u) comp.push_back(lvl.s[sd].c[c]);
      total += sqr(sobolev_norm(comp, m, dt, set, i1_min));
    }
  return std::sqrt(total);
}

// boundary-trace series of one component
inline std::vector<InterfaceField> trace_series(const std::vector<PairFields>& u, Side s,
                                                int comp) {
  std::vector<InterfaceField> out;
  out.reserve(u.size());
  for (const auto& lvl : u) {
    const SlabGrid& g = lvl.s[0].c[0].g;
    InterfaceField f(g.t);
    for (int i3 = 0; i3 < g.t.n3; ++i3)
      for (int i2 = 0; i2 < g.t.n2; ++i2) f.at(i2, i3) = lvl.side(s).c[comp].at(0, i2, i3);
    out.push_back(std::move(f));
  }
  return out;
}

// L2(Sigma_T) norm of the full 16-component trace
inline double boundary_l2(const std::vector<PairFields>& u, double dt) {
  double total = 0.0;
  for (int sd = 0; sd < 2; ++sd)
    for (int c = 0; c < 8; ++c) {
      auto tr = trace_series(u, sd == 0 ? Side::plus : Side::minus, c);
      total += detail::l2_sq(tr, dt);
    }
  return std::sqrt(total);
}

// sigma-weighted normal-derivative norm || sigma d1 u ||_{L2}
inline double weighted_d1_norm(const std::vector<PairFields>& u, double dt,
                               const SigmaWeight& sig) {
  const SlabGrid& g = u[0].s[0].c[0].g;
  std::vector<SlabField> tmp(u.size(), SlabField(g));
  double total = 0.0;
  for (int sd = 0; sd < 2; ++sd)
    for (int c = 0; c < 8; ++c) {
      for (std::size_t k = 0; k < u.size(); ++k)
        for (int i3 = 0; i3 < g.t.n3; ++i3)
          for (int i2 = 0; i2 < g.t.n2; ++i2)
            for (int i1 = 0; i1 <= g.n1; ++i1)
              tmp[k].at(i1, i2, i3) =
                  sig(g.x1(i1)) * u[k].s[sd].c[c].d1(i1, i2, i3);
      total += detail::l2_sq(tmp, dt);
    }
  return std::sqrt(total);
}

struct NormReport {
  std::array<double, 5> interior_Hm{};    // m = 0..4
  std::array<double, 5> tangential{};     // tangential-only derivative set
  double boundary_trace_l2 = 0.0;
  double weighted_sigma_d1 = 0.0;
};

inline NormReport norm_report(const std::vector<PairFields>& u, double dt, int max_m = 2) {
  NormReport r;
  for (int m = 0; m <= max_m; ++m) {
    r.interior_Hm[m] = sobolev_norm(u, m, dt);
    r.tangential[m] = sobolev_norm(u, m, dt, DerivSet::tangential);
  }
  r.boundary_trace_l2 = boundary_l2(u, dt);
  r.weighted_sigma_d1 = weighted_d1_norm(u, dt, SigmaWeight());
  return r;
}

}  // namespace mcd
