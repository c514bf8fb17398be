#pragma once

#include <complex>

#include "mcd/linearization.hpp"

namespace mcd {

namespace detail {

inline void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n == 0) return;
  if ((n & (n - 1)) != 0) {
    // non power of two: plain DFT (correct, slower; only small grids hit this)
    std::vector<std::complex<double>> out(n);
    const double sgn = inverse ? 1.0 : -1.0;
    for (std::size_t k = 0; k < n; ++k) {
      std::complex<double> s = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        s += a[j] * std::polar(1.0, sgn * 2.0 * M_PI * double(j * k % n) / double(n));
      out[k] = s;
    }
    a = std::move(out);
    if (inverse)
      for (auto& v : a) v /= double(n);
    return;
  }
  // bit-reversal permutation
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 1.0 : -1.0) * 2.0 * M_PI / double(len);
    const std::complex<double> wl = std::polar(1.0, ang);
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w = 1.0;
      for (std::size_t j = 0; j < len / 2; ++j) {
        const auto u = a[i + j], v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (inverse)
    for (auto& v : a) v /= double(n);
}

inline double smooth_step01(double w) {  // C-infinity, 0 at 0, 1 at 1
  if (w <= 0.0) return 0.0;
  if (w >= 1.0) return 1.0;
  const double g0 = std::exp(-1.0 / w), g1 = std::exp(-1.0 / (1.0 - w));
  return g0 / (g0 + g1);
}

// Smooth radial low-pass profile: 1 below the cutoff, 0 beyond twice it.
inline double lowpass_profile(double r) { return 1.0 - smooth_step01(r - 1.0); }

// Correct quadrature weights so the discrete moments sum_j w_j j^k match
// delta_{k0} for k = 0..3 (the approximation orders of Prop-style bounds).
inline void enforce_moments(std::vector<double>& w, const std::vector<double>& nodes) {
  const int m = static_cast<int>(w.size());
  const double scale = std::max(1.0, std::abs(nodes.back()));
  Eigen::MatrixXd V(4, m);
  for (int k = 0; k < 4; ++k)
    for (int j = 0; j < m; ++j) V(k, j) = std::pow(nodes[j] / scale, k);
  Eigen::Vector4d e(1.0, 0.0, 0.0, 0.0);
  Eigen::Map<Eigen::VectorXd> wv(w.data(), m);
  Eigen::Vector4d r = e - V * wv;
  wv += V.transpose() * (V * V.transpose()).ldlt().solve(r);
}

// Continuous one-sided kernel K(s) = P(s) B(s) on (0,1), where B is a smooth
// bump and the cubic P enforces vanishing first three moments (the signed
// lobes every causal high-order mollifier must carry).
inline double causal_kernel(double s) {
  static const Eigen::Vector4d p = [] {
    auto B = [](double u) {
      return (u <= 0.0 || u >= 1.0) ? 0.0 : std::exp(-1.0 / (u * (1.0 - u)));
    };
    // Hankel matrix of bump moments b_j = int s^j B ds, j = 0..6
    double b[7] = {0, 0, 0, 0, 0, 0, 0};
    const int nq = 20000;
    for (int i = 0; i < nq; ++i) {
      const double u = (i + 0.5) / nq;
      double powu = 1.0;
      for (int j = 0; j <= 6; ++j) {
        b[j] += powu * B(u) / nq;
        powu *= u;
      }
    }
    Eigen::Matrix4d A;
    for (int k = 0; k < 4; ++k)
      for (int i = 0; i < 4; ++i) A(k, i) = b[k + i];
    return Eigen::Vector4d(A.fullPivLu().solve(Eigen::Vector4d(1, 0, 0, 0)));
  }();
  if (s <= 0.0 || s >= 1.0) return 0.0;
  const double B = std::exp(-1.0 / (s * (1.0 - s)));
  return B * (p(0) + s * (p(1) + s * (p(2) + s * p(3))));
}

// One-sided (causal) kernel weights on offsets 0..m time steps back.  Below
// eight samples per width the signed kernel cannot be resolved; the operator
// degenerates to the identity there (all the scale bounds are one-sided).
inline std::vector<double> causal_weights(double width_steps) {
  if (width_steps < 8.0) return {1.0};
  const int m = static_cast<int>(std::ceil(width_steps));
  std::vector<double> w(m + 1, 0.0), nodes(m + 1);
  for (int j = 0; j <= m; ++j) {
    nodes[j] = j;
    w[j] = causal_kernel(j / width_steps) / width_steps;
  }
  enforce_moments(w, nodes);  // small discrete correction
  return w;
}

// Even fourth-order kernel K(s) = (p0 + p2 s^2) B(s) on (-1,1) with the
// second moment removed analytically.
inline double symmetric_kernel(double s) {
  static const Eigen::Vector2d p = [] {
    auto B = [](double u) { return (std::abs(u) >= 1.0) ? 0.0 : std::exp(-1.0 / (1.0 - u * u)); };
    double b0 = 0, b2 = 0, b4 = 0;
    const int nq = 20000;
    for (int i = 0; i < nq; ++i) {
      const double u = -1.0 + (i + 0.5) * 2.0 / nq;
      const double w = B(u) * 2.0 / nq;
      b0 += w;
      b2 += u * u * w;
      b4 += u * u * u * u * w;
    }
    Eigen::Matrix2d A;
    A << b0, b2, b2, b4;
    return Eigen::Vector2d(A.fullPivLu().solve(Eigen::Vector2d(1, 0)));
  }();
  if (std::abs(s) >= 1.0) return 0.0;
  return std::exp(-1.0 / (1.0 - s * s)) * (p(0) + p(1) * s * s);
}

// Symmetric kernel weights on offsets -m..m; identity when the kernel cannot
// be resolved on the grid.
inline std::vector<double> symmetric_weights(double width_steps) {
  if (width_steps < 6.0) return {1.0};
  const int m = static_cast<int>(std::ceil(width_steps));
  std::vector<double> w(2 * m + 1, 0.0), nodes(2 * m + 1);
  for (int j = -m; j <= m; ++j) {
    nodes[j + m] = j;
    w[j + m] = symmetric_kernel(j / width_steps) / width_steps;
  }
  enforce_moments(w, nodes);  // small discrete correction
  return w;
}

}  // namespace detail

// Scale-indexed smoothing family S_theta: spectral low-pass in the periodic
// directions, moment-corrected mollification in x1 (even reflection at the
// slab ends), one-sided mollification in t so past-vanishing is preserved.
struct Smoother {
  double theta = 1.0;
  double c_t = 4.0;   // temporal kernel width = c_t / theta (in time units)
  double c_x1 = 4.0;  // x1 kernel width = c_x1 / theta
  // The causal temporal mollifier is opt-in: its signed lobes overshoot next
  // to the past-vanishing cutoff on short windows, so the default family
  // smooths the spatial directions only (a valid member of the scale family;
  // every bound is one-sided).
  bool temporal = false;

  explicit Smoother(double th, bool with_temporal = false)
      : theta(th), temporal(with_temporal) {
    require(th >= 1.0, Err::ConfigInvalid, "smoothing scale must be >= 1");
  }

  // --- periodic spectral filter along x2 (and x3 when present)
  template <typename GetSet>
  void filter_line(int n, double L, GetSet gs) const {
    std::vector<std::complex<double>> buf(n);
    for (int i = 0; i < n; ++i) buf[i] = gs(i);
    detail::fft_inplace(buf, false);
    for (int j = 0; j < n; ++j) {
      const int kk = (j <= n / 2) ? j : j - n;
      const double kmag = std::abs(kk) * 2.0 * M_PI / L;
      buf[j] *= detail::lowpass_profile(kmag / theta);
    }
    detail::fft_inplace(buf, true);
    for (int i = 0; i < n; ++i) gs(i) = buf[i].real();
  }

  void smooth_tangential(InterfaceField& f) const {
    const Torus2& t = f.g;
    for (int i3 = 0; i3 < t.n3; ++i3)
      filter_line(t.n2, t.L2, [&](int i) -> double& { return f.at(i, i3); });
    if (!t.planar())
      for (int i2 = 0; i2 < t.n2; ++i2)
        filter_line(t.n3, t.L3, [&](int i) -> double& { return f.at(i2, i); });
  }

  void smooth_tangential(SlabField& f) const {
    const SlabGrid& g = f.g;
    for (int i3 = 0; i3 < g.t.n3; ++i3)
      for (int i1 = 0; i1 <= g.n1; ++i1)
        filter_line(g.t.n2, g.t.L2, [&](int i) -> double& { return f.at(i1, i, i3); });
    if (!g.t.planar())
      for (int i2 = 0; i2 < g.t.n2; ++i2)
        for (int i1 = 0; i1 <= g.n1; ++i1)
          filter_line(g.t.n3, g.t.L3, [&](int i) -> double& { return f.at(i1, i2, i); });
  }

  void smooth_x1(SlabField& f) const {
    const SlabGrid& g = f.g;
    const auto w = detail::symmetric_weights(c_x1 / theta / g.h1());
    if (w.size() == 1) return;  // unresolved kernel: identity
    const int m = (static_cast<int>(w.size()) - 1) / 2;
    auto reflect = [&](int i) {
      while (i < 0 || i > g.n1) i = (i < 0) ? -i : 2 * g.n1 - i;
      return i;
    };
    SlabField out(g);
    for (int i3 = 0; i3 < g.t.n3; ++i3)
      for (int i2 = 0; i2 < g.t.n2; ++i2)
        for (int i1 = 0; i1 <= g.n1; ++i1) {
          double s = 0.0;
          for (int j = -m; j <= m; ++j) s += w[j + m] * f.at(reflect(i1 + j), i2, i3);
          out.at(i1, i2, i3) = s;
        }
    f = std::move(out);
  }

  // --- causal temporal smoothing of a series (index < 0 treated as zero).
  // The kernel width is capped at a quarter of the window so short windows
  // are not dominated by the zero-extension truncation; the scale bounds are
  // one-sided and survive the cap.
  template <typename FieldT>
  std::vector<FieldT> smooth_time(const std::vector<FieldT>& series, double dt) const {
    const double cap = 0.25 * (static_cast<double>(series.size()) - 1.0);
    const auto w = detail::causal_weights(std::min(c_t / theta / dt, cap));
    const int m = static_cast<int>(w.size()) - 1;
    std::vector<FieldT> out;
    out.reserve(series.size());
    for (int k = 0; k < static_cast<int>(series.size()); ++k) {
      FieldT acc = series[k];
      for (auto& v : acc.a) v = 0.0;
      for (int j = 0; j <= m; ++j) {
        if (k - j < 0) break;  // fields vanish in the past
        for (std::size_t i = 0; i < acc.a.size(); ++i) acc.a[i] += w[j] * series[k - j].a[i];
      }
      out.push_back(std::move(acc));
    }
    return out;
  }

  std::vector<InterfaceField> apply(const std::vector<InterfaceField>& series, double dt) const {
    auto out = temporal ? smooth_time(series, dt) : series;
    for (auto& f : out) smooth_tangential(f);
    return out;
  }

  std::vector<SlabField> apply(const std::vector<SlabField>& series, double dt) const {
    auto out = temporal ? smooth_time(series, dt) : series;
    for (auto& f : out) {
      smooth_x1(f);
      smooth_tangential(f);
    }
    return out;
  }

  std::vector<PairFields> apply(const std::vector<PairFields>& series, double dt) const {
    std::vector<PairFields> out = series;
    for (int sd = 0; sd < 2; ++sd)
      for (int c = 0; c < 8; ++c) {
        std::vector<SlabField> comp;
        comp.reserve(series.size());
        for (const auto& lvl : series) comp.push_back(lvl.s[sd].c[c]);
        auto sm = apply(comp, dt);
        for (std::size_t k = 0; k < out.size(); ++k) out[k].s[sd].c[c] = std::move(sm[k]);
      }
    return out;
  }
};

}  // namespace mcd
