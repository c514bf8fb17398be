#pragma once

#include <functional>
#include <optional>

#include "mcd/common.hpp"

namespace mcd {

// Tabulated (user-supplied) closure: rho(p,S) with the partials needed by the
// zero-order linearized terms, plus the internal energy.
struct TabulatedClosure {
  std::function<double(double, double)> rho;
  std::function<double(double, double)> rho_p;
  std::function<double(double, double)> rho_S;
  std::function<double(double, double)> rho_pp;
  std::function<double(double, double)> rho_pS;
  std::function<double(double, double)> e;
};

// Constitutive relation for one fluid phase.  Default is the nondimensional
// gamma-law rho(p,S) = p^{1/gamma} exp(-S/gamma); a tabulated closure may be
// supplied instead.
struct Constitutive {
  double gamma = 5.0 / 3.0;
  double rho_star = 1e-3;  // hyperbolicity band (rho_*, rho^*)
  double rho_upper = 1e3;
  std::optional<TabulatedClosure> table;

  Constitutive() = default;
  explicit Constitutive(double g, double lo = 1e-3, double hi = 1e3)
      : gamma(g), rho_star(lo), rho_upper(hi) {
    require(g > 1.0, Err::HyperbolicityViolated, "adiabatic exponent must exceed 1");
    require(lo > 0.0 && hi > lo, Err::ConfigInvalid, "bad hyperbolicity band");
  }

  double rho(double p, double S) const {
    if (table) return table->rho(p, S);
    require(p > 0.0, Err::NonPositivePressure, "gamma-law needs p > 0");
    return std::pow(p, 1.0 / gamma) * std::exp(-S / gamma);
  }
  double rho_p(double p, double S) const {
    if (table) return table->rho_p(p, S);
    return rho(p, S) / (gamma * p);
  }
  double rho_S(double p, double S) const {
    if (table) return table->rho_S(p, S);
    return -rho(p, S) / gamma;
  }
  double rho_pp(double p, double S) const {
    if (table) return table->rho_pp(p, S);
    return rho(p, S) * (1.0 - gamma) / sqr(gamma * p);
  }
  double rho_pS(double p, double S) const {
    if (table) return table->rho_pS(p, S);
    return -rho(p, S) / (gamma * gamma * p);
  }
  // Specific internal energy; for the gamma-law this is p/((gamma-1) rho).
  double internal_energy(double p, double S) const {
    if (table) return table->e(p, S);
    return p / ((gamma - 1.0) * rho(p, S));
  }
};

struct FluidState {
  double p = 1.0;
  Vec3 v = Vec3::Zero();
  Vec3 H = Vec3::Zero();
  double S = 0.0;
  Side side = Side::plus;

  Vec8 as_vec() const {
    Vec8 u;
    u << p, v(0), v(1), v(2), H(0), H(1), H(2), S;
    return u;
  }
  static FluidState from_vec(const Vec8& u, Side s) {
    FluidState f;
    f.p = u(0);
    f.v = Vec3(u(1), u(2), u(3));
    f.H = Vec3(u(4), u(5), u(6));
    f.S = u(7);
    f.side = s;
    return f;
  }
  double total_pressure() const { return p + 0.5 * H.squaredNorm(); }
  double total_energy(const Constitutive& c) const {
    return c.internal_energy(p, S) + 0.5 * v.squaredNorm();
  }
};

inline double density(const Constitutive& c, double p, double S) { return c.rho(p, S); }

struct HyperbolicityReport {
  bool ok = false;
  double margin = 0.0;  // min distance of rho(p,S) to either band edge
};

inline HyperbolicityReport check_hyperbolicity(const Constitutive& c, const FluidState& u) {
  HyperbolicityReport r;
  const double rho = c.rho(u.p, u.S);
  r.ok = (rho > c.rho_star) && (rho < c.rho_upper);
  r.margin = std::min(rho - c.rho_star, c.rho_upper - rho);
  return r;
}

inline double sound_speed(const Constitutive& c, double p, double S) {
  const double rho = c.rho(p, S);
  require(rho > c.rho_star && rho < c.rho_upper, Err::HyperbolicityViolated,
          "density outside hyperbolicity band");
  const double rp = c.rho_p(p, S);
  require(rp > 0.0, Err::HyperbolicityViolated, "rho must increase with p");
  return std::sqrt(1.0 / rp);  // a^2 = dp/drho at fixed S
}

// Constant contact-discontinuity background: two constant states separated by
// a flat interface, with v1 = 0, H1 != 0 and an entropy jump.
struct BackgroundState {
  double p_bar;
  Vec3 v_bar;
  Vec3 H_bar;
  double S_plus;
  double S_minus;

  BackgroundState(double p, const Vec3& v, const Vec3& H, double Sp, double Sm)
      : p_bar(p), v_bar(v), H_bar(H), S_plus(Sp), S_minus(Sm) {
    require(v(0) == 0.0, Err::ConfigInvalid, "background requires v1 = 0");
    require(H(0) != 0.0, Err::ConfigInvalid, "background requires H1 != 0");
    require(Sp != Sm, Err::ConfigInvalid, "background requires an entropy jump");
  }

  FluidState state(Side s) const {
    FluidState f;
    f.p = p_bar;
    f.v = v_bar;
    f.H = H_bar;
    f.S = (s == Side::plus) ? S_plus : S_minus;
    f.side = s;
    return f;
  }
};

}  // namespace mcd
