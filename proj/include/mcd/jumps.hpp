#pragma once

#include "mcd/eos.hpp"

namespace mcd {

// Interface sample for the jump-condition checks: two one-sided states, the
// unit normal (pointing into the + region), the normal interface speed, and
// twice the mean curvature.
struct InterfaceSample {
  FluidState U_plus, U_minus;
  Vec3 n = Vec3(1, 0, 0);
  double Vcal = 0.0;
  double Hcurv = 0.0;
  double sfrak = 0.0;

  void check() const {
    require(std::abs(n.norm() - 1.0) < 1e-12, Err::ConfigInvalid, "normal must be unit");
  }
};

struct RHResidual {
  double mass = 0.0;
  Vec3 momentum = Vec3::Zero();
  Vec3 induction = Vec3::Zero();
  double energy = 0.0;
  double hn = 0.0;

  double max_abs() const {
    double m = std::abs(mass);
    m = std::max(m, momentum.cwiseAbs().maxCoeff());
    m = std::max(m, induction.cwiseAbs().maxCoeff());
    m = std::max(m, std::abs(energy));
    return std::max(m, std::abs(hn));
  }
};

// Conservation-form jump relations with the tension-modified momentum and
// energy rows.
inline RHResidual rh_residual(const Constitutive& cp, const Constitutive& cm,
                              const InterfaceSample& s) {
  s.check();
  const FluidState &up = s.U_plus, &um = s.U_minus;
  const double rp = cp.rho(up.p, up.S), rm = cm.rho(um.p, um.S);
  const double Ep = up.total_energy(cp), Em = um.total_energy(cm);
  const double qp = up.total_pressure(), qm = um.total_pressure();

  RHResidual r;
  r.mass = -s.Vcal * (rp - rm) + s.n.dot(rp * up.v - rm * um.v);
  {
    // n . [rho v (x) v - H (x) H] + n [q]
    const Vec3 mp = rp * s.n.dot(up.v) * up.v - s.n.dot(up.H) * up.H;
    const Vec3 mm = rm * s.n.dot(um.v) * um.v - s.n.dot(um.H) * um.H;
    r.momentum = -s.Vcal * (rp * up.v - rm * um.v) + (mp - mm) + s.n * (qp - qm) -
                 s.sfrak * s.Hcurv * s.n;
  }
  {
    // -V [H] - n x [v x H]
    const Vec3 cp3 = s.n.cross(up.v.cross(up.H));
    const Vec3 cm3 = s.n.cross(um.v.cross(um.H));
    r.induction = -s.Vcal * (up.H - um.H) - (cp3 - cm3);
  }
  {
    const double ep = rp * Ep + 0.5 * up.H.squaredNorm();
    const double em = rm * Em + 0.5 * um.H.squaredNorm();
    const Vec3 fp = up.v * (rp * Ep + up.p) + up.H.cross(up.v.cross(up.H));
    const Vec3 fm = um.v * (rm * Em + um.p) + um.H.cross(um.v.cross(um.H));
    r.energy = -s.Vcal * (ep - em) + s.n.dot(fp - fm) - s.sfrak * s.Hcurv * s.Vcal;
  }
  r.hn = s.n.dot(up.H - um.H);
  return r;
}

struct FluxFormResidual {
  double j_jump = 0.0;        // [j]
  double normal_momentum = 0.0;
  Vec3 tangential_momentum = Vec3::Zero();
  double hn = 0.0;
  Vec3 induction_tangential = Vec3::Zero();
  double energy = 0.0;
  bool j_continuous = true;

  double max_abs() const {
    double m = std::abs(j_jump);
    m = std::max(m, std::abs(normal_momentum));
    m = std::max(m, tangential_momentum.cwiseAbs().maxCoeff());
    m = std::max(m, std::abs(hn));
    m = std::max(m, induction_tangential.cwiseAbs().maxCoeff());
    return std::max(m, std::abs(energy));
  }
};

// Mass-transfer-flux form of the jump relations (tension form).
inline FluxFormResidual flux_form(const Constitutive& cp, const Constitutive& cm,
                                  const InterfaceSample& s, double j_tol = 1e-8) {
  s.check();
  const FluidState &up = s.U_plus, &um = s.U_minus;
  const double rp = cp.rho(up.p, up.S), rm = cm.rho(um.p, um.S);
  const double jp = rp * (up.v.dot(s.n) - s.Vcal);
  const double jm = rm * (um.v.dot(s.n) - s.Vcal);

  FluxFormResidual r;
  r.j_jump = jp - jm;
  const double scale = std::max({std::abs(jp), std::abs(jm), 1e-30});
  r.j_continuous = std::abs(r.j_jump) <= j_tol * std::max(1.0, scale);
  const double j = 0.5 * (jp + jm);

  const double vnp = up.v.dot(s.n), vnm = um.v.dot(s.n);
  const Vec3 vtp = up.v - vnp * s.n, vtm = um.v - vnm * s.n;
  const double hnp = up.H.dot(s.n), hnm = um.H.dot(s.n);
  const Vec3 htp = up.H - hnp * s.n, htm = um.H - hnm * s.n;
  const double hn = 0.5 * (hnp + hnm);
  const double qp = up.total_pressure(), qm = um.total_pressure();
  const double Ep = up.total_energy(cp), Em = um.total_energy(cm);

  r.normal_momentum = j * (vnp - vnm) + (qp - qm) - s.sfrak * s.Hcurv;
  r.tangential_momentum = j * (vtp - vtm) - hn * (htp - htm);
  r.hn = hnp - hnm;
  r.induction_tangential = j * (htp / rp - htm / rm) - hn * (vtp - vtm);
  r.energy = j * ((Ep + 0.5 * up.H.squaredNorm() / rp) - (Em + 0.5 * um.H.squaredNorm() / rm)) +
             (qp * vnp - up.H.dot(up.v) * hnp) - (qm * vnm - um.H.dot(um.v) * hnm) -
             s.sfrak * s.Hcurv * s.Vcal;
  return r;
}

enum class InterfaceClass { contact_ST, tangential_ST, contact, tangential, none, ambiguous };

inline const char* to_string(InterfaceClass c) {
  switch (c) {
    case InterfaceClass::contact_ST: return "contact_ST";
    case InterfaceClass::tangential_ST: return "tangential_ST";
    case InterfaceClass::contact: return "contact";
    case InterfaceClass::tangential: return "tangential";
    case InterfaceClass::none: return "none";
    default: return "ambiguous";
  }
}

// Discontinuity classification per the no-mass-flux families, with and
// without surface tension.
inline InterfaceClass classify(const Constitutive& cp, const Constitutive& cm,
                               const InterfaceSample& s, double tol = 1e-8) {
  s.check();
  const FluidState &up = s.U_plus, &um = s.U_minus;
  const double rp = cp.rho(up.p, up.S), rm = cm.rho(um.p, um.S);
  const double state_scale =
      1.0 + std::max({up.v.norm(), um.v.norm(), up.H.norm(), um.H.norm(), up.p, um.p});
  const double atol = tol * state_scale;

  const double jp = rp * (up.v.dot(s.n) - s.Vcal);
  const double jm = rm * (um.v.dot(s.n) - s.Vcal);
  const bool no_flux = std::abs(jp) <= atol * rp && std::abs(jm) <= atol * rm;
  if (!no_flux) return InterfaceClass::none;

  const double hnp = up.H.dot(s.n), hnm = um.H.dot(s.n);
  const double ten = s.sfrak * s.Hcurv;
  const bool has_tension = std::abs(ten) > atol;

  // contact family: H not tangential, [v] = [H] = 0, [p] balanced by tension
  const bool hn_nonzero = std::min(std::abs(hnp), std::abs(hnm)) > atol;
  const bool hn_zero = std::max(std::abs(hnp), std::abs(hnm)) <= atol;
  const bool vHcont = (up.v - um.v).norm() <= atol && (up.H - um.H).norm() <= atol;
  const bool p_tension = std::abs((up.p - um.p) - ten) <= atol;
  const bool p_plain = std::abs(up.p - um.p) <= atol;

  // tangential family: H tangential, [q] balanced by tension, V = v.n both
  const double qjump = up.total_pressure() - um.total_pressure();
  const bool q_tension = std::abs(qjump - ten) <= atol;
  const bool q_plain = std::abs(qjump) <= atol;
  const bool kin_both = std::abs(up.v.dot(s.n) - s.Vcal) <= atol &&
                        std::abs(um.v.dot(s.n) - s.Vcal) <= atol;

  bool fits_contact_st = hn_nonzero && vHcont && p_tension && has_tension;
  bool fits_contact = hn_nonzero && vHcont && p_plain && !has_tension;
  bool fits_tangential_st = hn_zero && q_tension && kin_both && has_tension;
  bool fits_tangential = hn_zero && q_plain && kin_both && !has_tension;

  const int fits = int(fits_contact_st) + int(fits_contact) + int(fits_tangential_st) +
                   int(fits_tangential);
  if (fits > 1) return InterfaceClass::ambiguous;
  if (fits_contact_st) return InterfaceClass::contact_ST;
  if (fits_contact) return InterfaceClass::contact;
  if (fits_tangential_st) return InterfaceClass::tangential_ST;
  if (fits_tangential) return InterfaceClass::tangential;
  return InterfaceClass::none;
}

}  // namespace mcd
