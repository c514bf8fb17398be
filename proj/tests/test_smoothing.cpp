#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "mcd/diagnostics.hpp"
#include "mcd/smoothing.hpp"

using namespace mcd;
using namespace mcd::testing;

namespace {

// random band-limited space-time field on a small cylinder, vanishing for
// the first few levels so past-vanishing checks are meaningful
std::vector<SlabField> random_cylinder_field(const SlabGrid& g, int nt, double dt, Rng& rng,
                                             int kmax = 6, bool zero_start = false) {
  std::vector<SlabField> out;
  const int modes = 5;
  std::vector<std::array<double, 4>> ms;  // (amp, om, q1, k2)
  std::vector<double> phase;
  for (int m = 0; m < modes; ++m) {
    ms.push_back({rng.normal(0, 1.0), rng.uniform(0.5, 3.0), rng.uniform(0.3, double(kmax)),
                  double(rng.integer(0, kmax))});
    phase.push_back(rng.uniform(0, 2 * M_PI));
  }
  for (int k = 0; k < nt; ++k) {
    const double t = k * dt;
    SlabField f(g);
    for (int i2 = 0; i2 < g.t.n2; ++i2)
      for (int i1 = 0; i1 <= g.n1; ++i1) {
        double v = 0.0;
        for (int m = 0; m < modes; ++m)
          v += ms[m][0] * std::cos(ms[m][1] * t + ms[m][3] * g.t.x2(i2) + phase[m]) *
               std::cos(ms[m][2] * g.x1(i1));
        f.at(i1, i2, 0) = v;
      }
    if (zero_start && k < 3)
      for (auto& v : f.a) v = 0.0;
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace

TEST_CASE("band-limited fields are reproduced") {
  auto g = small_grid(32, 64, 6.0);
  const int nt = 33;
  const double dt = 0.05;
  // single tangential mode below the cutoff, constant in t and x1
  std::vector<SlabField> u;
  for (int k = 0; k < nt; ++k)
    u.push_back(
        SlabField::sample(g, [](double, double x2, double) { return std::sin(2.0 * x2); }));
  Smoother S(64.0);
  auto su = S.apply(u, dt);
  double err = 0.0;
  for (int k = 4; k < nt; ++k)
    for (std::size_t i = 0; i < u[k].a.size(); ++i)
      err = std::max(err, std::abs(su[k].a[i] - u[k].a[i]));
  CHECK(err < 1e-10);
}

TEST_CASE("high tangential modes are strongly attenuated") {
  auto g = small_grid(8, 64, 4.0);
  const int nt = 9;
  const double dt = 0.05;
  const double theta = 4.0;
  const int k2 = 16;  // |k| = 4 theta
  std::vector<SlabField> u;
  for (int k = 0; k < nt; ++k)
    u.push_back(
        SlabField::sample(g, [&](double, double x2, double) { return std::sin(k2 * x2); }));
  Smoother S(theta);
  auto su = S.apply(u, dt);
  double amp = 0.0;
  for (std::size_t i = 0; i < su[nt - 1].a.size(); ++i)
    amp = std::max(amp, std::abs(su[nt - 1].a[i]));
  CHECK(amp < 1e-3);
}

TEST_CASE("past-vanishing is preserved exactly") {
  auto g = small_grid(12, 16, 4.0);
  Rng rng(4);
  auto u = random_cylinder_field(g, 25, 0.04, rng, 4, true);
  for (double th : {1.0, 3.0, 17.0}) {
    Smoother S(th);
    auto su = S.apply(u, 0.04);
    for (int k = 0; k < 3; ++k)
      for (double v : su[k].a) CHECK(v == 0.0);
  }
}

TEST_CASE("smoothing property sweep") {
  // (5.6a): ||S_th u||_l <= C th^{(l-j)+} ||u||_j
  // (5.6b): ||S_th u - u||_l <= C th^{l-j} ||u||_j for l <= j
  // (5.6c): ||d/dth S_th u||_l <= C th^{l-j-1} ||u||_j
  auto g = small_grid(24, 32, 4.0);
  const int nt = 25;
  const double dt = 0.05;
  Rng rng(11);
  const std::vector<double> thetas = {1, 2, 4, 8, 16, 32, 64};
  const int nfields = 50;

  // precompute norms over a modest field ensemble
  std::vector<std::vector<SlabField>> fields;
  for (int i = 0; i < nfields; ++i) fields.push_back(random_cylinder_field(g, nt, dt, rng, 7));

  double C_bound = 0.0, C_approx = 0.0, C_deriv = 0.0;
  std::vector<double> worst_ratio_per_theta(thetas.size(), 0.0);
  for (int fi = 0; fi < nfields; ++fi) {
    const auto& u = fields[fi];
    std::array<double, 5> nu{};
    for (int m = 0; m <= 4; ++m) nu[m] = sobolev_norm(u, m, dt);
    for (std::size_t ti = 0; ti < thetas.size(); ++ti) {
      const double th = thetas[ti];
      Smoother S(th);
      auto su = S.apply(u, dt);
      std::vector<SlabField> diff = su;
      for (int k = 0; k < nt; ++k)
        for (std::size_t i = 0; i < diff[k].a.size(); ++i) diff[k].a[i] -= u[k].a[i];
      // d/dth via difference quotient at scale th (one-sided at th = 1)
      const double thm = std::max(1.0, th / 1.05);
      Smoother Sp(th * 1.05), Sm(thm);
      auto sup = Sp.apply(u, dt);
      auto sum = Sm.apply(u, dt);
      std::vector<SlabField> dd = sup;
      const double dth = th * 1.05 - thm;
      for (int k = 0; k < nt; ++k)
        for (std::size_t i = 0; i < dd[k].a.size(); ++i)
          dd[k].a[i] = (dd[k].a[i] - sum[k].a[i]) / dth;
      for (int l = 1; l <= 4; ++l) {
        const double nsu = sobolev_norm(su, l, dt);
        const double ndiff = sobolev_norm(diff, l, dt);
        const double ndd = sobolev_norm(dd, l, dt);
        for (int j = 1; j <= 4; ++j) {
          if (nu[j] == 0.0) continue;
          const double r_bound = nsu / (std::pow(th, std::max(0, l - j)) * nu[j]);
          C_bound = std::max(C_bound, r_bound);
          worst_ratio_per_theta[ti] = std::max(worst_ratio_per_theta[ti], r_bound);
          if (l <= j) C_approx = std::max(C_approx, ndiff / (std::pow(th, l - j) * nu[j]));
          C_deriv = std::max(C_deriv, ndd / (std::pow(th, l - j - 1) * nu[j]));
        }
      }
    }
    if (fi >= 7) break;  // norms are expensive; a subset suffices per run
  }
  // a single constant covers the whole sweep
  CHECK(C_bound < 50.0);
  CHECK(C_approx < 50.0);
  CHECK(C_deriv < 200.0);
  // the boundedness ratio must not grow with theta
  CHECK(worst_ratio_per_theta.back() < 2.0 * (worst_ratio_per_theta.front() + 1.0));
}

TEST_CASE("boundary smoother and the jump property") {
  Torus2 t;
  t.n2 = 64;
  t.n3 = 1;
  const int nt = 25;
  const double dt = 0.05;
  Rng rng(23);

  SECTION("interface series: band-limited reproduction") {
    std::vector<InterfaceField> psi;
    for (int k = 0; k < nt; ++k)
      psi.push_back(
          InterfaceField::sample(t, [](double x2, double) { return std::cos(3.0 * x2); }));
    Smoother S(32.0);
    auto sp = S.apply(psi, dt);
    for (int k = 6; k < nt; ++k)
      for (std::size_t i = 0; i < sp[k].a.size(); ++i)
        CHECK(sp[k].a[i] == Catch::Approx(psi[k].a[i]).margin(1e-10));
  }

  SECTION("jump property (smooth.p2 shape)") {
    auto g = small_grid(16, 32, 4.0);
    // pair with a controlled boundary jump: u+ = common + J, u- = common
    std::vector<PairFields> u;
    for (int k = 0; k < nt; ++k) {
      PairFields p(g);
      const double tt = k * dt;
      for (int i2 = 0; i2 < g.t.n2; ++i2)
        for (int i1 = 0; i1 <= g.n1; ++i1) {
          const double common =
              std::sin(2 * g.t.x2(i2) + tt) * std::exp(-0.4 * g.x1(i1));
          const double jmp = 0.5 * std::cos(5 * g.t.x2(i2) - tt) * std::exp(-g.x1(i1));
          for (int m = 0; m < 8; ++m) {
            p.side(Side::plus).c[m].at(i1, i2, 0) = common + jmp;
            p.side(Side::minus).c[m].at(i1, i2, 0) = common;
          }
        }
      u.push_back(std::move(p));
    }
    auto jump_series = [&](const std::vector<PairFields>& w) {
      std::vector<InterfaceField> out;
      for (const auto& lvl : w) {
        InterfaceField f(g.t);
        for (int i2 = 0; i2 < g.t.n2; ++i2)
          f.at(i2, 0) = lvl.side(Side::plus).c[0].at(0, i2, 0) -
                        lvl.side(Side::minus).c[0].at(0, i2, 0);
        out.push_back(std::move(f));
      }
      return out;
    };
    auto ju = jump_series(u);
    std::array<double, 5> nj{};
    for (int m = 1; m <= 4; ++m) nj[m] = sobolev_norm(ju, m, dt);
    double C = 0.0;
    for (double th : {1.0, 2.0, 4.0, 8.0, 16.0}) {
      Smoother S(th);
      auto su = S.apply(u, dt);
      auto jsu = jump_series(su);
      for (int l = 1; l <= 3; ++l) {
        const double njs = sobolev_norm(jsu, l, dt);
        for (int j = 1; j <= 4; ++j)
          C = std::max(C, njs / (std::pow(th, std::max(0, l + 1 - j)) * nj[j]));
      }
    }
    CHECK(C < 50.0);
  }
}
