#include "casc/reference.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace casc {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

double lambda_of(double tau) {
  const double s = 1.0 - tau * tau;
  return s * s;
}

// 8th-order central difference coefficients (offsets 1..4).
constexpr double kD1[4] = {4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0};
constexpr double kD2C = -205.0 / 72.0;
constexpr double kD2[4] = {8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0};

}  // namespace

double ReferenceTrajectory::lens_radius(double t) const {
  const double ta = tau(t);
  if (std::abs(ta) >= 1.0) return 0.0;
  return fields->params.epsilon * lambda_of(ta) * rbar;
}

bool ReferenceTrajectory::in_lens(double t, double x) const {
  return std::abs(x - x0) <= lens_radius(t);
}

double ReferenceTrajectory::alpha(double t, double x) const {
  const double r8 = std::pow(rbar, 8);
  return r8 * fields->eval_a(tau(t), zeta(x));
}

double ReferenceTrajectory::beta(double t, double x) const {
  return rbar * rbar * fields->eval_b(tau(t), zeta(x));
}

double ReferenceTrajectory::gamma(double t, double x) const {
  return fields->eval_c(tau(t), zeta(x));
}

std::array<double, 3> ReferenceTrajectory::state(double t, double x) const {
  const auto abc = fields->eval_abc(tau(t), zeta(x));
  return {std::pow(rbar, 8) * abc[0], rbar * rbar * abc[1], abc[2]};
}

double ReferenceTrajectory::u(double t, double x) const {
  return u_with_steps(t, x, fd_dzeta, fd_dtau);
}

double ReferenceTrajectory::u_with_steps(double t, double x, double dzeta,
                                         double dtau) const {
  const double ta = tau(t);
  const double ze = zeta(x);
  const double eps = fields->params.epsilon;
  // Cheap exact-zero exits: c vanishes identically outside the lens, so the
  // whole stencil is zero there.
  if (std::abs(ta) - 4.0 * dtau >= 1.0) return 0.0;
  if (ze - 4.0 * dzeta > eps) return 0.0;

  // c_tau at fixed zeta.
  double c_tau = 0.0;
  for (int k = 1; k <= 4; ++k) {
    c_tau += kD1[k - 1] * (fields->eval_c(ta + k * dtau, ze) -
                           fields->eval_c(ta - k * dtau, ze));
  }
  c_tau /= dtau;

  // c_zeta, c_zetazeta at fixed tau; the fields are even in zeta.
  const double c0 = fields->eval_c(ta, ze);
  double c_z = 0.0, c_zz = kD2C * c0;
  for (int k = 1; k <= 4; ++k) {
    const double cp = fields->eval_c(ta, std::abs(ze + k * dzeta));
    const double cm = fields->eval_c(ta, std::abs(ze - k * dzeta));
    c_z += kD1[k - 1] * (cp - cm);
    c_zz += kD2[k - 1] * (cp + cm);
  }
  c_z /= dzeta;
  c_zz /= (dzeta * dzeta);

  const int dim = domain.dim;
  double lap;
  if (dim == 1) {
    lap = c_zz;
  } else if (ze < 0.5 * dzeta) {
    // Even symmetry at the axis: Laplacian -> N * c_zetazeta.
    lap = dim * c_zz;
  } else {
    lap = c_zz + (dim - 1) / ze * c_z;
  }
  return (c_tau - lap) / (rbar * rbar);
}

ReferenceTrajectory build_reference(
    std::shared_ptr<const SpacetimeProfiles> fields, const DomainSpec& domain,
    double x0, double rbar, double T) {
  if (!fields) fail("build_reference: missing field bundle");
  if (rbar <= 0.0 || T <= 0.0) fail("build_reference: rbar and T must be > 0");
  if (domain.dim != fields->params.stationary.N)
    fail("build_reference: domain dimension does not match the field bundle");

  std::ostringstream os;
  if (!(rbar * rbar < 0.5 * T)) {
    os << "admissibility violated: the time slab |t - T/2| <= rbar^2 = "
       << rbar * rbar << " is not contained in (0, T) with T = " << T;
    fail(os.str());
  }
  if (domain.kind == Grid1D::Kind::kInterval) {
    if (!(domain.x_lo <= domain.omega_lo && domain.omega_lo < domain.omega_hi &&
          domain.omega_hi <= domain.x_hi))
      fail("build_reference: omega must be an interval inside the domain");
    if (!(x0 - rbar > domain.omega_lo && x0 + rbar < domain.omega_hi)) {
      os << "admissibility violated: the ball |x - x0| <= rbar = [" << x0 - rbar
         << ", " << x0 + rbar << "] is not contained in omega = ("
         << domain.omega_lo << ", " << domain.omega_hi << ")";
      fail(os.str());
    }
  } else {
    if (x0 != 0.0)
      fail("build_reference: radial domains require the center x0 = 0");
    if (domain.omega_lo != 0.0)
      fail("build_reference: radial control region must be a ball (omega_lo = "
           "0)");
    if (!(rbar < domain.omega_hi)) {
      os << "admissibility violated: the ball |x| <= rbar = " << rbar
         << " is not contained in omega = {|x| < " << domain.omega_hi << "}";
      fail(os.str());
    }
    if (!(domain.omega_hi <= domain.x_hi))
      fail("build_reference: omega must fit inside the ball domain");
  }

  ReferenceTrajectory traj;
  traj.fields = std::move(fields);
  traj.domain = domain;
  traj.x0 = x0;
  traj.rbar = rbar;
  traj.T = T;
  // Step defaults in the scaled variables: well below the smallest structure
  // of c (the surgery blend zones, ~1e-3 of the lens width) so the 8th-order
  // stencils sit in their accurate regime.
  traj.fd_dzeta = 4e-4 * traj.fields->params.epsilon;
  traj.fd_dtau = 4e-4;
  return traj;
}

ReferenceReport verify_reference(const ReferenceTrajectory& traj) {
  ReferenceReport rep;
  const auto& p = *traj.fields;
  const double eps = p.params.epsilon;
  const double rb = traj.rbar;
  const int dim = traj.domain.dim;

  // Global scale of b for the kink filter in the beta residual.
  double bmax = 0.0;
  for (int i = 0; i <= 40; ++i) {
    const double z = 0.99 * i / 40.0;
    bmax = std::max(bmax, std::abs(p.eval_b(0.0, z * eps)));
  }

  const double taus[] = {-0.8, -0.45, -0.15, 0.0, 0.2, 0.5, 0.75};
  for (int level = 0; level < 3; ++level) {
    const double hz = 2e-3 / (1 << level);  // z-units step
    double ra = 0.0, rbeta = 0.0, sa = 0.0, sb = 0.0;
    for (double ta : taus) {
      const double lam = lambda_of(ta);
      const double t = 0.5 * traj.T + ta * rb * rb;
      const double ht = hz * rb * rb;          // time step, tau-units = hz
      const double hx = hz * eps * lam * rb;   // space step
      for (int i = 1; i <= 24; ++i) {
        const double z = 0.97 * i / 24.0;
        const double x = traj.x0 + z * eps * lam * rb;
        const double am = traj.alpha(t - ht, x), ap = traj.alpha(t + ht, x);
        const double a0 = traj.alpha(t, x);
        const double al = traj.alpha(t, x - hx), ar = traj.alpha(t, x + hx);
        const double bm = traj.beta(t - ht, x), bp = traj.beta(t + ht, x);
        const double b0 = traj.beta(t, x);
        const double bl = traj.beta(t, x - hx), br = traj.beta(t, x + hx);
        const double g0 = traj.gamma(t, x);
        const double r = std::abs(x - traj.x0);
        auto lap = [&](double um, double u0, double up) {
          double v = (up - 2.0 * u0 + um) / (hx * hx);
          if (dim > 1) v += (dim - 1) / r * (up - um) / (2.0 * hx);
          return v;
        };
        const double res_a =
            (ap - am) / (2.0 * ht) - lap(al, a0, ar) - b0 * b0 * b0;
        ra = std::max(ra, std::abs(res_a));
        sa = std::max(sa, std::abs(b0 * b0 * b0));
        // Skip beta-residual stencils near cube-root kinks of b.
        const double small = std::min({std::abs(bl), std::abs(b0),
                                       std::abs(br), std::abs(bm),
                                       std::abs(bp)});
        const bool signs_ok = (bl > 0) == (br > 0) && (bm > 0) == (bp > 0) &&
                              (bl > 0) == (b0 > 0);
        if (small > 0.05 * bmax * rb * rb && signs_ok) {
          const double res_b =
              (bp - bm) / (2.0 * ht) - lap(bl, b0, br) - g0 * g0 * g0;
          rbeta = std::max(rbeta, std::abs(res_b));
          sb = std::max(sb, std::abs(g0 * g0 * g0));
        }
      }
    }
    rep.residual_alpha[level] = ra;
    rep.residual_beta[level] = rbeta;
    rep.scale_alpha = std::max(rep.scale_alpha, sa);
    rep.scale_beta = std::max(rep.scale_beta, sb);
  }
  rep.slope_alpha =
      0.5 * std::log2(rep.residual_alpha[0] / rep.residual_alpha[2]);
  rep.slope_beta =
      0.5 * std::log2(rep.residual_beta[0] / rep.residual_beta[2]);

  // Fields vanish identically up to T/2 - rbar^2 (and after T/2 + rbar^2).
  rep.early_zero = true;
  for (double t : {1e-3 * traj.T, 0.5 * traj.T - rb * rb,
                   0.5 * traj.T + rb * rb, traj.T * (1 - 1e-3)}) {
    for (int i = 0; i <= 16; ++i) {
      const double x = traj.x0 + (i / 16.0 - 0.5) * 2.5 * rb * eps;
      const auto s = traj.state(t, x);
      if (s[0] != 0.0 || s[1] != 0.0 || s[2] != 0.0) rep.early_zero = false;
    }
  }

  // Support nesting on a sampled grid: nonzero values only inside the lens,
  // which itself sits inside (0, T) x omega.
  rep.support_ok = true;
  for (int j = 0; j <= 60; ++j) {
    const double t = traj.T * (j + 0.5) / 61.0;
    for (int i = 0; i <= 200; ++i) {
      const double x = traj.domain.x_lo +
                       (traj.domain.x_hi - traj.domain.x_lo) * i / 200.0;
      const auto s = traj.state(t, x);
      const double ub = traj.u(t, x);
      if (s[1] < 0.0) rep.beta_sign_seen = true;
      const bool inside_omega = x > traj.domain.omega_lo &&
                                x < traj.domain.omega_hi && t > 0.0 &&
                                t < traj.T;
      if (s[0] != 0.0 || s[1] != 0.0 || s[2] != 0.0) {
        // States are supported exactly in the lens.
        if (!inside_omega || !traj.in_lens(t, x)) rep.support_ok = false;
      }
      if (ub != 0.0) {
        // The stencil-based control lives on the lens inflated by the
        // stencil footprint; it must still sit inside (0,T) x omega.
        const double pad = 5.0 * traj.fd_dzeta * rb;
        const bool near_lens =
            std::abs(x - traj.x0) <= eps * rb + pad &&
            std::abs(traj.tau(t)) < 1.0 + 5.0 * traj.fd_dtau;
        if (!inside_omega || !near_lens) rep.support_ok = false;
      }
    }
  }
  // The coarse grid above can miss the thin lens entirely; also scan inside.
  for (int j = 1; j < 40; ++j) {
    const double ta = -0.95 + 1.9 * j / 40.0;
    const double t = 0.5 * traj.T + ta * rb * rb;
    for (int i = 0; i <= 30; ++i) {
      const double x =
          traj.x0 + (i / 30.0) * 1.0 * eps * lambda_of(ta) * rb * 0.98;
      const auto s = traj.state(t, x);
      if (s[1] < 0.0) rep.beta_sign_seen = true;
      if (s[0] != 0.0 || s[1] != 0.0 || s[2] != 0.0) {
        if (!(x > traj.domain.omega_lo && x < traj.domain.omega_hi && t > 0.0 &&
              t < traj.T))
          rep.support_ok = false;
      }
    }
  }
  return rep;
}

CouplingWindow locate_coupling_window(const ReferenceTrajectory& traj) {
  const auto& p = *traj.fields;
  const double eps = p.params.epsilon;
  const double rb = traj.rbar;
  const double tau1 = -0.25, tau2 = 0.25;
  const double lam_min = lambda_of(std::max(std::abs(tau1), std::abs(tau2)));

  const int nz = 400, nt = 21;
  std::vector<double> min_b(nz + 1, 1e300), min_c(nz + 1, 1e300);
  double scale_b = 0.0, scale_c = 0.0;
  for (int j = 0; j <= nt; ++j) {
    const double ta = tau1 + (tau2 - tau1) * j / nt;
    const double t = 0.5 * traj.T + ta * rb * rb;
    for (int i = 0; i <= nz; ++i) {
      // Fixed physical position; its lens coordinate moves with t.
      const double x = traj.x0 + 0.97 * eps * lam_min * rb * i / nz;
      const auto s = traj.state(t, x);
      min_b[i] = std::min(min_b[i], std::abs(s[1]));
      min_c[i] = std::min(min_c[i], std::abs(s[2]));
      scale_b = std::max(scale_b, std::abs(s[1]));
      scale_c = std::max(scale_c, std::abs(s[2]));
    }
  }
  if (scale_b == 0.0 || scale_c == 0.0)
    fail("locate_coupling_window: fields vanish on the scanned region");

  auto score = [&](int i) {
    return std::min(min_b[i] / scale_b, min_c[i] / scale_c);
  };
  int best = 0;
  for (int i = 1; i <= nz; ++i)
    if (score(i) > score(best)) best = i;
  if (!(score(best) > 0.0))
    fail("locate_coupling_window: no region with both fields bounded away "
         "from zero (profile construction failure)");
  int lo = best, hi = best;
  while (lo > 1 && score(lo - 1) >= 0.3 * score(best)) --lo;
  while (hi < nz && score(hi + 1) >= 0.3 * score(best)) ++hi;

  CouplingWindow win;
  win.t1 = 0.5 * traj.T + tau1 * rb * rb;
  win.t2 = 0.5 * traj.T + tau2 * rb * rb;
  const double step = 0.97 * eps * lam_min * rb / nz;
  win.omega1_lo = traj.x0 + lo * step;
  win.omega1_hi = traj.x0 + hi * step;
  const double quarter = 0.25 * (win.omega1_hi - win.omega1_lo);
  win.omega2_lo = win.omega1_lo + quarter;
  win.omega2_hi = win.omega1_hi - quarter;

  // Verified margins on a denser grid over [t1, t2] x omega1.
  win.mu_beta = 1e300;
  win.mu_gamma = 1e300;
  for (int j = 0; j <= 60; ++j) {
    const double t = win.t1 + (win.t2 - win.t1) * j / 60.0;
    for (int i = 0; i <= 80; ++i) {
      const double x =
          win.omega1_lo + (win.omega1_hi - win.omega1_lo) * i / 80.0;
      const auto s = traj.state(t, x);
      win.mu_beta = std::min(win.mu_beta, std::abs(s[1]));
      win.mu_gamma = std::min(win.mu_gamma, std::abs(s[2]));
    }
  }
  return win;
}

void export_reference_csv(const ReferenceTrajectory& traj,
                          const std::string& path, int t_samples,
                          int x_samples) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) fail("export_reference_csv: cannot open " + path);
  std::fprintf(f, "t,r,alpha,beta,gamma,u\n");
  const double rb = traj.rbar;
  for (int j = 0; j < t_samples; ++j) {
    const double ta = -0.999 + 1.998 * j / (t_samples - 1);
    const double t = 0.5 * traj.T + ta * rb * rb;
    const double rmax = 1.1 * traj.fields->params.epsilon * rb;
    for (int i = 0; i < x_samples; ++i) {
      const double r = rmax * i / (x_samples - 1);
      const auto s = traj.state(t, traj.x0 + r);
      const double ub = traj.u(t, traj.x0 + r);
      std::fprintf(f, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", t, r, s[0],
                   s[1], s[2], ub);
    }
  }
  std::fclose(f);
}

void export_reference_json(const ReferenceTrajectory& traj,
                           const CouplingWindow& win, const std::string& path) {
  nlohmann::json j;
  j["x0"] = traj.x0;
  j["rbar"] = traj.rbar;
  j["T"] = traj.T;
  j["t1"] = win.t1;
  j["t2"] = win.t2;
  j["omega1"] = {win.omega1_lo, win.omega1_hi};
  j["omega2"] = {win.omega2_lo, win.omega2_hi};
  j["margins"] = {{"mu_beta", win.mu_beta}, {"mu_gamma", win.mu_gamma}};
  std::ofstream out(path);
  if (!out) fail("export_reference_json: cannot open " + path);
  out << j.dump(2) << "\n";
}

}  // namespace casc
