#include "casc/pde.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace casc {

namespace {

using Eigen::VectorXd;

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

void check_grid(const Grid1D& g) {
  if (g.n < 4) fail("grid: need at least 4 nodes");
  if (g.x_hi <= g.x_lo) fail("grid: x_hi must exceed x_lo");
  if (g.kind == Grid1D::Kind::kRadialBall) {
    if (g.x_lo != 0.0) fail("grid: radial ball must start at r = 0");
    if (g.dim < 1) fail("grid: dimension must be positive");
  } else if (g.dim != 1) {
    fail("grid: interval grids are one-dimensional");
  }
}

VectorXd cube(const VectorXd& x) { return x.array().cube().matrix(); }

}  // namespace

Eigen::VectorXd Grid1D::cell_weights() const {
  check_grid(*this);
  const double hh = h();
  const int m = interior_count();
  VectorXd w(m);
  for (int j = 0; j < m; ++j) {
    const double r = interior_node(j);
    const double lo = std::max(r - 0.5 * hh, x_lo);
    const double hi = std::min(r + 0.5 * hh, x_hi);
    if (kind == Kind::kRadialBall) {
      w[j] = (std::pow(hi, dim) - std::pow(lo, dim)) / dim;
    } else {
      w[j] = hi - lo;
    }
  }
  return w;
}

double dot(const Grid1D& g, const VectorXd& a, const VectorXd& b) {
  return (g.cell_weights().array() * a.array() * b.array()).sum();
}

double norm(const Grid1D& g, const VectorXd& a) {
  return std::sqrt(dot(g, a, a));
}

VectorXd TriDiag::apply(const VectorXd& x) const {
  const int m = size();
  VectorXd y(m);
  for (int i = 0; i < m; ++i) {
    double s = diag[i] * x[i];
    if (i > 0) s += lower[i] * x[i - 1];
    if (i + 1 < m) s += upper[i] * x[i + 1];
    y[i] = s;
  }
  return y;
}

VectorXd TriDiag::apply_transpose(const VectorXd& x) const {
  const int m = size();
  VectorXd y(m);
  for (int i = 0; i < m; ++i) {
    double s = diag[i] * x[i];
    if (i > 0) s += upper[i - 1] * x[i - 1];
    if (i + 1 < m) s += lower[i + 1] * x[i + 1];
    y[i] = s;
  }
  return y;
}

TriSolver::Factor TriSolver::factor(const TriDiag& m) {
  const int n = m.size();
  Factor f;
  f.lower = m.lower;
  f.cprime.resize(n);
  f.denom.resize(n);
  double d = m.diag[0];
  f.denom[0] = d;
  f.cprime[0] = m.upper[0] / d;
  for (int i = 1; i < n; ++i) {
    d = m.diag[i] - m.lower[i] * f.cprime[i - 1];
    if (d == 0.0) fail("tridiagonal solver: zero pivot");
    f.denom[i] = d;
    if (i + 1 < n) f.cprime[i] = m.upper[i] / d;
  }
  return f;
}

VectorXd TriSolver::Factor::run(const VectorXd& b) const {
  const int n = static_cast<int>(denom.size());
  VectorXd x(n);
  x[0] = b[0] / denom[0];
  for (int i = 1; i < n; ++i) x[i] = (b[i] - lower[i] * x[i - 1]) / denom[i];
  for (int i = n - 2; i >= 0; --i) x[i] -= cprime[i] * x[i + 1];
  return x;
}

TriSolver::TriSolver(const TriDiag& m) {
  fwd_ = factor(m);
  const int n = m.size();
  TriDiag t;
  t.diag = m.diag;
  t.lower.resize(n);
  t.upper.resize(n);
  t.lower[0] = 0.0;
  t.upper[n - 1] = 0.0;
  for (int i = 1; i < n; ++i) t.lower[i] = m.upper[i - 1];
  for (int i = 0; i + 1 < n; ++i) t.upper[i] = m.lower[i + 1];
  trans_ = factor(t);
}

VectorXd TriSolver::solve(const VectorXd& b) const { return fwd_.run(b); }
VectorXd TriSolver::solve_transpose(const VectorXd& b) const {
  return trans_.run(b);
}

TriDiag build_laplacian(const Grid1D& g) {
  check_grid(g);
  const int m = g.interior_count();
  const double h = g.h();
  const double ih2 = 1.0 / (h * h);
  TriDiag lap;
  lap.lower = VectorXd::Zero(m);
  lap.diag = VectorXd::Zero(m);
  lap.upper = VectorXd::Zero(m);
  for (int j = 0; j < m; ++j) {
    const double r = g.interior_node(j);
    if (g.kind == Grid1D::Kind::kRadialBall && j == 0) {
      // r = 0: even symmetry gives Laplacian = N u_rr(0) with the ghost
      // reflection u(-h) = u(h), so u_rr(0) ~ 2(u_1 - u_0)/h^2.
      lap.diag[j] = -2.0 * g.dim * ih2;
      lap.upper[j] = 2.0 * g.dim * ih2;
      continue;
    }
    const double drift = (g.dim - 1) / (2.0 * h * r);
    lap.lower[j] = ih2 - drift;
    lap.diag[j] = -2.0 * ih2;
    lap.upper[j] = ih2 + drift;
  }
  return lap;
}

VectorXd apply_laplacian_full(const Grid1D& g, const VectorXd& field) {
  check_grid(g);
  if (field.size() != g.n) fail("apply_laplacian_full: wrong field length");
  const double h = g.h();
  const double ih2 = 1.0 / (h * h);
  VectorXd out = VectorXd::Zero(g.n);
  for (int i = g.first_interior(); i <= g.n - 2; ++i) {
    if (g.kind == Grid1D::Kind::kRadialBall && i == 0) {
      out[0] = 2.0 * g.dim * (field[1] - field[0]) * ih2;
      continue;
    }
    const double r = g.node(i);
    const double drift = (g.dim - 1) / (2.0 * h * r);
    out[i] = (field[i + 1] - 2.0 * field[i] + field[i - 1]) * ih2 +
             drift * (field[i + 1] - field[i - 1]);
  }
  return out;
}

VectorXd restrict_interior(const Grid1D& g, const VectorXd& full) {
  if (full.size() != g.n) fail("restrict_interior: wrong field length");
  return full.segment(g.first_interior(), g.interior_count());
}

VectorXd extend_full(const Grid1D& g, const VectorXd& interior) {
  if (interior.size() != g.interior_count())
    fail("extend_full: wrong interior length");
  VectorXd full = VectorXd::Zero(g.n);
  full.segment(g.first_interior(), g.interior_count()) = interior;
  return full;
}

FieldState solve_forward_semilinear(
    const Grid1D& g, const FieldState& y0,
    const std::function<void(double, VectorXd&)>& u, double t_end,
    const SemilinearOptions& opt) {
  check_grid(g);
  if (opt.steps < 1) fail("semilinear: need at least one step");
  if (t_end <= y0.t) fail("semilinear: t_end must exceed the initial time");
  const double dt = (t_end - y0.t) / opt.steps;
  const int m = g.interior_count();

  const TriDiag lap = build_laplacian(g);
  TriDiag s, t;
  s.lower = -0.5 * dt * lap.lower;
  s.diag = VectorXd::Ones(m) - 0.5 * dt * lap.diag;
  s.upper = -0.5 * dt * lap.upper;
  t.lower = 0.5 * dt * lap.lower;
  t.diag = VectorXd::Ones(m) + 0.5 * dt * lap.diag;
  t.upper = 0.5 * dt * lap.upper;
  const TriSolver solver(s);

  VectorXd a = restrict_interior(g, y0.alpha);
  VectorXd b = restrict_interior(g, y0.beta);
  VectorXd gam = restrict_interior(g, y0.gamma);

  VectorXd src_b_prev = cube(gam), src_a_prev = cube(b);
  VectorXd u_lo = VectorXd::Zero(m), u_hi = VectorXd::Zero(m);
  if (u) u(y0.t, u_lo);

  auto emit = [&](double tt) {
    if (!opt.observer) return;
    FieldState snap;
    snap.t = tt;
    snap.alpha = extend_full(g, a);
    snap.beta = extend_full(g, b);
    snap.gamma = extend_full(g, gam);
    opt.observer(snap);
  };
  emit(y0.t);

  for (int k = 0; k < opt.steps; ++k) {
    const double tk = y0.t + k * dt;
    const double tk1 = y0.t + (k + 1) * dt;
    u_hi.setZero();
    if (u) u(tk1, u_hi);

    const VectorXd src_b = cube(gam);
    const VectorXd src_a = cube(b);
    const double wa = (k == 0) ? 1.0 : 1.5;
    const double wb = (k == 0) ? 0.0 : -0.5;

    gam = solver.solve(t.apply(gam) + 0.5 * dt * (u_lo + u_hi));
    b = solver.solve(t.apply(b) + dt * (wa * src_b + wb * src_b_prev));
    a = solver.solve(t.apply(a) + dt * (wa * src_a + wb * src_a_prev));
    src_b_prev = src_b;
    src_a_prev = src_a;
    u_lo = u_hi;

    const double amp = std::max({a.cwiseAbs().maxCoeff(),
                                 b.cwiseAbs().maxCoeff(),
                                 gam.cwiseAbs().maxCoeff()});
    if (!(amp < opt.blowup_bound)) {
      std::ostringstream os;
      os << "semilinear forward solve exceeded the state bound "
         << opt.blowup_bound << " at t = " << tk1;
      fail(os.str());
    }
    emit(tk1);
  }

  FieldState out;
  out.t = t_end;
  out.alpha = extend_full(g, a);
  out.beta = extend_full(g, b);
  out.gamma = extend_full(g, gam);
  return out;
}

namespace {

struct LinearWorkspace {
  TriDiag t;
  TriSolver solver;
  VectorXd w;  // cell weights
  int m = 0;

  explicit LinearWorkspace(const LinearizedSystem& sys) {
    check_grid(sys.grid);
    if (sys.steps < 1) fail("linearized: need at least one step");
    if (sys.t2 <= sys.t1) fail("linearized: t2 must exceed t1");
    m = sys.grid.interior_count();
    if (sys.mask.size() != m) fail("linearized: mask has wrong length");
    if (static_cast<int>(sys.p.size()) != sys.steps + 1 ||
        static_cast<int>(sys.q.size()) != sys.steps + 1)
      fail("linearized: coefficient samples must cover every time node");
    const double dt = sys.dt();
    const TriDiag lap = build_laplacian(sys.grid);
    TriDiag s;
    s.lower = -0.5 * dt * lap.lower;
    s.diag = VectorXd::Ones(m) - 0.5 * dt * lap.diag;
    s.upper = -0.5 * dt * lap.upper;
    t.lower = 0.5 * dt * lap.lower;
    t.diag = VectorXd::Ones(m) + 0.5 * dt * lap.diag;
    t.upper = 0.5 * dt * lap.upper;
    solver = TriSolver(s);
    w = sys.grid.cell_weights();
  }

  // Solve the weighted transpose system S^W psi = x, S^W = W^-1 S^T W.
  VectorXd solve_wt(const VectorXd& x) const {
    return solver.solve_transpose((w.array() * x.array()).matrix())
               .array() /
           w.array();
  }
  VectorXd apply_t_wt(const VectorXd& x) const {
    return t.apply_transpose((w.array() * x.array()).matrix()).array() /
           w.array();
  }
};

const VectorXd* bundle_at(const ControlBundle* v, int comp, int k) {
  if (!v) return nullptr;
  const auto& vec = v->v[comp];
  if (vec.empty()) return nullptr;
  return &vec[k];
}

void add_scaled(VectorXd& dst, double c, const VectorXd* x) {
  if (x && x->size() == dst.size()) dst += c * (*x);
}

}  // namespace

StackedState solve_forward_linearized(const LinearizedSystem& sys,
                                      const StackedState& y0,
                                      const ControlBundle* v,
                                      const ExtraSources* extra,
                                      const StepObserver& observer) {
  const LinearWorkspace ws(sys);
  const double dt = sys.dt();
  StackedState y = y0;
  if (observer) observer(0, sys.t1, y);
  for (int k = 0; k < sys.steps; ++k) {
    VectorXd sg = VectorXd::Zero(ws.m);
    if (const VectorXd* x = bundle_at(v, 2, k))
      sg += 0.5 * dt * sys.mask.cwiseProduct(*x);
    if (const VectorXd* x = bundle_at(v, 2, k + 1))
      sg += 0.5 * dt * sys.mask.cwiseProduct(*x);
    if (extra) {
      add_scaled(sg, 0.5 * dt, &(*extra)[2][k]);
      add_scaled(sg, 0.5 * dt, &(*extra)[2][k + 1]);
    }
    const VectorXd g1 = ws.solver.solve(ws.t.apply(y.g) + sg);

    VectorXd sb = 0.5 * dt *
                  (sys.q[k].cwiseProduct(y.g) + sys.q[k + 1].cwiseProduct(g1));
    if (sys.three_control) {
      if (const VectorXd* x = bundle_at(v, 1, k))
        sb += 0.5 * dt * sys.mask.cwiseProduct(*x);
      if (const VectorXd* x = bundle_at(v, 1, k + 1))
        sb += 0.5 * dt * sys.mask.cwiseProduct(*x);
    }
    if (extra) {
      add_scaled(sb, 0.5 * dt, &(*extra)[1][k]);
      add_scaled(sb, 0.5 * dt, &(*extra)[1][k + 1]);
    }
    const VectorXd b1 = ws.solver.solve(ws.t.apply(y.b) + sb);

    VectorXd sa = 0.5 * dt *
                  (sys.p[k].cwiseProduct(y.b) + sys.p[k + 1].cwiseProduct(b1));
    if (sys.three_control) {
      if (const VectorXd* x = bundle_at(v, 0, k))
        sa += 0.5 * dt * sys.mask.cwiseProduct(*x);
      if (const VectorXd* x = bundle_at(v, 0, k + 1))
        sa += 0.5 * dt * sys.mask.cwiseProduct(*x);
    }
    if (extra) {
      add_scaled(sa, 0.5 * dt, &(*extra)[0][k]);
      add_scaled(sa, 0.5 * dt, &(*extra)[0][k + 1]);
    }
    y.a = ws.solver.solve(ws.t.apply(y.a) + sa);
    y.b = b1;
    y.g = g1;
    if (observer) observer(k + 1, sys.time(k + 1), y);
  }
  return y;
}

StackedState solve_adjoint(const LinearizedSystem& sys,
                           const StackedState& phi_t2, ControlBundle* bstar,
                           const StepObserver& observer) {
  const LinearWorkspace ws(sys);
  const double dt = sys.dt();
  if (bstar) {
    for (int c = 0; c < 3; ++c) {
      const bool used = (c == 2) || sys.three_control;
      bstar->v[c].assign(used ? sys.steps + 1 : 0, VectorXd::Zero(ws.m));
    }
  }
  StackedState phi = phi_t2;
  if (observer) observer(sys.steps, sys.t2, phi);
  for (int k = sys.steps - 1; k >= 0; --k) {
    // Transpose of the step k -> k+1: the cascade runs in the reverse
    // direction (information flows alpha -> beta -> gamma).
    const VectorXd psi_a = ws.solve_wt(phi.a);
    const VectorXd psi_b =
        ws.solve_wt(phi.b + 0.5 * dt * sys.p[k + 1].cwiseProduct(psi_a));
    const VectorXd psi_g =
        ws.solve_wt(phi.g + 0.5 * dt * sys.q[k + 1].cwiseProduct(psi_b));
    if (bstar) {
      const VectorXd mg = 0.5 * dt * sys.mask.cwiseProduct(psi_g);
      bstar->v[2][k] += mg;
      bstar->v[2][k + 1] += mg;
      if (sys.three_control) {
        const VectorXd ma = 0.5 * dt * sys.mask.cwiseProduct(psi_a);
        const VectorXd mb = 0.5 * dt * sys.mask.cwiseProduct(psi_b);
        bstar->v[0][k] += ma;
        bstar->v[0][k + 1] += ma;
        bstar->v[1][k] += mb;
        bstar->v[1][k + 1] += mb;
      }
    }
    phi.a = ws.apply_t_wt(psi_a);
    phi.b = ws.apply_t_wt(psi_b) + 0.5 * dt * sys.p[k].cwiseProduct(psi_a);
    phi.g = ws.apply_t_wt(psi_g) + 0.5 * dt * sys.q[k].cwiseProduct(psi_b);
    if (observer) observer(k, sys.time(k), phi);
  }
  return phi;
}

StackedState solve_forward_perturbation(
    const LinearizedSystem& sys, const std::vector<VectorXd>& betabar,
    const std::vector<VectorXd>& gammabar, const StackedState& y0,
    const ControlBundle* v, double blowup_bound, const StepObserver& observer) {
  const LinearWorkspace ws(sys);
  if (static_cast<int>(betabar.size()) != sys.steps + 1 ||
      static_cast<int>(gammabar.size()) != sys.steps + 1)
    fail("perturbation: trajectory samples must cover every time node");
  const double dt = sys.dt();
  StackedState y = y0;
  auto rem = [](const VectorXd& bar, const VectorXd& x) -> VectorXd {
    return (3.0 * bar.array() * x.array().square() + x.array().cube())
        .matrix();
  };
  VectorXd ra_prev = rem(betabar[0], y.b);
  VectorXd rb_prev = rem(gammabar[0], y.g);
  if (observer) observer(0, sys.t1, y);
  for (int k = 0; k < sys.steps; ++k) {
    const VectorXd ra = rem(betabar[k], y.b);
    const VectorXd rb = rem(gammabar[k], y.g);
    const double wa = (k == 0) ? 1.0 : 1.5;
    const double wb = (k == 0) ? 0.0 : -0.5;

    VectorXd sg = VectorXd::Zero(ws.m);
    if (const VectorXd* x = bundle_at(v, 2, k))
      sg += 0.5 * dt * sys.mask.cwiseProduct(*x);
    if (const VectorXd* x = bundle_at(v, 2, k + 1))
      sg += 0.5 * dt * sys.mask.cwiseProduct(*x);
    const VectorXd g1 = ws.solver.solve(ws.t.apply(y.g) + sg);

    VectorXd sb = 0.5 * dt *
                      (sys.q[k].cwiseProduct(y.g) +
                       sys.q[k + 1].cwiseProduct(g1)) +
                  dt * (wa * rb + wb * rb_prev);
    if (sys.three_control) {
      if (const VectorXd* x = bundle_at(v, 1, k))
        sb += 0.5 * dt * sys.mask.cwiseProduct(*x);
      if (const VectorXd* x = bundle_at(v, 1, k + 1))
        sb += 0.5 * dt * sys.mask.cwiseProduct(*x);
    }
    const VectorXd b1 = ws.solver.solve(ws.t.apply(y.b) + sb);

    VectorXd sa = 0.5 * dt *
                      (sys.p[k].cwiseProduct(y.b) +
                       sys.p[k + 1].cwiseProduct(b1)) +
                  dt * (wa * ra + wb * ra_prev);
    if (sys.three_control) {
      if (const VectorXd* x = bundle_at(v, 0, k))
        sa += 0.5 * dt * sys.mask.cwiseProduct(*x);
      if (const VectorXd* x = bundle_at(v, 0, k + 1))
        sa += 0.5 * dt * sys.mask.cwiseProduct(*x);
    }
    y.a = ws.solver.solve(ws.t.apply(y.a) + sa);
    y.b = b1;
    y.g = g1;
    ra_prev = ra;
    rb_prev = rb;

    const double amp = std::max({y.a.cwiseAbs().maxCoeff(),
                                 y.b.cwiseAbs().maxCoeff(),
                                 y.g.cwiseAbs().maxCoeff()});
    if (!(amp < blowup_bound)) {
      std::ostringstream os;
      os << "perturbation forward solve exceeded the state bound "
         << blowup_bound << " at t = " << sys.time(k + 1);
      fail(os.str());
    }
    if (observer) observer(k + 1, sys.time(k + 1), y);
  }
  return y;
}

}  // namespace casc
