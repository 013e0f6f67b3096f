#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "casc/pde.hpp"

using namespace casc;
using Eigen::VectorXd;

namespace {

Grid1D interval_grid(int n) {
  Grid1D g;
  g.kind = Grid1D::Kind::kInterval;
  g.dim = 1;
  g.x_lo = 0.0;
  g.x_hi = 1.0;
  g.n = n;
  return g;
}

Grid1D ball_grid(int n, int dim) {
  Grid1D g;
  g.kind = Grid1D::Kind::kRadialBall;
  g.dim = dim;
  g.x_lo = 0.0;
  g.x_hi = 1.0;
  g.n = n;
  return g;
}

VectorXd random_interior(const Grid1D& g, std::mt19937& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  VectorXd v(g.interior_count());
  for (int i = 0; i < v.size(); ++i) v[i] = dist(rng);
  return v;
}

LinearizedSystem smooth_system(const Grid1D& g, int steps, bool three) {
  LinearizedSystem sys;
  sys.grid = g;
  sys.t1 = 0.1;
  sys.t2 = 0.35;
  sys.steps = steps;
  sys.three_control = three;
  const int m = g.interior_count();
  sys.mask = VectorXd::Zero(m);
  for (int j = 0; j < m; ++j) {
    const double x = g.interior_node(j);
    sys.mask[j] = (x > 0.3 && x < 0.7) ? 1.0 : 0.0;
  }
  sys.p.resize(steps + 1);
  sys.q.resize(steps + 1);
  for (int k = 0; k <= steps; ++k) {
    const double t = sys.time(k);
    VectorXd p(m), q(m);
    for (int j = 0; j < m; ++j) {
      const double x = g.interior_node(j);
      p[j] = 0.8 * std::sin(3.0 * x + t);
      q[j] = 0.5 * std::cos(2.0 * x - 2.0 * t);
    }
    sys.p[k] = p;
    sys.q[k] = q;
  }
  return sys;
}

}  // namespace

TEST_CASE("cell weights are positive and consistent with the volume") {
  const Grid1D gi = interval_grid(41);
  const VectorXd wi = gi.cell_weights();
  CHECK(wi.minCoeff() > 0.0);
  CHECK(std::abs(wi.sum() - (1.0 - gi.h())) < 1e-14);
  for (int j = 0; j < wi.size(); ++j) CHECK(wi[j] == doctest::Approx(gi.h()));

  const Grid1D gb = ball_grid(41, 3);
  const VectorXd wb = gb.cell_weights();
  CHECK(wb.minCoeff() > 0.0);
  // Total weight = integral of r^2 over [0, R - h/2].
  const double edge = 1.0 - 0.5 * gb.h();
  CHECK(std::abs(wb.sum() - edge * edge * edge / 3.0) < 1e-14);
}

TEST_CASE("tridiagonal solver matches dense solve, including transpose") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  const int m = 23;
  TriDiag td;
  td.lower = VectorXd::Zero(m);
  td.diag = VectorXd::Zero(m);
  td.upper = VectorXd::Zero(m);
  for (int i = 0; i < m; ++i) {
    td.diag[i] = 4.0 + dist(rng);
    if (i > 0) td.lower[i] = dist(rng);
    if (i + 1 < m) td.upper[i] = dist(rng);
  }
  Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    dense(i, i) = td.diag[i];
    if (i > 0) dense(i, i - 1) = td.lower[i];
    if (i + 1 < m) dense(i, i + 1) = td.upper[i];
  }
  VectorXd b(m);
  for (int i = 0; i < m; ++i) b[i] = dist(rng);
  const TriSolver solver(td);
  CHECK((solver.solve(b) - dense.fullPivLu().solve(b)).cwiseAbs().maxCoeff() <
        1e-12);
  CHECK((solver.solve_transpose(b) -
         dense.transpose().fullPivLu().solve(b))
            .cwiseAbs()
            .maxCoeff() < 1e-12);
  CHECK((td.apply(b) - dense * b).cwiseAbs().maxCoeff() < 1e-13);
  CHECK((td.apply_transpose(b) - dense.transpose() * b).cwiseAbs().maxCoeff() <
        1e-13);
}

TEST_CASE("laplacian annihilates constants at interior-only stencils") {
  const Grid1D g = interval_grid(33);
  VectorXd ones = VectorXd::Ones(g.n);
  const VectorXd lap = apply_laplacian_full(g, ones);
  for (int i = 2; i <= g.n - 3; ++i) CHECK(std::abs(lap[i]) < 1e-12);

  const Grid1D gb = ball_grid(33, 3);
  const VectorXd lapb = apply_laplacian_full(gb, VectorXd::Ones(gb.n));
  for (int i = 0; i <= gb.n - 3; ++i) CHECK(std::abs(lapb[i]) < 1e-12);
}

TEST_CASE("laplacian eigenfunction and polynomial exactness oracles") {
  const Grid1D g = interval_grid(201);
  VectorXd u(g.n);
  for (int i = 0; i < g.n; ++i) u[i] = std::sin(M_PI * g.node(i));
  const VectorXd lap = apply_laplacian_full(g, u);
  const double pi2 = M_PI * M_PI;
  double worst = 0.0;
  for (int i = 1; i <= g.n - 2; ++i)
    worst = std::max(worst, std::abs(lap[i] + pi2 * u[i]));
  CHECK(worst < 5e-3);  // O(h^2) with h = 5e-3

  // N=3, u = r^2: the stencil is exact on quadratics, including at r=0.
  const Grid1D gb = ball_grid(41, 3);
  VectorXd r2(gb.n);
  for (int i = 0; i < gb.n; ++i) r2[i] = gb.node(i) * gb.node(i);
  const VectorXd lapb = apply_laplacian_full(gb, r2);
  for (int i = 0; i <= gb.n - 2; ++i)
    CHECK(std::abs(lapb[i] - 6.0) < 1e-10);
}

TEST_CASE("semilinear solve: zero data and zero control stay zero") {
  const Grid1D g = interval_grid(65);
  FieldState y0;
  y0.t = 0.0;
  y0.alpha = VectorXd::Zero(g.n);
  y0.beta = VectorXd::Zero(g.n);
  y0.gamma = VectorXd::Zero(g.n);
  SemilinearOptions opt;
  opt.steps = 50;
  const FieldState yT = solve_forward_semilinear(g, y0, nullptr, 0.5, opt);
  CHECK(yT.alpha.cwiseAbs().maxCoeff() == 0.0);
  CHECK(yT.beta.cwiseAbs().maxCoeff() == 0.0);
  CHECK(yT.gamma.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("semilinear gamma component reproduces the heat kernel decay") {
  const double T = 0.1;
  const double decay = std::exp(-M_PI * M_PI * T);
  double prev_err = 0.0;
  std::vector<double> errs;
  for (int n : {33, 65, 129}) {
    const Grid1D g = interval_grid(n);
    FieldState y0;
    y0.t = 0.0;
    y0.alpha = VectorXd::Zero(g.n);
    y0.beta = VectorXd::Zero(g.n);
    y0.gamma = VectorXd(g.n);
    for (int i = 0; i < g.n; ++i) y0.gamma[i] = std::sin(M_PI * g.node(i));
    y0.gamma[0] = y0.gamma[g.n - 1] = 0.0;
    SemilinearOptions opt;
    opt.steps = 2 * (n - 1);
    const FieldState yT = solve_forward_semilinear(g, y0, nullptr, T, opt);
    double err = 0.0;
    for (int i = 0; i < g.n; ++i)
      err = std::max(err,
                     std::abs(yT.gamma[i] -
                              decay * std::sin(M_PI * g.node(i))));
    errs.push_back(err);
    prev_err = err;
  }
  (void)prev_err;
  const double slope1 = std::log2(errs[0] / errs[1]);
  const double slope2 = std::log2(errs[1] / errs[2]);
  CHECK(slope1 > 1.8);
  CHECK(slope2 > 1.8);
}

TEST_CASE("semilinear blow-up guard triggers with the failure time") {
  const Grid1D g = interval_grid(33);
  FieldState y0;
  y0.t = 0.0;
  y0.alpha = VectorXd::Zero(g.n);
  y0.beta = VectorXd::Zero(g.n);
  y0.gamma = VectorXd::Zero(g.n);
  for (int i = 1; i < g.n - 1; ++i) y0.gamma[i] = 50.0;
  SemilinearOptions opt;
  opt.steps = 400;
  opt.blowup_bound = 1e6;
  CHECK_THROWS_WITH_AS(solve_forward_semilinear(g, y0, nullptr, 4.0, opt),
                       doctest::Contains("state bound"),
                       std::runtime_error);
}

TEST_CASE("linearized forward/adjoint are exact transposes (state part)") {
  std::mt19937 rng(11);
  for (bool three : {false, true}) {
    for (int dim : {1, 3}) {
      const Grid1D g = dim == 1 ? interval_grid(49) : ball_grid(49, 3);
      LinearizedSystem sys = smooth_system(g, 37, three);
      StackedState y0{random_interior(g, rng), random_interior(g, rng),
                      random_interior(g, rng)};
      StackedState phiT{random_interior(g, rng), random_interior(g, rng),
                        random_interior(g, rng)};
      const StackedState yT = solve_forward_linearized(sys, y0, nullptr);
      const StackedState phi0 = solve_adjoint(sys, phiT, nullptr);
      const double lhs =
          dot(g, yT.a, phiT.a) + dot(g, yT.b, phiT.b) + dot(g, yT.g, phiT.g);
      const double rhs =
          dot(g, y0.a, phi0.a) + dot(g, y0.b, phi0.b) + dot(g, y0.g, phi0.g);
      const double scale = std::abs(lhs) + std::abs(rhs) + 1e-30;
      CHECK(std::abs(lhs - rhs) / scale < 1e-12);
    }
  }
}

TEST_CASE("linearized forward/adjoint are exact transposes (control part)") {
  std::mt19937 rng(13);
  for (bool three : {false, true}) {
    const Grid1D g = interval_grid(41);
    LinearizedSystem sys = smooth_system(g, 29, three);
    ControlBundle v;
    for (int c = 0; c < 3; ++c) {
      const bool used = (c == 2) || three;
      if (!used) continue;
      v.v[c].resize(sys.steps + 1);
      for (int k = 0; k <= sys.steps; ++k) v.v[c][k] = random_interior(g, rng);
    }
    StackedState zero{VectorXd::Zero(g.interior_count()),
                      VectorXd::Zero(g.interior_count()),
                      VectorXd::Zero(g.interior_count())};
    StackedState phiT{random_interior(g, rng), random_interior(g, rng),
                      random_interior(g, rng)};
    const StackedState yT = solve_forward_linearized(sys, zero, &v);
    ControlBundle bs;
    solve_adjoint(sys, phiT, &bs);
    const double lhs =
        dot(g, yT.a, phiT.a) + dot(g, yT.b, phiT.b) + dot(g, yT.g, phiT.g);
    double rhs = 0.0;
    for (int c = 0; c < 3; ++c) {
      if (v.v[c].empty()) continue;
      for (int k = 0; k <= sys.steps; ++k)
        rhs += dot(g, v.v[c][k], bs.v[c][k]);
    }
    const double scale = std::abs(lhs) + std::abs(rhs) + 1e-30;
    CHECK(std::abs(lhs - rhs) / scale < 1e-12);
  }
}

TEST_CASE("around zero, the alpha output ignores the control entirely") {
  std::mt19937 rng(17);
  const Grid1D g = interval_grid(65);
  LinearizedSystem sys = smooth_system(g, 40, false);
  const int m = g.interior_count();
  // Linearization around zero: both coupling coefficients vanish.
  for (auto& v : sys.p) v.setZero();
  for (auto& v : sys.q) v.setZero();
  StackedState y0{random_interior(g, rng), random_interior(g, rng),
                  random_interior(g, rng)};
  ControlBundle v1, v2;
  v1.v[2].resize(sys.steps + 1);
  v2.v[2].resize(sys.steps + 1);
  for (int k = 0; k <= sys.steps; ++k) {
    v1.v[2][k] = random_interior(g, rng);
    v2.v[2][k] = 10.0 * random_interior(g, rng).cwiseAbs();
  }
  const StackedState r1 = solve_forward_linearized(sys, y0, &v1);
  const StackedState r2 = solve_forward_linearized(sys, y0, &v2);
  const StackedState free = solve_forward_linearized(sys, y0, nullptr);
  CHECK((r1.a - r2.a).cwiseAbs().maxCoeff() == 0.0);  // bit-identical
  CHECK((r1.a - free.a).cwiseAbs().maxCoeff() == 0.0);
  CHECK((r1.b - free.b).cwiseAbs().maxCoeff() == 0.0);
  CHECK((r1.g - r2.g).cwiseAbs().maxCoeff() > 0.0);  // gamma does respond
  (void)m;
}

TEST_CASE("perturbation solver reduces to the linearized one for small data") {
  std::mt19937 rng(19);
  const Grid1D g = interval_grid(41);
  LinearizedSystem sys = smooth_system(g, 25, true);
  std::vector<VectorXd> bbar(sys.steps + 1), gbar(sys.steps + 1);
  for (int k = 0; k <= sys.steps; ++k) {
    bbar[k] = VectorXd::Zero(g.interior_count());
    gbar[k] = VectorXd::Zero(g.interior_count());
  }
  const double s = 1e-5;
  StackedState y0{s * random_interior(g, rng), s * random_interior(g, rng),
                  s * random_interior(g, rng)};
  const StackedState lin = solve_forward_linearized(sys, y0, nullptr);
  const StackedState pert =
      solve_forward_perturbation(sys, bbar, gbar, y0, nullptr);
  const double diff = (lin.a - pert.a).cwiseAbs().maxCoeff() +
                      (lin.b - pert.b).cwiseAbs().maxCoeff() +
                      (lin.g - pert.g).cwiseAbs().maxCoeff();
  // Remainders are cubic in the state: difference O(s^3) against states O(s).
  CHECK(diff < 1e-13);

  // With nonzero background the quadratic remainder shows up at O(s^2).
  for (int k = 0; k <= sys.steps; ++k) bbar[k].setConstant(1.0);
  const StackedState pert2 =
      solve_forward_perturbation(sys, bbar, gbar, y0, nullptr);
  const double diff2 = (lin.a - pert2.a).cwiseAbs().maxCoeff();
  CHECK(diff2 > 1e-12);
  CHECK(diff2 < 1e-7);
}
