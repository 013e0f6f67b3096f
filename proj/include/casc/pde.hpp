#pragma once

// Time-stepping solvers for the coupled heat systems on radial / interval
// grids: semilinear forward cascade, linearized forward (with optional frozen
// extra sources), nonlinear "perturbation around a trajectory" forward, and
// the exact discrete transpose of the linearized forward map.
//
// Discretization: uniform grid, Dirichlet at the outer boundary (both ends for
// an interval), Crank-Nicolson on diffusion and on the linear coupling terms,
// Adams-Bashforth-2 on cubic terms.  Inner products carry the radial volume
// weight r^{N-1} dr (cell integrals), so the adjoint below is the transpose of
// the forward map with respect to the geometry's inner product.

#include <Eigen/Dense>

#include <array>
#include <functional>
#include <vector>

namespace casc {

struct Grid1D {
  enum class Kind { kRadialBall, kInterval };
  Kind kind = Kind::kInterval;
  int dim = 1;        // spatial dimension N; must be 1 for an interval
  double x_lo = 0.0;  // 0 for a ball
  double x_hi = 1.0;  // outer radius / right end
  int n = 65;         // node count including both end nodes

  double h() const { return (x_hi - x_lo) / (n - 1); }
  double node(int i) const { return x_lo + i * h(); }
  // The center node r=0 of a ball is interior (even symmetry); interval grids
  // have Dirichlet nodes at both ends.
  int first_interior() const { return kind == Kind::kRadialBall ? 0 : 1; }
  int interior_count() const { return n - 1 - first_interior(); }
  double interior_node(int j) const { return node(first_interior() + j); }
  // Cell integrals of r^{N-1} dr around each interior node (positive even at
  // the center node, where the cell is [0, h/2]).
  Eigen::VectorXd cell_weights() const;
};

// Weighted inner product / norms on interior-node vectors.
double dot(const Grid1D& g, const Eigen::VectorXd& a, const Eigen::VectorXd& b);
double norm(const Grid1D& g, const Eigen::VectorXd& a);

struct TriDiag {
  Eigen::VectorXd lower, diag, upper;  // lower[0] and upper[m-1] unused
  int size() const { return static_cast<int>(diag.size()); }
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  Eigen::VectorXd apply_transpose(const Eigen::VectorXd& x) const;
};

// Prefactored Thomas solver for a tridiagonal matrix and its transpose.
class TriSolver {
 public:
  TriSolver() = default;
  explicit TriSolver(const TriDiag& m);
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  Eigen::VectorXd solve_transpose(const Eigen::VectorXd& b) const;

 private:
  struct Factor {
    Eigen::VectorXd lower, cprime, denom;
    Eigen::VectorXd run(const Eigen::VectorXd& b) const;
  };
  Factor fwd_, trans_;
  static Factor factor(const TriDiag& m);
};

// Second-order discrete Laplacian u_rr + ((N-1)/r) u_r on interior nodes,
// Dirichlet outer boundary; at r=0 the even-symmetry limit N*u_rr(0) with a
// ghost-node reflection.
TriDiag build_laplacian(const Grid1D& g);

// Stencil application on a full nodal field (length n); boundary entries of
// the result are zero.  Convenience for residual checks and the differential
// control formulas.
Eigen::VectorXd apply_laplacian_full(const Grid1D& g,
                                     const Eigen::VectorXd& field);

// Full nodal state of the cascade at one time.
struct FieldState {
  double t = 0.0;
  Eigen::VectorXd alpha, beta, gamma;  // length n, end nodes exactly zero
};

// Interior-node triple used by the linear solvers.
struct StackedState {
  Eigen::VectorXd a, b, g;
};

Eigen::VectorXd restrict_interior(const Grid1D& g, const Eigen::VectorXd& full);
Eigen::VectorXd extend_full(const Grid1D& g, const Eigen::VectorXd& interior);

struct SemilinearOptions {
  int steps = 256;
  double blowup_bound = 1e6;
  // Called after every accepted step (and once for the initial state).
  std::function<void(const FieldState&)> observer;
};

// Cascade  alpha_t - L alpha = beta^3,  beta_t - L beta = gamma^3,
// gamma_t - L gamma = u,  integrated from y0.t to t_end.  `u` fills the
// interior-node source of the gamma equation (control already masked); pass
// nullptr for no control.  Throws on blow-up with the failure time.
FieldState solve_forward_semilinear(
    const Grid1D& g, const FieldState& y0,
    const std::function<void(double, Eigen::VectorXd&)>& u, double t_end,
    const SemilinearOptions& opt);

// Linearized cascade on a time window [t1, t2]:
//   a_t - L a = p(t) b   (+ v1 on the actuator in three-control mode)
//   b_t - L b = q(t) g   (+ v2 likewise)
//   g_t - L g = v3 on the actuator
// with p = 3*betabar^2, q = 3*gammabar^2 sampled on the time nodes.
struct LinearizedSystem {
  Grid1D grid;
  double t1 = 0.0, t2 = 1.0;
  int steps = 256;
  bool three_control = true;
  Eigen::VectorXd mask;                // interior nodes, actuator indicator
  std::vector<Eigen::VectorXd> p, q;   // steps+1 interior-node samples

  double dt() const { return (t2 - t1) / steps; }
  double time(int k) const { return t1 + k * dt(); }
};

// Controls sampled on the time nodes of a LinearizedSystem, interior-node
// vectors.  Component [0] acts on the alpha equation, [1] on beta, [2] on
// gamma; one-control mode reads only [2].
struct ControlBundle {
  std::array<std::vector<Eigen::VectorXd>, 3> v;
};

using ExtraSources = std::array<std::vector<Eigen::VectorXd>, 3>;

using StepObserver =
    std::function<void(int step, double t, const StackedState&)>;

// Forward linearized solve.  `v` and `extra` may be nullptr; `extra` adds
// unmasked per-equation sources (trapezoidal in time, like the controls).
StackedState solve_forward_linearized(const LinearizedSystem& sys,
                                      const StackedState& y0,
                                      const ControlBundle* v,
                                      const ExtraSources* extra = nullptr,
                                      const StepObserver& observer = {});

// Backward adjoint solve: the exact transpose of solve_forward_linearized
// with respect to the weighted inner products, so that
//   <forward(y0, 0) at t2, phiT> = <y0, adjoint(phiT) at t1>
// holds to round-off.  If `bstar` is non-null it receives the control-space
// image of phiT (the map dual to the control-to-terminal-state map), i.e. the
// gradient data used by HUM.
StackedState solve_adjoint(const LinearizedSystem& sys,
                           const StackedState& phi_t2, ControlBundle* bstar,
                           const StepObserver& observer = {});

// Nonlinear perturbation system around a trajectory (betabar, gammabar):
//   a_t - L a = p b + 3 betabar b^2 + b^3  (+ v1 ...)
//   b_t - L b = q g + 3 gammabar g^2 + g^3 (+ v2 ...)
//   g_t - L g = v3 on the actuator
// p, q are taken from `sys`; betabar/gammabar are sampled on the time nodes
// (interior).  The linear part is stepped exactly like
// solve_forward_linearized; only the quadratic/cubic remainders use AB2, so
// for vanishing remainders the two solvers agree bit for bit.  Throws on
// blow-up.
StackedState solve_forward_perturbation(
    const LinearizedSystem& sys, const std::vector<Eigen::VectorXd>& betabar,
    const std::vector<Eigen::VectorXd>& gammabar, const StackedState& y0,
    const ControlBundle* v, double blowup_bound = 1e6,
    const StepObserver& observer = {});

}  // namespace casc
