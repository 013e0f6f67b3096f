#pragma once

// Time-varying radial fields (a, b, c) supported on the shrinking lens
// |r| < eps*lambda(t), lambda(t) = (1-t^2)^2.  The field a is assembled from
// the stationary profile A plus window-localized corrections f_il(t) g_il(z)
// around each zero rho_l of C (plus a dedicated window at z = 1/2 where B
// vanishes).  The coefficients f_il are chosen, time slice by time slice, so
// that the chained cube roots
//   b = (a_t - a_rr - ((N-1)/r) a_r)^{1/3},
//   c = (b_t - b_rr - ((N-1)/r) b_r)^{1/3}
// are smooth: the quantity whose cube root defines c vanishes to exactly
// third order in z at each rho_l, uniformly in t.

#include <array>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "casc/jet.hpp"
#include "casc/piecewise.hpp"
#include "casc/stationary.hpp"

namespace casc {

// Taylor orders used for the space-time calculus: outer jets in z (enough for
// five z-derivatives of M with headroom), inner jets in t (enough for the
// first time derivatives that feed back into the coefficient solves).
inline constexpr int kTOrder = 6;
inline constexpr int kZOrder = 8;
using TJet = Jet<double, kTOrder>;
using ZTJet = Jet<TJet, kZOrder>;

// Trimmed orders for the value-grade fast evaluation path: order 2 in t (the
// chained cube roots consume one explicit time derivative of M, which itself
// carries one time derivative of the coefficient functions), order 7 in z
// (enough for nu up to its third z-derivative after the two derivative losses
// in assembling M).  Every quantity the field values consume sits in jet
// lanes that the trimmed arithmetic computes identically to the full-order
// arithmetic, so both paths agree to round-off.
using TJetLow = Jet<double, 2>;
using ZJetLow = Jet<TJetLow, 7>;

struct SpacetimeParams {
    StationaryParams stationary;
    double epsilon = 0.01;        // lens scale, in (0, 1]
    double max_half_width = 0.1;  // cap on window half-widths
    double gap_fraction = 0.45;   // usable fraction of the gap between windows
    double z_edge = 0.98;         // windows kept inside |z| <= z_edge
    double factored_fraction = 0.6;  // use the factored c form within this
                                     // fraction of a generic window
    int quad_nodes = 24;  // Gauss nodes for the Taylor-remainder integral

    void validate() const;  // throws std::invalid_argument
};

// Time weights lambda(t) = (1-t^2)^2 and f0(t) = e^{-1/(1-t^2)} (0 at |t|>=1),
// with jet evaluations for the nested calculus.
struct TimeWeights {
    static double lambda(double t);
    static double lambda_dot(double t);
    static double f0(double t);
    static TJet lambda_jet(double t);
    static TJet f0_jet(double t);
};

struct Window {
    double rho = 0.0;
    double half_width = 0.0;
    bool half_case = false;  // window around z = 1/2 (B vanishes there)
    // Radius of the core region around rho used for the factored form of c
    // and the sign diagnostics: inside the exactly-cubic zone of the zero
    // surgery (generic) or the plateau of the bumps (half case).
    double core_half_width = 0.0;
};

// Localized bump g_i(z) = (z-rho)^{k_i}/k_i! * plateau((z-rho)/half_width):
// exactly the Taylor monomial near rho, smoothly cut off inside the window.
struct JetBumps {
    Window window;
    std::array<int, 3> orders;  // k_1, k_2, k_3 (generic: 4,5,6; half: 2,3,4)

    PJet jet(int i, double z) const;   // z-jet of g_i at z (order kPieceOrder)
    double eval(int i, double z, int k = 0) const;
};
JetBumps build_jet_bumps(const Window& w);

// Solved coefficient functions of one window at one time, as t-jets.
struct WindowCoefficients {
    std::array<TJet, 3> f;
};

struct SpacetimeProfiles {
    SpacetimeParams params;
    StationaryProfiles stat;
    std::vector<Window> windows;  // sorted by rho; z > 0 half (fields even)
    std::vector<JetBumps> bumps;  // parallel to windows
    // Chebyshev-compiled copy of stat.A for the fast evaluation path (the
    // quadrature-backed original costs ~0.4 ms per call) and the cached jets
    // of stat.A at each window center, where the coefficient solves probe.
    PiecewiseAnalytic a_compiled;
    std::vector<PJet> a_jets_at_rho;  // parallel to windows

    // index of the window containing z, or -1
    int window_index(double z) const;

    // Coefficients f_{1..3} of window l at time t (memoized; solved by
    // imposing the triple-zero jet conditions order by order in t).
    const WindowCoefficients& coefficients(int l, double t) const;

    // Nested (z outer, t inner) jet of M at (t, z); f-corrections of the
    // window containing z are included automatically.
    ZTJet M_jet(double t, double z) const;

    // Nested jet of nu = M^{-2/3} (3 M_zz + K) (generic normalization; sign
    // handled through |M|^{-2/3} so both signs of B(rho) work).
    ZTJet nu_jet(double t, double z) const;

    // Field evaluations on R^2; exact zeros outside the lens.
    double eval_a(double t, double r) const;
    double eval_b(double t, double r) const;
    double eval_c(double t, double r) const;
    std::array<double, 3> eval_abc(double t, double r) const;

    // Value-grade fast path: identical formulas assembled with the trimmed
    // jet orders (ZJetLow) over the compiled stationary profile.  Orders of
    // magnitude cheaper per point; agrees with the full-order path to
    // round-off.  Used by the simulation layers.
    double eval_a_fast(double t, double r) const;
    double eval_b_fast(double t, double r) const;
    double eval_c_fast(double t, double r) const;
    std::array<double, 3> eval_abc_fast(double t, double r) const;
    // Window coefficients for the fast path: the full-order solve cropped to
    // the trimmed time order (the lanes the field values consume).
    const std::array<TJetLow, 3>& coefficients_fast(int l, double t) const;

    // c^3 at (t, z) from the nested jet of b (valid everywhere in the lens;
    // used outside generic windows and as a cross-check inside them).
    double c_cubed_direct(double t, double z) const;

  private:
    mutable std::map<std::pair<int, double>, WindowCoefficients> coeff_cache_;
    mutable std::map<std::pair<int, double>, std::array<TJetLow, 3>>
        fast_coeff_cache_;
    ZTJet M_jet_with(double t, double z, int l,
                     const std::array<TJet, 3>& f) const;
    ZTJet nu_jet_with(double t, double z, int l,
                      const std::array<TJet, 3>& f) const;
    friend SpacetimeProfiles build_spacetime(const SpacetimeParams&,
                                             StationaryProfiles);
};

SpacetimeProfiles build_spacetime(const SpacetimeParams& params);
SpacetimeProfiles build_spacetime(const SpacetimeParams& params,
                                  StationaryProfiles stat);

// Triple-zero diagnostics of one window over a grid of times.
struct TripleZeroReport {
    int window = -1;
    double max_nu = 0.0;      // max_t |nu(t, rho)|
    double max_nu_z = 0.0;    // max_t |nu_z(t, rho)|
    double max_nu_zz = 0.0;   // max_t |nu_zz(t, rho)|
    double min_abs_nu_zzz = 0.0;  // min_t |nu_zzz(t, rho)|
    // Sign normalization of the window: +1/-1 such that the fields can be
    // conjugated (a,b,c) -> (-a,-b,-c) to make nu_zzz positive; equals the
    // sign of C'(rho) for a generic window, +1 for the half window.
    double orientation = 0.0;
    double min_oriented = 0.0;    // min_t orientation * nu_zzz(t, rho)
    bool sign_constant = false;   // at each time, nu_zzz keeps one sign in z
                                  // across the core region of the window
    double scale = 0.0;           // typical |nu_zzz| for relative tolerances
    bool ok(double tol = 1e-8) const {
        return max_nu <= tol * scale && max_nu_z <= tol * scale &&
               max_nu_zz <= tol * scale && min_oriented > 0.0 && sign_constant;
    }
};
TripleZeroReport verify_triple_zero(const SpacetimeProfiles& p, int window,
                                    int t_samples = 21);

// Residuals of the defining identities b^3 = a_t - a_rr - ((N-1)/r) a_r and
// c^3 = b_t - b_rr - ((N-1)/r) b_r by high-order finite differences on a
// sample grid, at two steps, with the refinement slope.
struct FieldResidualReport {
    std::array<double, 3> grid_h{};          // steps h, h/2, h/4 (z units)
    std::array<double, 3> max_residual_b{};  // max | b^3 - (a_t - Delta_r a) |
    std::array<double, 3> max_residual_c{};  // max | c^3 - (b_t - Delta_r b) |
    double slope_b = 0.0, slope_c = 0.0;     // log2 decay per halving, h->h/4
    double field_scale_b = 0.0, field_scale_c = 0.0;
    bool even_ok = false;      // a, b, c even in r
    bool support_ok = false;   // zero outside the lens and at |t| >= 1
    bool seam_ok = false;      // factored and direct c agree at window seams
    bool nonzero_ok = false;   // some sample with b != 0 and c != 0
};
FieldResidualReport verify_field_residuals(const SpacetimeProfiles& p,
                                           int t_samples = 9,
                                           int z_samples = 24);

// Largest candidate epsilon for which every window check passes: |M| bounded
// away from zero with constant sign on generic windows, b of constant sign
// there, C of constant sign on the half window, and the triple-zero report
// green for every generic window.
double choose_epsilon(const SpacetimeParams& params,
                      const StationaryProfiles& stat,
                      const std::vector<double>& candidates = {0.05, 0.02, 0.01,
                                                               0.005});

void export_spacetime_csv(const SpacetimeProfiles& p, const std::string& path,
                          int t_samples = 41, int r_samples = 81);
void export_triple_zero_csv(const SpacetimeProfiles& p, const std::string& path,
                            int t_samples = 41);
void export_spacetime_json(const SpacetimeProfiles& p, const std::string& path);

}  // namespace casc
