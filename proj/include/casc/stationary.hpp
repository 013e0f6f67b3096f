#pragma once

// Radial stationary profiles (A, B, C): a compactly supported even triple on
// [-1,1] with
//   -A'' - ((N-1)/z) A' = B^3,   -B'' - ((N-1)/z) B' = C^3,
// built from a piecewise source G tuned so that A extends smoothly to the
// whole ball, plus a local surgery that turns degenerate zeros of C into
// simple ones.

#include <string>
#include <vector>

#include "casc/piecewise.hpp"

namespace casc {

struct StationaryParams {
    int N = 3;
    double delta = 0.1;     // half-width of the inner/middle frozen windows
    double delta_A = 0.03;  // width of the outer frozen window (1-delta_A, 1)
    // Cubic coefficient of the rebuilt source at each zero of C; the local
    // slope is |C'| = amp^(1/3).  Large by design: the third z-derivative of
    // the smoothness certificate nu at a zero is 54 f0^(1/3) amp plus a
    // time-odd correction of size O(eps^2) with large profile-dependent
    // constants, and the amplitude must dominate that correction so the sign
    // of nu_zzz is uniform in time.
    double repair_amplitude = 5e4;
    double quadrature_tol = 1e-12;
    double kappa_lo = -1e7;
    double kappa_hi = 1e7;
    int kappa_max_iter = 200;

    void validate() const;  // throws std::invalid_argument
};

struct CZero {
    double rho = 0.0;
    double c_prime = 0.0;  // local dC/dz estimate
    bool degenerate = false;
    double repair_eta = 0.0;  // half-width of the surgery interval (0: none)
};

struct StationaryProfiles {
    StationaryParams params;
    PiecewiseAnalytic A, B, C;
    PiecewiseAnalytic G;  // tuned source, B = -G^{1/3}
    double kappa_star = 0.0;
    double c0 = 0.0;  // A(0)
    std::vector<CZero> rho_list;
};

enum class RepairMode { kSignChange, kSameSign };

PiecewiseAnalytic build_base_G(const StationaryParams& params);
PiecewiseAnalytic apply_kappa_bumps(const PiecewiseAnalytic& gbar,
                                    const StationaryParams& params, double kappa);
// Integral of s^{N-1} f(s) over [0,1], piece by piece.
double radial_moment(const PiecewiseAnalytic& f, int N, double tol = 1e-14);
double tune_kappa(const StationaryParams& params);
PiecewiseAnalytic integrate_A(const PiecewiseAnalytic& g, const StationaryParams& params,
                              double* c0_out = nullptr);
PiecewiseAnalytic derive_B(const PiecewiseAnalytic& g, const StationaryParams& params);
PiecewiseAnalytic derive_C(const PiecewiseAnalytic& b, const StationaryParams& params);
std::vector<CZero> find_c_zeros(const PiecewiseAnalytic& c, const StationaryParams& params);

// Local surgery on B (and its antiderivative profile A) over
// [zeta-eta, zeta+eta]: replaces the cube source B'' + ((N-1)/z) B' by a
// blended one equal to +-amp (z-zeta)^3 near zeta, so its cube root is smooth
// and exactly linear through the zero, while matching (B, B', A, A') data at
// both interval ends via a damped Newton solve over a fixed 4-dimensional
// bump family.
struct RepairResult {
    PiecewiseAnalytic B;          // repaired profile
    PiecewiseAnalytic A;          // profile one level up, with its correction
    double epsilon = 0.0;         // blend scale actually used
    double slope = 0.0;           // |C'| at the rebuilt zero, amp^(1/3)
    std::vector<double> xi;       // bump coefficients found by Newton
    double endpoint_residual = 0.0;
};
RepairResult repair_zero(const PiecewiseAnalytic& b, const PiecewiseAnalytic& a,
                         const StationaryParams& params, double zeta, double eta,
                         RepairMode mode);

struct StationaryReport {
    std::vector<double> grid_h;
    std::vector<double> residual_A;  // max | -A''_h - ((N-1)/z)A'_h - B^3 |
    std::vector<double> residual_B;  // max | -B''_h - ((N-1)/z)B'_h - C^3 |
    double slope_A = 0.0;
    double slope_B = 0.0;
    bool even_ok = false;
    bool support_ok = false;
    bool sign_ok = false;       // (z-1/2) G > 0 off the zeros
    bool cube_ok = false;       // B^3 + G = 0 pointwise
    bool b_half_zero = false;   // B(1/2) = 0
    bool b_slope_neg = false;   // B'(1/2) < 0
    bool zeros_simple = false;  // every C zero has |C'| > 0
    double kappa_integral = 0.0;
    bool all_ok() const {
        return even_ok && support_ok && sign_ok && cube_ok && b_half_zero &&
               b_slope_neg && zeros_simple && slope_A >= 1.8 && slope_B >= 1.8;
    }
};
StationaryReport verify_stationary(const StationaryProfiles& p);

StationaryProfiles build_stationary(const StationaryParams& params);

void export_stationary_csv(const StationaryProfiles& p, const std::string& path,
                           int samples = 801);
void export_stationary_json(const StationaryProfiles& p, const std::string& path);

}  // namespace casc
