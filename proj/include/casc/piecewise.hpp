#pragma once

// Function on [0, z_max) stored as ordered closed-form pieces. Each piece
// evaluator returns the full derivative jet at a point; even extension
// reflects evaluation through |z| and is exact by construction.

#include <algorithm>
#include <functional>
#include <stdexcept>
#include <vector>

#include "casc/jet.hpp"

namespace casc {

inline constexpr int kPieceOrder = 10;
using PJet = Jet<double, kPieceOrder>;
using PieceFn = std::function<PJet(double)>;

struct PiecewiseAnalytic {
    std::vector<double> breakpoints;  // pieces.size()+1 ascending abscissae
    std::vector<PieceFn> pieces;      // piece i lives on [b_i, b_{i+1})
    bool even = true;

    int piece_index(double z) const {
        if (breakpoints.empty() || z < breakpoints.front() || z >= breakpoints.back())
            return -1;
        auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), z);
        return static_cast<int>(it - breakpoints.begin()) - 1;
    }

    PJet jet(double z) const {
        bool flip = false;
        if (even && z < 0.0) {
            z = -z;
            flip = true;
        }
        int i = piece_index(z);
        PJet r;
        if (i >= 0) r = pieces[static_cast<std::size_t>(i)](z);
        if (flip)
            for (int k = 1; k <= kPieceOrder; k += 2) r.c[k] = -r.c[k];
        return r;
    }

    double eval(double z, int k = 0) const {
        if (k > kPieceOrder) throw std::out_of_range("derivative order beyond stored jet");
        return jet(z).deriv(k);
    }

    double operator()(double z) const { return jet(z).c[0]; }
};

// Chebyshev-compiled copy: every jet coefficient of every piece is sampled on
// adaptively subdivided Chebyshev grids and replayed by Clenshaw recurrences.
// Trades a one-time sampling pass for orders-of-magnitude cheaper calls when
// the original pieces are expensive (e.g. quadrature-backed antiderivatives).
// Accuracy is limited by rel_tol and by any evaluation noise in the source.
PiecewiseAnalytic compile_piecewise(const PiecewiseAnalytic& f,
                                    double rel_tol = 1e-12);

}  // namespace casc
