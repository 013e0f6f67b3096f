#include "casc/piecewise.hpp"

#include <array>
#include <cmath>
#include <memory>
#include <vector>

namespace casc {

namespace {

constexpr int kNodes = 33;  // interior Chebyshev nodes per segment
constexpr int kMaxDepth = 8;

struct Segment {
    double lo = 0.0, hi = 0.0;
    // coef[k] = Chebyshev coefficients of jet coefficient k on [lo, hi]
    std::array<std::array<double, kNodes>, kPieceOrder + 1> coef{};
};

double clenshaw(const std::array<double, kNodes>& c, double x) {
    double b1 = 0.0, b2 = 0.0;
    for (int k = kNodes - 1; k >= 1; --k) {
        double b0 = 2.0 * x * b1 - b2 + c[static_cast<std::size_t>(k)];
        b2 = b1;
        b1 = b0;
    }
    return x * b1 - b2 + c[0];
}

struct NodeTable {
    std::array<double, kNodes> x{};  // cos((2j+1) pi / (2n)), descending
    std::array<std::array<double, kNodes>, kNodes> cosk{};
    NodeTable() {
        for (int j = 0; j < kNodes; ++j) {
            double th = (2.0 * j + 1.0) * M_PI / (2.0 * kNodes);
            x[static_cast<std::size_t>(j)] = std::cos(th);
            for (int k = 0; k < kNodes; ++k)
                cosk[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] =
                    std::cos(k * th);
        }
    }
};

const NodeTable& nodes() {
    static const NodeTable t;
    return t;
}

Segment fit_segment(const PieceFn& fn, double lo, double hi) {
    const NodeTable& nt = nodes();
    Segment s;
    s.lo = lo;
    s.hi = hi;
    std::array<PJet, kNodes> y;
    for (int j = 0; j < kNodes; ++j) {
        double z = 0.5 * (lo + hi) +
                   0.5 * (hi - lo) * nt.x[static_cast<std::size_t>(j)];
        y[static_cast<std::size_t>(j)] = fn(z);
    }
    for (int k = 0; k <= kPieceOrder; ++k) {
        auto& row = s.coef[static_cast<std::size_t>(k)];
        for (int m = 0; m < kNodes; ++m) {
            double acc = 0.0;
            for (int j = 0; j < kNodes; ++j)
                acc += y[static_cast<std::size_t>(j)]
                           .c[static_cast<std::size_t>(k)] *
                       nt.cosk[static_cast<std::size_t>(m)]
                              [static_cast<std::size_t>(j)];
            row[static_cast<std::size_t>(m)] =
                (m == 0 ? 1.0 : 2.0) * acc / kNodes;
        }
    }
    return s;
}

// Converged when the trailing coefficients of every jet row are negligible
// against that row's scale (local, with a floor from the whole-piece scale so
// evaluation noise in tiny far-field segments does not force deep splits).
bool converged(const Segment& s, const std::array<double, kPieceOrder + 1>& top,
               double rel_tol) {
    for (int k = 0; k <= kPieceOrder; ++k) {
        const auto& row = s.coef[static_cast<std::size_t>(k)];
        double scale = 0.0, tail = 0.0;
        for (int m = 0; m < kNodes; ++m)
            scale = std::max(scale, std::abs(row[static_cast<std::size_t>(m)]));
        for (int m = kNodes - 3; m < kNodes; ++m)
            tail = std::max(tail, std::abs(row[static_cast<std::size_t>(m)]));
        double floor =
            std::max(rel_tol * scale,
                     1e-13 * top[static_cast<std::size_t>(k)]) +
            1e-300;
        if (tail > floor) return false;
    }
    return true;
}

void subdivide(const PieceFn& fn, double lo, double hi,
               const std::array<double, kPieceOrder + 1>& top, double rel_tol,
               int depth, std::vector<Segment>& out) {
    Segment s = fit_segment(fn, lo, hi);
    if (depth >= kMaxDepth || converged(s, top, rel_tol)) {
        out.push_back(std::move(s));
        return;
    }
    double mid = 0.5 * (lo + hi);
    subdivide(fn, lo, mid, top, rel_tol, depth + 1, out);
    subdivide(fn, mid, hi, top, rel_tol, depth + 1, out);
}

}  // namespace

PiecewiseAnalytic compile_piecewise(const PiecewiseAnalytic& f,
                                    double rel_tol) {
    PiecewiseAnalytic out;
    out.even = f.even;
    if (f.pieces.empty()) return out;

    std::vector<Segment> segs;
    for (std::size_t i = 0; i < f.pieces.size(); ++i) {
        double lo = f.breakpoints[i], hi = f.breakpoints[i + 1];
        Segment whole = fit_segment(f.pieces[i], lo, hi);
        std::array<double, kPieceOrder + 1> top{};
        for (int k = 0; k <= kPieceOrder; ++k)
            for (int m = 0; m < kNodes; ++m)
                top[static_cast<std::size_t>(k)] = std::max(
                    top[static_cast<std::size_t>(k)],
                    std::abs(whole.coef[static_cast<std::size_t>(k)]
                                       [static_cast<std::size_t>(m)]));
        subdivide(f.pieces[i], lo, hi, top, rel_tol, 0, segs);
    }

    out.breakpoints.reserve(segs.size() + 1);
    out.pieces.reserve(segs.size());
    out.breakpoints.push_back(segs.front().lo);
    for (auto& s : segs) {
        out.breakpoints.push_back(s.hi);
        auto sp = std::make_shared<Segment>(std::move(s));
        out.pieces.push_back([sp](double z) -> PJet {
            double x = (2.0 * z - sp->lo - sp->hi) / (sp->hi - sp->lo);
            x = std::clamp(x, -1.0, 1.0);
            PJet r;
            for (int k = 0; k <= kPieceOrder; ++k)
                r.c[static_cast<std::size_t>(k)] =
                    clenshaw(sp->coef[static_cast<std::size_t>(k)], x);
            return r;
        });
    }
    return out;
}

}  // namespace casc
