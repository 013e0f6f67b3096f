#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "casc/jet.hpp"

using casc::Jet;

namespace {

// Independent oracle: central finite differences of a scalar function for
// low derivative orders (second-order accurate; callers Richardson-refine).
template <class F>
double fd_deriv_raw(const F& f, double x, int order, double h) {
    switch (order) {
        case 0: return f(x);
        case 1: return (f(x + h) - f(x - h)) / (2 * h);
        case 2: return (f(x + h) - 2 * f(x) + f(x - h)) / (h * h);
        case 3:
            return (f(x + 2 * h) - 2 * f(x + h) + 2 * f(x - h) - f(x - 2 * h)) /
                   (2 * h * h * h);
        default: return 0.0;
    }
}

// Richardson extrapolation of the second-order stencils: error O(h^4).
template <class F>
double fd_deriv(const F& f, double x, int order, double h) {
    double coarse = fd_deriv_raw(f, x, order, h);
    double fine = fd_deriv_raw(f, x, order, h / 2);
    return (4.0 * fine - coarse) / 3.0;
}

}  // namespace

TEST_CASE("jet arithmetic matches finite differences on a composed expression") {
    auto expr = [](auto z) {
        return exp(-1.0 / (1.0 + z * z)) * pow(2.0 + z, 1.0 / 3.0) - log(3.0 + z) / (1.5 - z);
    };
    for (double x : {-0.7, -0.1, 0.3, 0.9}) {
        auto j = expr(Jet<double, 6>::variable(x));
        for (int k = 0; k <= 3; ++k) {
            double h = k <= 1 ? 1e-5 : 1e-3;
            double ref = fd_deriv([&](double t) { return expr(Jet<double, 0>(t)).c[0]; },
                                  x, k, h);
            CHECK(j.deriv(k) == doctest::Approx(ref).epsilon(1e-6));
        }
    }
}

TEST_CASE("series division and integer powers are exact inverses") {
    auto z = Jet<double, 8>::variable(0.37);
    auto a = 1.0 + z * z - 0.5 * z;
    auto one = a / a;
    CHECK(one.c[0] == doctest::Approx(1.0));
    for (int k = 1; k <= 8; ++k) CHECK(std::abs(one.c[k]) < 1e-14);
    auto p = pow(a, 3) * pow(a, -3);
    for (int k = 1; k <= 8; ++k) CHECK(std::abs(p.c[k]) < 1e-13);
}

TEST_CASE("exp/log round trip keeps all stored orders") {
    auto z = Jet<double, 10>::variable(0.2);
    auto a = 0.8 + z - 0.3 * z * z;
    auto r = exp(log(a));
    for (int k = 0; k <= 10; ++k) CHECK(r.c[k] == doctest::Approx(a.c[k]).epsilon(1e-12));
}

TEST_CASE("signed cube root cubes back to the argument") {
    for (double x : {-2.0, -0.3, 0.4, 5.0}) {
        auto z = Jet<double, 7>::variable(x);
        auto a = z * z * z - 0.25 * z + (x < 0 ? -1.0 : 1.0);
        if (casc::value_of(a) == 0.0) continue;
        auto c = scbrt(a);
        auto back = c * c * c;
        for (int k = 0; k <= 7; ++k)
            CHECK(back.c[k] == doctest::Approx(a.c[k]).epsilon(1e-10));
    }
}

TEST_CASE("nested jets expose mixed partial derivatives") {
    using TJ = Jet<double, 3>;
    using ZJ = Jet<TJ, 3>;
    double t0 = 0.4, z0 = 0.7;
    // f(t,z) = exp(t z) * (1 + z^2)
    auto f = [](auto t, auto z) { return exp(t * z) * (1.0 + z * z); };
    ZJ z = ZJ::variable(TJ(z0));
    TJ t = TJ::variable(t0);
    ZJ val = f(ZJ(t), z);
    // d^2/dz dt at (t0,z0): analytic = e^{tz}(1+z^2)(... ) compare with FD
    auto scalar = [&](double tt, double zz) { return std::exp(tt * zz) * (1 + zz * zz); };
    double h = 1e-3;
    auto mixed = [&](double hh) {
        return (scalar(t0 + hh, z0 + hh) - scalar(t0 + hh, z0 - hh) -
                scalar(t0 - hh, z0 + hh) + scalar(t0 - hh, z0 - hh)) /
               (4 * hh * hh);
    };
    double fd_tz = (4.0 * mixed(h / 2) - mixed(h)) / 3.0;
    double jet_tz = val.c[1].c[1];  // coefficient of dz^1 dt^1
    CHECK(jet_tz == doctest::Approx(fd_tz).epsilon(1e-8));

    // inner_deriv applies d/dt to each z-coefficient
    ZJ ft = casc::inner_deriv(val);
    auto dt_at = [&](double hh) {
        return (scalar(t0 + hh, z0) - scalar(t0 - hh, z0)) / (2 * hh);
    };
    double fd_t = (4.0 * dt_at(h / 2) - dt_at(h)) / 3.0;
    CHECK(casc::value_of(ft) == doctest::Approx(fd_t).epsilon(1e-9));
}
