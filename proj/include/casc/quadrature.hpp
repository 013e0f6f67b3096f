#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <utility>
#include <vector>

namespace casc {

// Gauss-Legendre nodes/weights on [-1,1], Newton on the recurrence.
inline const std::pair<std::vector<double>, std::vector<double>>&
gauss_legendre(int n) {
    static std::map<int, std::pair<std::vector<double>, std::vector<double>>> cache;
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;

    std::vector<double> x(n), w(n);
    for (int i = 0; i < n; ++i) {
        double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = t;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            double dp = n * (t * p1 - p0) / (t * t - 1.0);
            double dt = p1 / dp;
            t -= dt;
            if (std::abs(dt) < 1e-16) break;
        }
        double p0 = 1.0, p1 = t;
        for (int k = 2; k <= n; ++k) {
            double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        double dp = n * (t * p1 - p0) / (t * t - 1.0);
        x[i] = t;
        w[i] = 2.0 / ((1.0 - t * t) * dp * dp);
    }
    return cache.emplace(n, std::make_pair(std::move(x), std::move(w))).first->second;
}

template <class F>
double integrate_gl(const F& f, double a, double b, int n = 24) {
    const auto& [x, w] = gauss_legendre(n);
    double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += w[i] * f(mid + half * x[i]);
    return s * half;
}

namespace detail {
template <class F>
double adapt(const F& f, double a, double b, double tol, double whole, int depth) {
    double m = 0.5 * (a + b);
    double left = integrate_gl(f, a, m, 15);
    double right = integrate_gl(f, m, b, 15);
    double goal = tol + 1e-15 * (std::abs(left) + std::abs(right));
    if (depth <= 0 || std::abs(left + right - whole) <= goal)
        return left + right;
    return adapt(f, a, m, 0.5 * tol, left, depth - 1) +
           adapt(f, m, b, 0.5 * tol, right, depth - 1);
}
}  // namespace detail

template <class F>
double integrate_adaptive(const F& f, double a, double b, double tol = 1e-13,
                          int max_depth = 12) {
    if (a == b) return 0.0;
    return detail::adapt(f, a, b, tol, integrate_gl(f, a, b, 15), max_depth);
}

}  // namespace casc
