#pragma once

// Truncated Taylor-series scalar ("jet"): forward-mode differentiation to a
// fixed order through composed closed-form expressions. Nesting Jet<Jet<...>>
// gives mixed partials in several variables.

#include <array>
#include <cmath>
#include <cstddef>
#include <type_traits>

namespace casc {

inline double value_of(double x) { return x; }

template <class T, int K>
struct Jet {
    static_assert(K >= 0);
    using scalar_type = T;
    static constexpr int order = K;
    // c[k] holds f^(k)(x0) / k!
    std::array<T, K + 1> c{};

    Jet() {
        for (auto& v : c) v = T(0.0);
    }
    Jet(double v) : Jet() { c[0] = T(v); }  // NOLINT: implicit by design
    template <class U = T>
        requires(!std::is_same_v<U, double>)
    Jet(const T& v) : Jet() { c[0] = v; }  // NOLINT

    static Jet variable(const T& x0) {
        Jet j;
        j.c[0] = x0;
        if constexpr (K >= 1) j.c[1] = T(1.0);
        return j;
    }

    const T& coeff(int k) const { return c[static_cast<std::size_t>(k)]; }
    T& coeff(int k) { return c[static_cast<std::size_t>(k)]; }

    T deriv(int k) const {
        double fact = 1.0;
        for (int i = 2; i <= k; ++i) fact *= i;
        return c[static_cast<std::size_t>(k)] * fact;
    }

    Jet& operator+=(const Jet& o) {
        for (int k = 0; k <= K; ++k) c[k] += o.c[k];
        return *this;
    }
    Jet& operator-=(const Jet& o) {
        for (int k = 0; k <= K; ++k) c[k] -= o.c[k];
        return *this;
    }
    Jet operator-() const {
        Jet r;
        for (int k = 0; k <= K; ++k) r.c[k] = -c[k];
        return r;
    }
};

template <class T, int K>
double value_of(const Jet<T, K>& j) {
    return value_of(j.c[0]);
}

template <class T, int K>
Jet<T, K> operator+(Jet<T, K> a, const Jet<T, K>& b) { return a += b; }
template <class T, int K>
Jet<T, K> operator-(Jet<T, K> a, const Jet<T, K>& b) { return a -= b; }

template <class T, int K>
Jet<T, K> operator*(const Jet<T, K>& a, const Jet<T, K>& b) {
    Jet<T, K> r;
    for (int k = 0; k <= K; ++k) {
        T s(0.0);
        for (int j = 0; j <= k; ++j) s += a.c[j] * b.c[k - j];
        r.c[k] = s;
    }
    return r;
}

template <class T, int K>
Jet<T, K> operator/(const Jet<T, K>& a, const Jet<T, K>& b) {
    Jet<T, K> q;
    q.c[0] = a.c[0] / b.c[0];
    for (int k = 1; k <= K; ++k) {
        T s = a.c[k];
        for (int j = 1; j <= k; ++j) s -= b.c[j] * q.c[k - j];
        q.c[k] = s / b.c[0];
    }
    return q;
}

// double and T mix in freely.
template <class T, int K>
Jet<T, K> operator+(const Jet<T, K>& a, double s) { return a + Jet<T, K>(s); }
template <class T, int K>
Jet<T, K> operator+(double s, const Jet<T, K>& a) { return Jet<T, K>(s) + a; }
template <class T, int K>
Jet<T, K> operator-(const Jet<T, K>& a, double s) { return a - Jet<T, K>(s); }
template <class T, int K>
Jet<T, K> operator-(double s, const Jet<T, K>& a) { return Jet<T, K>(s) - a; }
template <class T, int K>
Jet<T, K> operator*(const Jet<T, K>& a, double s) {
    Jet<T, K> r;
    for (int k = 0; k <= K; ++k) r.c[k] = a.c[k] * s;
    return r;
}
template <class T, int K>
Jet<T, K> operator*(double s, const Jet<T, K>& a) { return a * s; }
template <class T, int K>
Jet<T, K> operator/(const Jet<T, K>& a, double s) { return a * (1.0 / s); }
template <class T, int K>
Jet<T, K> operator/(double s, const Jet<T, K>& a) { return Jet<T, K>(s) / a; }

template <class T, int K, class U>
    requires(!std::is_same_v<U, Jet<T, K>> && !std::is_same_v<U, double> &&
             std::is_same_v<U, T>)
Jet<T, K> operator*(const Jet<T, K>& a, const U& s) {
    Jet<T, K> r;
    for (int k = 0; k <= K; ++k) r.c[k] = a.c[k] * s;
    return r;
}
template <class T, int K, class U>
    requires(!std::is_same_v<U, Jet<T, K>> && !std::is_same_v<U, double> &&
             std::is_same_v<U, T>)
Jet<T, K> operator*(const U& s, const Jet<T, K>& a) {
    return a * s;
}

using std::exp;
using std::log;
using std::pow;

template <class T, int K>
Jet<T, K> exp(const Jet<T, K>& a) {
    Jet<T, K> f;
    f.c[0] = exp(a.c[0]);
    for (int k = 0; k < K; ++k) {
        T s(0.0);
        for (int j = 0; j <= k; ++j) s += (double(j) + 1.0) * a.c[j + 1] * f.c[k - j];
        f.c[k + 1] = s / (double(k) + 1.0);
    }
    return f;
}

template <class T, int K>
Jet<T, K> log(const Jet<T, K>& a) {
    Jet<T, K> g;
    g.c[0] = log(a.c[0]);
    for (int k = 1; k <= K; ++k) {
        T s = a.c[k] * double(k);
        for (int j = 1; j < k; ++j) s -= double(j) * g.c[j] * a.c[k - j];
        g.c[k] = s / (a.c[0] * double(k));
    }
    return g;
}

// a^p for real exponent p; requires value_of(a) > 0.
template <class T, int K>
Jet<T, K> pow(const Jet<T, K>& a, double p) {
    Jet<T, K> f;
    f.c[0] = pow(a.c[0], p);
    for (int k = 1; k <= K; ++k) {
        T s(0.0);
        for (int j = 1; j <= k; ++j)
            s += ((p + 1.0) * double(j) - double(k)) * a.c[j] * f.c[k - j];
        f.c[k] = s / (a.c[0] * double(k));
    }
    return f;
}

template <class T, int K>
Jet<T, K> pow(const Jet<T, K>& a, int n) {
    Jet<T, K> r(1.0);
    Jet<T, K> b = a;
    int m = n;
    if (m < 0) {
        b = Jet<T, K>(1.0) / a;
        m = -m;
    }
    while (m > 0) {
        if (m & 1) r = r * b;
        b = b * b;
        m >>= 1;
    }
    return r;
}

template <class T, int K>
Jet<T, K> sqrt(const Jet<T, K>& a) {
    return pow(a, 0.5);
}

// Signed cube root: sign(x)|x|^(1/3). Undefined jet at value 0 (callers use
// factored forms across roots).
inline double scbrt(double x) { return std::cbrt(x); }

template <class T, int K>
Jet<T, K> scbrt(const Jet<T, K>& a) {
    double s = value_of(a) < 0.0 ? -1.0 : 1.0;
    return s * pow(s * a, 1.0 / 3.0);
}

// d/dx of a jet as a jet one order lower conceptually; top coefficient is
// padded with zero, so use only when the lost order does not matter.
template <class T, int K>
Jet<T, K> deriv_jet(const Jet<T, K>& a) {
    Jet<T, K> r;
    for (int k = 0; k < K; ++k) r.c[k] = a.c[k + 1] * (double(k) + 1.0);
    r.c[K] = T(0.0);
    return r;
}

// Inner-variable derivative for nested jets: applies d/dt to every
// z-coefficient of a Jet<Jet<double,M>,K>.
template <class T, int K>
Jet<T, K> inner_deriv(const Jet<T, K>& a) {
    Jet<T, K> r;
    for (int k = 0; k <= K; ++k) r.c[k] = deriv_jet(a.c[k]);
    return r;
}

}  // namespace casc
