#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace seqdet {

/*
 * Adaptive 1-D quadrature built on the Gauss-Kronrod 7/15 pair
 * (QUADPACK abscissae), with bisection driven by the |K15 - G7|
 * error estimate down to an absolute tolerance.
 */

namespace detail {

// Kronrod-15 abscissae (positive half) and weights; Gauss-7 weights.
inline constexpr double kGk15X[8] = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000};
inline constexpr double kGk15Wk[8] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714};
inline constexpr double kGk15Wg[4] = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327};

template <class F>
inline void gk15(const F& f, double a, double b, double& result, double& err) {
    const double c = 0.5 * (a + b);
    const double hw = 0.5 * (b - a);
    double fv[15];
    for (int i = 0; i < 7; ++i) {
        fv[i] = f(c - hw * kGk15X[i]);
        fv[14 - i] = f(c + hw * kGk15X[i]);
    }
    fv[7] = f(c);
    double resk = kGk15Wk[7] * fv[7];
    double resg = kGk15Wg[3] * fv[7];
    for (int i = 0; i < 7; ++i) {
        resk += kGk15Wk[i] * (fv[i] + fv[14 - i]);
        if (i % 2 == 1) resg += kGk15Wg[i / 2] * (fv[i] + fv[14 - i]);
    }
    result = resk * hw;
    err = std::abs((resk - resg) * hw);
}

template <class F>
inline double adapt(const F& f, double a, double b, double tol, int depth) {
    double r, e;
    gk15(f, a, b, r, e);
    if (e <= tol || depth >= 48 || b - a < 1e-14 * (1.0 + std::abs(a))) return r;
    const double c = 0.5 * (a + b);
    return adapt(f, a, c, 0.5 * tol, depth + 1) + adapt(f, c, b, 0.5 * tol, depth + 1);
}

}  // namespace detail

/// Integrate f over [a, b] to absolute tolerance.
template <class F>
inline double integrate(const F& f, double a, double b, double abs_tol = 1e-10) {
    if (!(b >= a)) throw std::invalid_argument("integrate: b < a");
    if (a == b) return 0.0;
    return detail::adapt(f, a, b, abs_tol, 0);
}

/*
 * Integrate f over [a, inf). Panels of doubling width are appended until
 * two consecutive panel contributions fall below the truncation floor,
 * which tracks the accumulated magnitude (tail cut where the integrand
 * is negligible, < ~1e-14 of scale).
 */
template <class F>
inline double integrate_to_infinity(const F& f, double a, double abs_tol = 1e-10,
                                    double first_width = 4.0) {
    double total = 0.0;
    double lo = a;
    double width = first_width;
    int quiet = 0;
    for (int panel = 0; panel < 64; ++panel) {
        const double hi = lo + width;
        const double part = integrate(f, lo, hi, abs_tol * 0.25);
        total += part;
        const double floor_ = 1e-14 * (1.0 + std::abs(total)) + 1e-300;
        quiet = (std::abs(part) < floor_) ? quiet + 1 : 0;
        if (quiet >= 2) return total;
        lo = hi;
        width *= 2.0;
    }
    throw std::runtime_error("integrate_to_infinity: tail did not become negligible");
}

/// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration on P_n.
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: n < 1");
    x.assign(static_cast<std::size_t>(n), 0.0);
    w.assign(static_cast<std::size_t>(n), 0.0);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double z = std::cos(3.14159265358979323846 * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = 1.0, p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
            }
            pp = n * (z * p1 - p2) / (z * z - 1.0);
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) < 1e-15) break;
        }
        x[static_cast<std::size_t>(i)] = -z;
        x[static_cast<std::size_t>(n - 1 - i)] = z;
        w[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[static_cast<std::size_t>(n - 1 - i)] = w[static_cast<std::size_t>(i)];
    }
}

}  // namespace seqdet
