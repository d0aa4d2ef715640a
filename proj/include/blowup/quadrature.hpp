#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace blowup::quad {

// 7-point Gauss / 15-point Kronrod abscissae and weights on [-1, 1].
inline constexpr std::array<double, 8> kronrod_x = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kronrod_w = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> gauss7_w = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Estimate {
    double value = 0.0;
    double error = 0.0;
};

/// One G7K15 panel on [a, b].
template <class Fn>
Estimate gk15(Fn&& fn, double a, double b) {
    const double c = 0.5 * (a + b);
    const double r = 0.5 * (b - a);
    const double fc = fn(c);
    double k = fc * kronrod_w[7];
    double g = fc * gauss7_w[3];
    for (std::size_t j = 0; j < 7; ++j) {
        const double dx = r * kronrod_x[j];
        const double s = fn(c - dx) + fn(c + dx);
        k += kronrod_w[j] * s;
        if (j % 2 == 1) g += gauss7_w[j / 2] * s;
    }
    return {k * r, std::abs((k - g) * r)};
}

/// Recursive adaptive G7K15 with absolute/relative stopping and a depth cap.
template <class Fn>
Estimate adaptive(Fn&& fn, double a, double b, double abs_tol, double rel_tol, int depth = 40) {
    const Estimate whole = gk15(fn, a, b);
    if (depth <= 0 || whole.error <= std::max(abs_tol, rel_tol * std::abs(whole.value)) ||
        std::abs(b - a) <= 1e-14 * std::max(std::abs(a), std::abs(b))) {
        return whole;
    }
    const double m = 0.5 * (a + b);
    const Estimate left = adaptive(fn, a, m, 0.5 * abs_tol, rel_tol, depth - 1);
    const Estimate right = adaptive(fn, m, b, 0.5 * abs_tol, rel_tol, depth - 1);
    return {left.value + right.value, left.error + right.error};
}

// 5-point Gauss-Legendre on [-1, 1].
inline constexpr std::array<double, 5> gl5_x = {-0.906179845938663992797626878299393, -0.538469310105683091036314420700208,
                                                0.0, 0.538469310105683091036314420700208,
                                                0.906179845938663992797626878299393};
inline constexpr std::array<double, 5> gl5_w = {0.236926885056189087514264040719918, 0.478628670499366468041982126619638,
                                                0.568888888888888888888888888888889, 0.478628670499366468041982126619638,
                                                0.236926885056189087514264040719918};

/// Composite 5-point Gauss-Legendre with `panels` equal panels.
template <class Fn>
double gauss_legendre(Fn&& fn, double a, double b, int panels = 1) {
    const double w = (b - a) / panels;
    double sum = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double c = a + (p + 0.5) * w;
        double s = 0.0;
        for (std::size_t j = 0; j < 5; ++j) s += gl5_w[j] * fn(c + 0.5 * w * gl5_x[j]);
        sum += 0.5 * w * s;
    }
    return sum;
}

} // namespace blowup::quad
