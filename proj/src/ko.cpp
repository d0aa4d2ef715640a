#include "blowup/error.hpp"
#include "blowup/nonlinearity.hpp"
#include "blowup/quadrature.hpp"

#include <cmath>
#include <limits>

namespace blowup {

namespace {

// Cumulative antiderivative G(s) = int_a^s f, advanced segment by segment.
class CumulativeIntegral {
public:
    CumulativeIntegral(const ScalarFn& f, double a) : f_(f), anchor_(a) {}

    double from_anchor(double s) const {
        if (s <= anchor_) return value_;
        return value_ + quad::adaptive(f_, anchor_, s, 0.0, 1e-12).value;
    }

    void advance(double s) {
        value_ = from_anchor(s);
        anchor_ = s;
    }

    double anchor() const { return anchor_; }
    double value() const { return value_; }

private:
    const ScalarFn& f_;
    double anchor_;
    double value_ = 0.0;
};

} // namespace

KoVerdict ko_integral(const ScalarFn& profile, double a, double tail_bound, double tol, const KoOptions& opts) {
    if (!(a > 0.0)) throw PreconditionError("ko_integral: lower endpoint must be positive");
    if (!(tol > 0.0)) throw PreconditionError("ko_integral: tolerance must be positive");

    KoVerdict out;
    out.a_requested = a;

    // Shift a past any region where the profile vanishes (F flat above a).
    double start = a;
    int probes = 0;
    while (!(profile(start) > 0.0)) {
        if (++probes > opts.max_doublings) {
            out.a = a;
            out.verdict = KoOutcome::diverges;
            out.degenerate = true;
            return out;
        }
        start *= 2.0;
    }
    out.a = start;
    out.a_shifted = start != a;

    const double lo = start;
    CumulativeIntegral G(profile, lo);
    double T = std::max(tail_bound, 2.0 * lo);

    double integral = 0.0;
    double prev_estimate = std::numeric_limits<double>::quiet_NaN();
    int stable = 0;
    int nonintegrable = 0;

    for (int k = 0; k <= opts.max_doublings; ++k) {
        const double s_lo = G.anchor();
        const double s_hi = T;
        const double t_lo = std::sqrt(s_lo - lo);
        const double t_hi = std::sqrt(s_hi - lo);
        // s = a + t^2 removes the inverse square root singularity at s = a.
        auto integrand = [&](double t) {
            const double s = lo + t * t;
            const double gs = G.from_anchor(s);
            return gs > 0.0 ? 2.0 * t / std::sqrt(gs) : 0.0;
        };
        const double g_lo = G.value();
        integral += quad::adaptive(integrand, t_lo, t_hi, 0.0, 1e-10).value;
        G.advance(s_hi);
        const double g_hi = G.value();

        out.truncation = T;
        out.partial_integral = integral;
        out.doublings = k;
        if (!std::isfinite(g_hi) || !std::isfinite(integral)) break;

        if (k >= 1 && g_lo > 0.0) {
            // Integrand 1/sqrt(G) ~ s^(-q) fitted on [T/2, T].
            const double q = 0.5 * std::log2(g_hi / g_lo);
            out.tail_exponent = q;
            if (q > 1.0 + opts.exponent_margin) {
                nonintegrable = 0;
                const double tail = T / std::sqrt(g_hi) / (q - 1.0);
                const double estimate = integral + tail;
                if (std::isfinite(prev_estimate) && std::abs(estimate - prev_estimate) <= tol * std::abs(estimate)) {
                    ++stable;
                } else {
                    stable = 0;
                }
                prev_estimate = estimate;
                if (stable >= opts.stable_streak) {
                    out.verdict = KoOutcome::converges;
                    out.integral_estimate = estimate;
                    return out;
                }
            } else {
                stable = 0;
                prev_estimate = std::numeric_limits<double>::quiet_NaN();
                if (++nonintegrable >= opts.divergence_streak) {
                    out.verdict = KoOutcome::diverges;
                    return out;
                }
            }
        }
        T *= 2.0;
    }
    out.verdict = KoOutcome::inconclusive;
    return out;
}

} // namespace blowup
