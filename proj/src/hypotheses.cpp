#include "blowup/error.hpp"
#include "blowup/nonlinearity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace blowup {

namespace {

double tolerance(double a, double b) { return 1e-12 * std::max({1.0, std::abs(a), std::abs(b)}); }

// Keeps the worst sample; a violation is a margin below -tolerance.
struct Tally {
    HypothesisReport report;

    void record(double margin, double tol, const Witness& w) {
        if (margin < report.worst_margin) {
            report.worst_margin = margin;
            if (margin < -tol) report.witness = w;
        }
        if (margin < -tol) report.holds = false;
    }
};

} // namespace

HypothesisReport check_complete_decay(const NonlinearitySpec& spec, std::span<const double> d_grid,
                                      std::span<const double> eps_grid, std::span<const double> r_grid,
                                      std::span<const double> ell_grid, DistanceShift shift) {
    if (d_grid.empty() || eps_grid.empty()) throw PreconditionError("check_complete_decay: empty sample grid");
    Tally t;
    t.report.sample_counts = {d_grid.size(), eps_grid.size(), r_grid.size(), ell_grid.size()};
    auto shifted = [shift](double d, double eps) { return shift == DistanceShift::toward_boundary ? d - eps : d + eps; };

    if (spec.kind != NonlinearityKind::general) {
        // Separable reaction: the condition is exactly decay of the weight.
        t.report.hypothesis = Hypothesis::weight_decay;
        for (const double d : d_grid) {
            for (const double eps : eps_grid) {
                const double ds = shifted(d, eps);
                if (ds < 0.0) {
                    ++t.report.skipped;
                    continue;
                }
                const double w = spec.weight_at(d);
                const double ws = spec.weight_at(ds);
                const double margin = std::min(w - ws, ws);
                t.record(margin, tolerance(w, ws), Witness{d, 0.0, 0.0, eps, w, ws});
            }
        }
        return t.report;
    }

    if (r_grid.empty() || ell_grid.empty()) throw PreconditionError("check_complete_decay: empty value grid");
    t.report.hypothesis = Hypothesis::complete_decay;
    for (const double d : d_grid) {
        for (const double eps : eps_grid) {
            const double ds = shifted(d, eps);
            if (ds < 0.0) {
                ++t.report.skipped;
                continue;
            }
            for (const double ell : ell_grid) {
                const double base = eval_f(spec, d, ell) - eval_f(spec, ds, ell);
                for (const double r : r_grid) {
                    const double upper = eval_f(spec, d, ell + r) - eval_f(spec, ds, ell + r);
                    const double margin = std::min(upper - base, base);
                    t.record(margin, tolerance(upper, base), Witness{d, r, ell, eps, upper, base});
                }
            }
        }
    }
    return t.report;
}

HypothesisReport check_superadditivity(const NonlinearitySpec& spec, double C, const SuperadditivityGrid& grid) {
    if (grid.u.empty() || grid.ell.empty()) throw PreconditionError("check_superadditivity: empty sample grid");
    if (!(C >= 0.0)) throw PreconditionError("check_superadditivity: C must be nonnegative");
    const std::vector<double> ds = grid.d.empty() ? std::vector<double>{0.0} : grid.d;
    Tally t;
    t.report.hypothesis = Hypothesis::superadditivity;
    t.report.sample_counts = {grid.u.size(), grid.ell.size(), ds.size()};
    for (const double d : ds) {
        for (const double u : grid.u) {
            const double fu = eval_f(spec, d, u);
            for (const double ell : grid.ell) {
                const double lhs = eval_f(spec, d, u + ell);
                const double rhs = fu + eval_f(spec, d, ell) - C;
                t.record(lhs - rhs, tolerance(lhs, rhs), Witness{d, u, ell, 0.0, lhs, rhs});
            }
        }
    }
    return t.report;
}

Gauge identity_gauge() {
    return {[](double r) { return r; }, [](double) { return 1.0; }, "identity"};
}

Gauge log1p_gauge() {
    return {[](double r) { return std::log1p(r); }, [](double r) { return 1.0 / (1.0 + r); }, "log1p"};
}

HypothesisReport check_phi_condition(const NonlinearitySpec& spec, const Gauge& phi, double eps,
                                     std::span<const double> r_grid, std::span<const double> d_grid) {
    if (!(eps > 0.0)) throw PreconditionError("check_phi_condition: eps must be positive");
    if (r_grid.empty()) throw PreconditionError("check_phi_condition: empty r grid");
    const std::vector<double> ds = d_grid.empty() ? std::vector<double>{0.0}
                                                  : std::vector<double>(d_grid.begin(), d_grid.end());

    double step = std::numeric_limits<double>::infinity();
    {
        std::vector<double> sorted(r_grid.begin(), r_grid.end());
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 1; i < sorted.size(); ++i)
            if (sorted[i] > sorted[i - 1]) step = std::min(step, sorted[i] - sorted[i - 1]);
        step = std::isfinite(step) ? step / 8.0 : 1e-6 * std::max(1.0, std::abs(sorted.front()));
    }
    auto dphi = [&](double r) {
        if (phi.derivative) return phi.derivative(r);
        if (r - step < 0.0) return (phi.phi(r + step) - phi.phi(r)) / step;
        return (phi.phi(r + step) - phi.phi(r - step)) / (2.0 * step);
    };

    Tally t;
    t.report.hypothesis = Hypothesis::phi_condition;
    t.report.sample_counts = {r_grid.size(), ds.size()};
    std::size_t evaluated = 0;
    for (const double d : ds) {
        for (const double r : r_grid) {
            const double fr = eval_f(spec, d, r);
            if (!(fr > 0.0)) {
                ++t.report.skipped;
                continue;
            }
            ++evaluated;
            const double lhs = eval_f(spec, d, r + eps * phi.phi(r)) / fr;
            const double rhs = 1.0 + eps * dphi(r);
            t.record(lhs - rhs, tolerance(lhs, rhs), Witness{d, r, 0.0, eps, lhs, rhs});
        }
    }
    t.report.inconclusive = evaluated == 0;
    return t.report;
}

HypothesisReport check_ratio_monotone(const NonlinearitySpec& spec, std::span<const double> r_grid,
                                      std::span<const double> d_grid) {
    for (std::size_t i = 0; i < r_grid.size(); ++i) {
        if (!(r_grid[i] > 0.0) || (i > 0 && !(r_grid[i] > r_grid[i - 1])))
            throw PreconditionError("check_ratio_monotone: r grid must be strictly positive and ascending");
    }
    const std::vector<double> ds = d_grid.empty() ? std::vector<double>{0.0}
                                                  : std::vector<double>(d_grid.begin(), d_grid.end());
    Tally t;
    t.report.hypothesis = Hypothesis::ratio_monotone;
    t.report.sample_counts = {r_grid.size(), ds.size()};
    for (const double d : ds) {
        for (std::size_t i = 1; i < r_grid.size(); ++i) {
            const double prev = eval_f(spec, d, r_grid[i - 1]) / r_grid[i - 1];
            const double cur = eval_f(spec, d, r_grid[i]) / r_grid[i];
            // Witness convention: r is the later sample, ell the earlier one.
            t.record(cur - prev, tolerance(cur, prev), Witness{d, r_grid[i], r_grid[i - 1], 0.0, cur, prev});
        }
    }
    return t.report;
}

} // namespace blowup
