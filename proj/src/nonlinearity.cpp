#include "blowup/nonlinearity.hpp"

#include "blowup/error.hpp"
#include "blowup/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace blowup {

double NonlinearitySpec::profile_at(double r) const {
    if (kind == NonlinearityKind::general) return reaction(0.0, r);
    return profile(r);
}

double NonlinearitySpec::weight_at(double d) const { return weight ? weight(d) : 1.0; }

double eval_f(const NonlinearitySpec& spec, double d, double r) {
    if (!(r >= 0.0)) throw RangeError("r", r, "reaction evaluated at a negative value");
    if (!(d >= 0.0)) throw RangeError("d", d, "boundary distance must be nonnegative");
    if (r > spec.r_max) throw RangeError("r", r, "beyond the declared range of '" + spec.family + "'");
    switch (spec.kind) {
    case NonlinearityKind::separable: return spec.weight_at(d) * spec.profile(r);
    case NonlinearityKind::staircase: return spec.profile(r);
    case NonlinearityKind::general: return spec.reaction(d, r);
    }
    return 0.0;
}

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

NonlinearitySpec separable(ScalarFn profile, ScalarFn weight, std::string family) {
    NonlinearitySpec s;
    s.kind = NonlinearityKind::separable;
    s.profile = std::move(profile);
    s.weight = std::move(weight);
    s.family = std::move(family);
    return s;
}

} // namespace

NonlinearitySpec power_law(double p) {
    if (!(p > 0.0)) throw PreconditionError("power_law: exponent must be positive");
    return separable([p](double r) { return std::pow(r, p); }, {}, "power(p=" + fmt(p) + ")");
}

NonlinearitySpec weighted_power(double p, double alpha) {
    if (!(p > 0.0) || !(alpha >= 0.0)) throw PreconditionError("weighted_power: need p > 0, alpha >= 0");
    return separable([p](double r) { return std::pow(r, p); },
                     [alpha](double d) { return std::pow(d, alpha); },
                     "weighted_power(p=" + fmt(p) + ",alpha=" + fmt(alpha) + ")");
}

NonlinearitySpec exp_decay(double p, double kappa) {
    if (!(p > 0.0) || !(kappa > 0.0)) throw PreconditionError("exp_decay: need p > 0, kappa > 0");
    return separable([p](double r) { return std::pow(r, p); },
                     [kappa](double d) { return d > 0.0 ? std::exp(-kappa / d) : 0.0; },
                     "exp_decay(p=" + fmt(p) + ",kappa=" + fmt(kappa) + ")");
}

NonlinearitySpec exp_alpha_decay(double p, double alpha) {
    if (!(p > 0.0) || !(alpha > 0.0)) throw PreconditionError("exp_alpha_decay: need p > 0, alpha > 0");
    return separable([p](double r) { return std::pow(r, p); },
                     [alpha](double d) { return d > 0.0 ? std::exp(-1.0 / std::pow(d, alpha)) : 0.0; },
                     "exp_alpha_decay(p=" + fmt(p) + ",alpha=" + fmt(alpha) + ")");
}

NonlinearitySpec constant_weight(double p, double weight) {
    if (!(weight >= 0.0)) throw PreconditionError("constant_weight: weight must be nonnegative");
    return separable([p](double r) { return std::pow(r, p); }, [weight](double) { return weight; },
                     "constant_weight(p=" + fmt(p) + ",c=" + fmt(weight) + ")");
}

NonlinearitySpec custom_table(std::vector<std::pair<double, double>> table) {
    if (table.size() < 2) throw PreconditionError("custom_table: need at least two (r, f) pairs");
    std::sort(table.begin(), table.end());
    for (std::size_t i = 1; i < table.size(); ++i) {
        if (!(table[i].first > table[i - 1].first))
            throw PreconditionError("custom_table: duplicate abscissa " + fmt(table[i].first));
    }
    if (table.front().first > 0.0) throw PreconditionError("custom_table: table must start at r = 0");
    bool monotone = true;
    for (std::size_t i = 1; i < table.size(); ++i) monotone = monotone && table[i].second >= table[i - 1].second;
    const double r_max = table.back().first;
    const bool zero = table.front().second == 0.0;
    auto shared = std::make_shared<const std::vector<std::pair<double, double>>>(std::move(table));
    auto spec = separable(
        [shared](double r) {
            const auto& t = *shared;
            auto it = std::upper_bound(t.begin(), t.end(), r,
                                       [](double v, const std::pair<double, double>& e) { return v < e.first; });
            if (it == t.begin()) return t.front().second;
            if (it == t.end()) return t.back().second;
            const auto& hi = *it;
            const auto& lo = *(it - 1);
            const double w = (r - lo.first) / (hi.first - lo.first);
            return lo.second + w * (hi.second - lo.second);
        },
        {}, "custom_table");
    spec.r_max = r_max;
    spec.monotone_in_r = monotone;
    spec.vanishes_at_zero = zero;
    return spec;
}

NonlinearitySpec general_reaction(ReactionFn fn, std::string label, bool vanishes_at_zero) {
    NonlinearitySpec s;
    s.kind = NonlinearityKind::general;
    s.reaction = std::move(fn);
    s.family = std::move(label);
    s.vanishes_at_zero = vanishes_at_zero;
    return s;
}

// Baseline u^(5/2) lies between u^2 and u^3 on both sides of u = 1. A flat
// [a, b] holds the value a^(5/2), which stays above u^2 while b <= a^(5/4); the
// flat is followed by a linear climb back to the baseline ending at e = b^(6/5),
// where e^(5/2) = b^3 keeps the climb below u^3.
NonlinearitySpec staircase_counterexample(int n_intervals, std::uint64_t seed) {
    if (n_intervals < 0) throw PreconditionError("staircase_counterexample: n_intervals must be >= 0");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    struct Piece {
        double a, b, e, value;
    };
    std::vector<Piece> pieces;
    double start = 2.0 + 2.0 * unit(rng);
    for (int n = 0; n < n_intervals; ++n) {
        const double length = 8.0 * std::pow(4.0, n) * (1.0 + 0.5 * unit(rng));
        double a = start;
        while (std::pow(a, 1.25) - a < length) a *= 1.5;
        const double b = a + length;
        const double e = std::pow(b, 1.2);
        pieces.push_back({a, b, e, std::pow(a, 2.5)});
        start = e * (1.1 + 0.4 * unit(rng));
    }

    auto shared = std::make_shared<const std::vector<Piece>>(pieces);
    NonlinearitySpec spec;
    spec.kind = NonlinearityKind::staircase;
    spec.family = "staircase(n=" + std::to_string(n_intervals) + ",seed=" + std::to_string(seed) + ")";
    spec.profile = [shared](double u) {
        const auto& ps = *shared;
        auto it = std::upper_bound(ps.begin(), ps.end(), u, [](double v, const Piece& p) { return v < p.a; });
        if (it != ps.begin()) {
            const Piece& p = *(it - 1);
            if (u <= p.b) return p.value;
            if (u < p.e) {
                const double top = std::pow(p.e, 2.5);
                return p.value + (u - p.b) / (p.e - p.b) * (top - p.value);
            }
        }
        return std::pow(u, 2.5);
    };
    for (const auto& p : pieces) spec.flats.push_back({p.a, p.b, p.value});
    return spec;
}

std::vector<double> increment_search_points(double u_search_max, std::size_t u_samples) {
    if (!(u_search_max > 0.0)) throw PreconditionError("g_transform: u_search_max must be positive");
    if (u_samples < 2) throw PreconditionError("g_transform: need at least two u samples");
    std::vector<double> u(u_samples);
    u[0] = 0.0;
    const std::size_t geo = u_samples - 1;
    const double lo = std::log(u_search_max * 1e-9);
    const double hi = std::log(u_search_max);
    for (std::size_t k = 0; k < geo; ++k) {
        const double t = geo == 1 ? 1.0 : static_cast<double>(k) / static_cast<double>(geo - 1);
        u[k + 1] = std::exp(lo + t * (hi - lo));
    }
    u.back() = u_search_max;
    return u;
}

namespace {

// Second divided differences along the merged sample set.
bool convex_on(const ScalarFn& fn, std::vector<double> pts) {
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) return true;
    std::vector<double> vals(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) vals[i] = fn(pts[i]);
    constexpr double eps = std::numeric_limits<double>::epsilon();
    const auto noise = [&](std::size_t i) {
        return 8.0 * eps * (std::abs(vals[i]) + std::abs(vals[i + 1])) / (pts[i + 1] - pts[i]);
    };
    double prev = (vals[1] - vals[0]) / (pts[1] - pts[0]);
    for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
        const double slope = (vals[i + 1] - vals[i]) / (pts[i + 1] - pts[i]);
        const double tol = 1e-9 * std::max({1.0, std::abs(slope), std::abs(prev)}) + noise(i - 1) + noise(i);
        if (slope < prev - tol) return false;
        prev = slope;
    }
    return true;
}

double interp(std::span<const double> xs, std::span<const double> ys, double x) {
    if (x <= 0.0) return 0.0;
    if (x <= xs.front()) return xs.front() > 0.0 ? ys.front() * x / xs.front() : ys.front();
    if (x >= xs.back()) return ys.back();
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const std::size_t k = static_cast<std::size_t>(it - xs.begin());
    const double w = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
    return ys[k - 1] + w * (ys[k] - ys[k - 1]);
}

} // namespace

double GTransform::value(double d, double r) const {
    if (certified_exact) return eval_f(*source, d, r) - eval_f(*source, d, 0.0);
    if (source->kind == NonlinearityKind::separable) return source->weight_at(d) * interp(ell_grid, values[0], r);
    if (d_grid.size() == 1) return interp(ell_grid, values[0], r);
    if (d <= d_grid.front()) return interp(ell_grid, values.front(), r);
    if (d >= d_grid.back()) return interp(ell_grid, values.back(), r);
    const auto it = std::upper_bound(d_grid.begin(), d_grid.end(), d);
    const std::size_t k = static_cast<std::size_t>(it - d_grid.begin());
    const double w = (d - d_grid[k - 1]) / (d_grid[k] - d_grid[k - 1]);
    return (1.0 - w) * interp(ell_grid, values[k - 1], r) + w * interp(ell_grid, values[k], r);
}

GTransform g_transform(const NonlinearitySpec& spec, std::span<const double> ell_grid, double u_search_max,
                       std::size_t u_samples, std::span<const double> d_grid) {
    if (ell_grid.empty()) throw PreconditionError("g_transform: empty ell grid");
    for (std::size_t i = 0; i < ell_grid.size(); ++i) {
        if (ell_grid[i] < 0.0 || (i > 0 && ell_grid[i] < ell_grid[i - 1]))
            throw PreconditionError("g_transform: ell grid must be nonnegative and ascending");
    }
    const auto u = increment_search_points(u_search_max, u_samples);

    GTransform g;
    g.source = std::make_shared<const NonlinearitySpec>(spec);
    g.ell_grid.assign(ell_grid.begin(), ell_grid.end());
    g.u_search_max = u_search_max;

    std::vector<ScalarFn> classes;
    if (spec.kind == NonlinearityKind::general) {
        if (d_grid.empty()) throw PreconditionError("g_transform: x-dependent reaction needs a distance grid");
        g.d_grid.assign(d_grid.begin(), d_grid.end());
        std::sort(g.d_grid.begin(), g.d_grid.end());
        for (const double d : g.d_grid) classes.push_back([&spec, d](double r) { return eval_f(spec, d, r); });
    } else {
        g.d_grid = {0.0};
        classes.push_back([&spec](double r) { return spec.profile(r); });
    }

    std::vector<double> probe(u.begin(), u.end());
    probe.insert(probe.end(), ell_grid.begin(), ell_grid.end());
    for (const double l : ell_grid) probe.push_back(l + u_search_max);

    bool convex = true;
    for (const auto& fn : classes) {
        std::vector<double> row(ell_grid.size());
        std::vector<double> arg(ell_grid.size());
        kernels::omp::increment_floor(fn, ell_grid, u, row, arg);
        double scale = 1.0;
        for (std::size_t k = 0; k < row.size(); ++k) scale = std::max(scale, std::abs(fn(ell_grid[k])));
        for (double& v : row) {
            if (v < -1e-12 * scale) g.nonmonotone_warning = true;
            v = std::max(v, 0.0);
        }
        g.values.push_back(std::move(row));
        g.argmin_u.push_back(std::move(arg));
        convex = convex && convex_on(fn, probe);
    }
    g.certified_exact = convex;
    if (convex) {
        for (std::size_t c = 0; c < classes.size(); ++c) {
            const double f0 = classes[c](0.0);
            for (std::size_t k = 0; k < ell_grid.size(); ++k) {
                g.values[c][k] = classes[c](ell_grid[k]) - f0;
                g.argmin_u[c][k] = 0.0;
            }
        }
    }
    return g;
}

double Minorant::operator()(double r) const {
    double best = std::numeric_limits<double>::infinity();
    for (const double d : d_samples) best = std::min(best, eval_f(*source, d, r));
    return best;
}

ScalarFn Minorant::as_function() const {
    auto self = std::make_shared<const Minorant>(*this);
    return [self](double r) { return (*self)(r); };
}

Minorant ko_loc_minorant(const NonlinearitySpec& spec, double d_min, double d_max, std::span<const double> r_grid,
                         std::size_t d_samples) {
    if (!(d_min > 0.0) || !(d_max >= d_min))
        throw PreconditionError("ko_loc_minorant: need 0 < d_min <= d_max");
    if (d_samples < 2) d_samples = 2;
    Minorant m;
    m.source = std::make_shared<const NonlinearitySpec>(spec);
    m.r_grid.assign(r_grid.begin(), r_grid.end());
    for (std::size_t k = 0; k < d_samples; ++k)
        m.d_samples.push_back(d_min + (d_max - d_min) * static_cast<double>(k) / static_cast<double>(d_samples - 1));
    m.values.reserve(r_grid.size());
    bool all_zero = true;
    for (const double r : r_grid) {
        const double v = m(r);
        all_zero = all_zero && v == 0.0;
        m.values.push_back(v);
    }
    m.vacuous = all_zero;
    return m;
}

const char* to_string(KoOutcome v) {
    switch (v) {
    case KoOutcome::converges: return "converges";
    case KoOutcome::diverges: return "diverges";
    case KoOutcome::inconclusive: return "inconclusive";
    }
    return "?";
}

const char* to_string(Hypothesis h) {
    switch (h) {
    case Hypothesis::complete_decay: return "complete_decay";
    case Hypothesis::weight_decay: return "weight_decay";
    case Hypothesis::superadditivity: return "superadditivity";
    case Hypothesis::phi_condition: return "phi_condition";
    case Hypothesis::ratio_monotone: return "ratio_monotone";
    }
    return "?";
}

const char* to_string(NonlinearityKind k) {
    switch (k) {
    case NonlinearityKind::separable: return "separable";
    case NonlinearityKind::general: return "general";
    case NonlinearityKind::staircase: return "staircase";
    }
    return "?";
}

} // namespace blowup
