#include "blowup/solver.hpp"

#include "blowup/kernels.hpp"
#include "blowup/quadrature.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace blowup {

Reaction::Reaction(const NonlinearitySpec& spec)
    : label_(spec.family), monotone_(spec.monotone_in_r) {
    auto s = std::make_shared<const NonlinearitySpec>(spec);
    fn_ = [s](double d, double r) { return eval_f(*s, d, r); };
}

Reaction::Reaction(const GTransform& g) : label_("g[" + g.source->family + "]"), monotone_(true) {
    auto s = std::make_shared<const GTransform>(g);
    fn_ = [s](double d, double r) { return s->value(d, r); };
}

Reaction::Reaction(ReactionFn fn, std::string label, bool monotone)
    : fn_(std::move(fn)), label_(std::move(label)), monotone_(monotone) {}

ReactionFn Reaction::function() const {
    return [self = *this](double d, double r) { return self(d, r); };
}

namespace {

constexpr double eps = std::numeric_limits<double>::epsilon();

std::string where(const Grid& g, std::size_t k) {
    std::ostringstream os;
    os.precision(10);
    os << "(" << g.x(k);
    if (g.dim == 2) os << ", " << g.y(k);
    os << ")";
    return os.str();
}

// Unknowns are the interior nodes; boundary values are eliminated.
class InteriorSystem {
public:
    explicit InteriorSystem(const GridPtr& grid) : grid_(grid), map_(grid->size(), -1) {
        for (std::size_t k = 0; k < grid->size(); ++k) {
            if (grid->interior(k)) {
                map_[k] = static_cast<std::int64_t>(nodes_.size());
                nodes_.push_back(k);
            }
        }
    }

    std::size_t unknowns() const { return nodes_.size(); }
    const std::vector<std::size_t>& nodes() const { return nodes_; }

    // Factorizes -Lap + diag(extra).
    void factorize(const std::vector<double>& extra) {
        const double inv_h2 = 1.0 / (grid_->h * grid_->h);
        const double centre = 2.0 * grid_->dim * inv_h2;
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(nodes_.size() * (1 + 2 * grid_->dim));
        for (std::size_t r = 0; r < nodes_.size(); ++r) {
            const auto row = static_cast<Eigen::Index>(r);
            trip.emplace_back(row, row, centre + extra[r]);
            for (const auto nb : grid_->neighbors(nodes_[r])) {
                if (map_[nb] >= 0) trip.emplace_back(row, static_cast<Eigen::Index>(map_[nb]), -inv_h2);
            }
        }
        const auto n = static_cast<Eigen::Index>(nodes_.size());
        matrix_.resize(n, n);
        matrix_.setFromTriplets(trip.begin(), trip.end());
        if (!analyzed_) {
            llt_.analyzePattern(matrix_);
            analyzed_ = true;
        }
        llt_.factorize(matrix_);
        if (llt_.info() != Eigen::Success) throw InvariantBreach("solver: linearized operator is not positive definite");
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const { return llt_.solve(rhs); }

    // Contribution of boundary neighbours to the right-hand side.
    double boundary_load(std::size_t node, const std::vector<double>& u) const {
        const double inv_h2 = 1.0 / (grid_->h * grid_->h);
        double acc = 0.0;
        for (const auto nb : grid_->neighbors(node))
            if (map_[nb] < 0) acc += u[nb] * inv_h2;
        return acc;
    }

private:
    GridPtr grid_;
    std::vector<std::int64_t> map_;
    std::vector<std::size_t> nodes_;
    Eigen::SparseMatrix<double> matrix_;
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt_;
    bool analyzed_ = false;
};

void check_boundary(const GridField& boundary) {
    const Grid& g = *boundary.grid;
    if (boundary.values.size() != g.size()) throw PreconditionError("solver: boundary field size mismatch");
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (g.boundary(k) && !std::isfinite(boundary.values[k]))
            throw PreconditionError("solver: boundary value not finite at node " + where(g, k));
    }
}

std::vector<double> raw_residual(const Reaction& nl, const GridField& u) {
    const Grid& g = *u.grid;
    std::vector<double> out(g.size(), 0.0);
    kernels::omp::residual(g.stencil(), u.values, g.distance, [&nl](double d, double r) { return nl(d, r); }, out);
    return out;
}

// Roundoff allowance of the residual at one node.
double floor_at(const Grid& g, const std::vector<double>& u, std::size_t k, double fk) {
    double t = 2.0 * g.dim * std::abs(u[k]);
    for (const auto nb : g.neighbors(k)) t += std::abs(u[nb]);
    return 16.0 * eps * (t / (g.h * g.h) + std::abs(fk));
}

struct ResidualState {
    std::vector<double> r;
    double sup = 0.0;
    double floor = 0.0;
    bool converged = false;
};

ResidualState assess(const Reaction& nl, const GridField& u, const std::vector<std::size_t>& nodes, double tol) {
    const Grid& g = *u.grid;
    ResidualState s;
    s.r = raw_residual(nl, u);
    s.converged = true;
    for (const auto k : nodes) {
        const double fk = nl(g.distance[k], u.values[k]);
        const double fl = floor_at(g, u.values, k, fk);
        const double a = std::abs(s.r[k]);
        if (!std::isfinite(a)) {
            s.sup = std::numeric_limits<double>::infinity();
            s.converged = false;
            continue;
        }
        s.sup = std::max(s.sup, a);
        s.floor = std::max(s.floor, fl);
        if (a > tol + fl) s.converged = false;
    }
    return s;
}

double secant_slope(const Reaction& nl, double d, double u, double step) {
    double eta = std::max(std::abs(step), 1e-7 * std::max(1.0, std::abs(u)));
    if (step < 0.0) eta = -eta;
    const double f0 = nl(d, u);
    const double f1 = nl(d, u + eta);
    const double s = (f1 - f0) / eta;
    const double tol = 1e-9 * std::max({1.0, std::abs(f0), std::abs(f1)}) / std::abs(eta);
    if (s < -tol) {
        std::ostringstream os;
        os << "solver: reaction decreases in r near r = " << u << " (slope " << s << ")";
        throw PreconditionError(os.str());
    }
    return std::max(s, 0.0);
}

double max_slope_on(const Reaction& nl, double d, double lo, double hi) {
    if (!(hi > lo)) return secant_slope(nl, d, lo, 0.0);
    constexpr int samples = 32;
    double best = 0.0;
    double prev = nl(d, lo);
    for (int k = 1; k <= samples; ++k) {
        const double a = lo + (hi - lo) * (k - 1) / samples;
        const double b = lo + (hi - lo) * k / samples;
        const double fb = nl(d, b);
        best = std::max(best, (fb - prev) / (b - a));
        prev = fb;
    }
    return best;
}

GridField with_boundary(const GridField& base, const GridField& boundary) {
    GridField u = base;
    const Grid& g = *u.grid;
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (g.boundary(k)) u.values[k] = boundary.values[k];
        else if (!g.active(k)) u.values[k] = std::numeric_limits<double>::quiet_NaN();
    }
    return u;
}

// Change of energy along u + alpha*delta (up to the common factor h^N).
struct EnergyChange {
    double value = 0.0;
    double roundoff = 0.0;
};

EnergyChange energy_change(const Reaction& nl, const GridField& u, const std::vector<double>& neg_lap_u,
                           const std::vector<double>& delta, const std::vector<double>& neg_lap_delta,
                           const std::vector<std::size_t>& nodes, double alpha) {
    const Grid& g = *u.grid;
    double linear = 0.0;
    double quad = 0.0;
    double react = 0.0;
    double scale = 0.0;
    for (const auto k : nodes) {
        const double dk = delta[k];
        if (dk == 0.0) continue;
        const double a = u.values[k];
        const double b = a + alpha * dk;
        const double d = g.distance[k];
        const double lin = alpha * dk * neg_lap_u[k];
        const double qd = 0.5 * alpha * alpha * dk * neg_lap_delta[k];
        const double rc = quad::gauss_legendre([&](double s) { return nl(d, s); }, a, b, 2);
        linear += lin;
        quad += qd;
        react += rc;
        scale += std::abs(lin) + std::abs(qd) + std::abs(rc);
    }
    return {linear + quad + react, 64.0 * eps * scale};
}

std::vector<double> neg_laplacian(const Grid& g, const std::vector<double>& v) {
    std::vector<double> out(g.size(), 0.0);
    kernels::omp::laplacian(g.stencil(), v, out);
    for (auto& x : out) x = -x;
    return out;
}

BracketCheck bracket(const Reaction& nl, const GridField& field, double tol, bool super) {
    const Grid& g = *field.grid;
    const auto r = raw_residual(nl, field);
    BracketCheck out;
    out.worst = super ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (!g.interior(k)) continue;
        const bool worse = super ? r[k] < out.worst : r[k] > out.worst;
        if (worse || std::isnan(r[k])) {
            out.worst = r[k];
            out.worst_node = k;
        }
        if (std::isnan(r[k]) || (super ? r[k] < -tol : r[k] > tol)) out.holds = false;
    }
    return out;
}

void finish(const Reaction& nl, SolveReport& rep, double tol) {
    const double t = tol + rep.residual_floor;
    rep.bracket_sub = is_subsolution(nl, rep.field, t).holds;
    rep.bracket_super = is_supersolution(nl, rep.field, t).holds;
    rep.energy = discrete_energy(nl, rep.field);
}

// Shifted fixed-point loop shared by the fallback and monotone_iterate.
bool shifted_iteration(const Reaction& nl, GridField& u, const std::vector<double>& lambda, InteriorSystem& sys,
                       const SolveConfig& cfg, const GridField* sub, SolveReport& rep) {
    const Grid& g = *u.grid;
    const auto& nodes = sys.nodes();
    sys.factorize(lambda);
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(nodes.size()));
    for (int it = 0; it < cfg.monotone_max_iter; ++it) {
        const auto state = assess(nl, u, nodes, cfg.newton_tol);
        rep.residual_sup = state.sup;
        rep.residual_floor = state.floor;
        if (state.converged) return true;
        for (std::size_t r = 0; r < nodes.size(); ++r) {
            const auto k = nodes[r];
            rhs[static_cast<Eigen::Index>(r)] =
                lambda[r] * u.values[k] - nl(g.distance[k], u.values[k]) + sys.boundary_load(k, u.values);
        }
        const Eigen::VectorXd next = sys.solve(rhs);
        double change = 0.0;
        for (std::size_t r = 0; r < nodes.size(); ++r) {
            const auto k = nodes[r];
            const double v = next[static_cast<Eigen::Index>(r)];
            if (sub) {
                const double slack = 2.0 * cfg.newton_tol * std::max(1.0, std::abs(v));
                if (v > u.values[k] + slack || v < sub->values[k] - slack)
                    throw InvariantBreach("monotone_iterate: iterate leaves the bracket at node " + where(g, k));
            }
            change = std::max(change, std::abs(v - u.values[k]));
            u.values[k] = v;
        }
        ++rep.iterations;
        if (change == 0.0) break;
    }
    const auto state = assess(nl, u, nodes, cfg.newton_tol);
    rep.residual_sup = state.sup;
    rep.residual_floor = state.floor;
    return state.converged;
}

} // namespace

GridField residual(const Reaction& nl, const GridField& field) {
    const Grid& g = *field.grid;
    GridField out{field.grid, raw_residual(nl, field)};
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (!g.active(k)) out.values[k] = std::numeric_limits<double>::quiet_NaN();
        else if (!g.interior(k)) out.values[k] = 0.0;
    }
    return out;
}

BracketCheck is_supersolution(const Reaction& nl, const GridField& field, double tol) {
    return bracket(nl, field, tol, true);
}

BracketCheck is_subsolution(const Reaction& nl, const GridField& field, double tol) {
    return bracket(nl, field, tol, false);
}

double discrete_energy(const Reaction& nl, const GridField& field) {
    const Grid& g = *field.grid;
    const double inv_h2 = 1.0 / (g.h * g.h);
    double grad = 0.0;
    double pot = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (!g.active(k)) continue;
        for (const auto nb : g.neighbors(k)) {
            // Each edge once, and only edges touching an unknown.
            if (nb < k || !g.active(nb) || (!g.interior(k) && !g.interior(nb))) continue;
            const double du = field.values[k] - field.values[nb];
            grad += 0.5 * du * du * inv_h2;
        }
        if (g.interior(k)) {
            const double d = g.distance[k];
            pot += quad::gauss_legendre([&](double s) { return nl(d, s); }, 0.0, field.values[k], 4);
        }
    }
    return std::pow(g.h, g.dim) * (grad + pot);
}

GridField harmonic_extension(const GridField& boundary) {
    check_boundary(boundary);
    const Grid& g = *boundary.grid;
    InteriorSystem sys(boundary.grid);
    sys.factorize(std::vector<double>(sys.unknowns(), 0.0));
    GridField u = with_boundary(GridField::filled(boundary.grid, 0.0), boundary);
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(sys.unknowns()));
    for (std::size_t r = 0; r < sys.unknowns(); ++r)
        rhs[static_cast<Eigen::Index>(r)] = sys.boundary_load(sys.nodes()[r], u.values);
    const Eigen::VectorXd x = sys.solve(rhs);
    for (std::size_t r = 0; r < sys.unknowns(); ++r) u.values[sys.nodes()[r]] = x[static_cast<Eigen::Index>(r)];
    (void)g;
    return u;
}

SolveReport solve_dirichlet(const Reaction& nl, const GridField& boundary, const SolveConfig& cfg,
                            const std::optional<GridField>& initial) {
    if (!(cfg.newton_tol > 0.0) || cfg.newton_max_iter < 1 || cfg.max_backtracks < 1 || !(cfg.damping > 0.0) ||
        !(cfg.damping < 1.0))
        throw PreconditionError("solve_dirichlet: invalid solver configuration");
    if (!nl.claimed_monotone()) throw PreconditionError("solve_dirichlet: reaction '" + nl.label() + "' is not monotone");
    check_boundary(boundary);
    const GridPtr& gp = boundary.grid;
    const Grid& g = *gp;

    if (initial && initial->values.size() != g.size())
        throw PreconditionError("solve_dirichlet: initial iterate lives on another grid");
    GridField u = initial ? with_boundary(*initial, boundary) : harmonic_extension(boundary);
    u.grid = gp;

    InteriorSystem sys(gp);
    const auto& nodes = sys.nodes();
    SolveReport rep;
    std::vector<double> last_step(g.size(), 0.0);
    auto state = assess(nl, u, nodes, cfg.newton_tol);
    bool stalled = false;

    std::vector<double> diag(nodes.size());
    std::vector<double> delta(g.size(), 0.0);
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(nodes.size()));
    rep.energy_trace.push_back(discrete_energy(nl, u));

    while (!state.converged && rep.iterations < cfg.newton_max_iter) {
        for (std::size_t r = 0; r < nodes.size(); ++r) {
            const auto k = nodes[r];
            diag[r] = secant_slope(nl, g.distance[k], u.values[k], last_step[k]) + cfg.slope_floor;
            rhs[static_cast<Eigen::Index>(r)] = -state.r[k];
        }
        sys.factorize(diag);
        const Eigen::VectorXd step = sys.solve(rhs);
        for (std::size_t r = 0; r < nodes.size(); ++r) delta[nodes[r]] = step[static_cast<Eigen::Index>(r)];

        const auto neg_lap_u = neg_laplacian(g, u.values);
        const auto neg_lap_delta = neg_laplacian(g, delta);
        double alpha = 1.0;
        bool accepted = false;
        GridField cand = u;
        ResidualState cand_state;
        for (int b = 0; b <= cfg.max_backtracks; ++b) {
            for (const auto k : nodes) cand.values[k] = u.values[k] + alpha * delta[k];
            const auto dj = energy_change(nl, u, neg_lap_u, delta, neg_lap_delta, nodes, alpha);
            cand_state = assess(nl, cand, nodes, cfg.newton_tol);
            if (dj.value <= 0.0 || (dj.value <= dj.roundoff && cand_state.sup < state.sup)) {
                accepted = true;
                break;
            }
            alpha *= cfg.damping;
        }
        if (!accepted) {
            stalled = true;
            break;
        }
        for (const auto k : nodes) last_step[k] = alpha * delta[k];
        u = std::move(cand);
        state = std::move(cand_state);
        ++rep.iterations;
        rep.energy_trace.push_back(discrete_energy(nl, u));
    }

    rep.residual_sup = state.sup;
    rep.residual_floor = state.floor;
    rep.converged = state.converged;
    if (!state.converged) {
        if (!cfg.fallback) {
            std::ostringstream os;
            os << "solve_dirichlet: Newton " << (stalled ? "stalled" : "hit the iteration cap") << " after "
               << rep.iterations << " steps, residual " << state.sup;
            throw SolveError(os.str(), u, state.sup);
        }
        std::vector<double> lambda(nodes.size());
        for (std::size_t r = 0; r < nodes.size(); ++r) {
            const auto k = nodes[r];
            const double v = u.values[k];
            const double w = 0.5 * std::max(1.0, std::abs(v));
            lambda[r] = 1.05 * max_slope_on(nl, g.distance[k], v - w, v + w) + cfg.slope_floor;
        }
        rep.used_fallback = true;
        rep.converged = shifted_iteration(nl, u, lambda, sys, cfg, nullptr, rep);
    }
    rep.field = std::move(u);
    finish(nl, rep, cfg.newton_tol);
    return rep;
}

SolveReport monotone_iterate(const Reaction& nl, const GridField& boundary, const GridField& sub,
                             const GridField& super, const SolveConfig& cfg) {
    check_boundary(boundary);
    const GridPtr& gp = boundary.grid;
    const Grid& g = *gp;
    if (sub.values.size() != g.size() || super.values.size() != g.size())
        throw PreconditionError("monotone_iterate: bracket fields live on another grid");
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (!g.active(k)) continue;
        const double slack = 2.0 * cfg.newton_tol * std::max(1.0, std::abs(super.values[k]));
        if (sub.values[k] > super.values[k] + slack)
            throw PreconditionError("monotone_iterate: sub exceeds super at node " + where(g, k));
        if (g.boundary(k) && (sub.values[k] > boundary.values[k] + slack || boundary.values[k] > super.values[k] + slack))
            throw PreconditionError("monotone_iterate: boundary data outside the bracket at node " + where(g, k));
    }
    GridField lo = with_boundary(sub, boundary);
    GridField hi = with_boundary(super, boundary);
    lo.grid = hi.grid = gp;
    const auto sub_check = is_subsolution(nl, lo, cfg.newton_tol);
    if (!sub_check.holds) throw PreconditionError("monotone_iterate: sub is not a subsolution at node " + where(g, sub_check.worst_node));
    const auto super_check = is_supersolution(nl, hi, cfg.newton_tol);
    if (!super_check.holds)
        throw PreconditionError("monotone_iterate: super is not a supersolution at node " + where(g, super_check.worst_node));

    InteriorSystem sys(gp);
    std::vector<double> lambda(sys.unknowns());
    for (std::size_t r = 0; r < sys.unknowns(); ++r) {
        const auto k = sys.nodes()[r];
        lambda[r] = 1.05 * max_slope_on(nl, g.distance[k], lo.values[k], hi.values[k]) + cfg.slope_floor;
    }
    SolveReport rep;
    rep.converged = shifted_iteration(nl, hi, lambda, sys, cfg, &lo, rep);
    rep.field = std::move(hi);
    finish(nl, rep, cfg.newton_tol);
    return rep;
}

} // namespace blowup
