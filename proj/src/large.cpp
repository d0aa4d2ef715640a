#include "blowup/large.hpp"

#include "blowup/error.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <sstream>

namespace blowup {

namespace {

constexpr double eps_d = std::numeric_limits<double>::epsilon();

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

double scaled(double u) { return std::max(1.0, std::abs(u)); }

std::size_t deepest_interior(const Grid& g) {
    std::size_t best = g.size();
    for (std::size_t k = 0; k < g.size(); ++k)
        if (g.interior(k) && (best == g.size() || g.distance[k] > g.distance[best])) best = k;
    if (best == g.size()) throw PreconditionError("ramp: grid has no interior nodes");
    return best;
}

std::vector<std::size_t> deep_band(const Grid& g) {
    const double dmax = g.distance[deepest_interior(g)];
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < g.size(); ++k)
        if (g.interior(k) && g.distance[k] >= 0.5 * dmax) out.push_back(k);
    return out;
}

/// Largest ratio of ramped boundary data to an adjacent interior value.
double boundary_ratio(const Grid& g, const GridField& u) {
    double worst = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (!g.interior(k)) continue;
        for (const auto nb : g.neighbors(k)) {
            if (!g.boundary(nb) || !(u[nb] > 0.0)) continue;
            worst = std::max(worst, u[k] > 0.0 ? u[nb] / u[k] : std::numeric_limits<double>::infinity());
        }
    }
    return worst;
}

/// Runs body(i) for i < count in parallel, rethrowing the first failure by index.
template <class Body>
void parallel_each(int count, Body body) {
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < count; ++i) {
        try {
            body(i);
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::vector<double> base_distance(const Grid& g, const DomainSpec& base) {
    std::vector<double> d(g.size(), 0.0);
    for (std::size_t k = 0; k < g.size(); ++k)
        if (g.active(k)) d[k] = std::max(0.0, base.signed_distance(g.x(k), g.y(k)));
    return d;
}

DomainSequenceRun run_sequence(const Reaction& nl, const DomainSpec& spec, const SequenceOptions& seq,
                               const RampSchedule& ramp, const SolveConfig& cfg, bool inner) {
    DomainSequenceRun run;
    run.base = spec;
    run.sequence = inner ? inner_domains(spec, seq.count, seq.h, seq.margin0, seq.decay)
                         : outer_domains(spec, seq.count, seq.h, seq.margin0, seq.decay);
    const int count = static_cast<int>(run.sequence.domains.size());
    if (count == 0) throw PreconditionError("domain sequence: every margin was dropped at h = " + fmt(seq.h));

    run.grids.resize(static_cast<std::size_t>(count));
    run.ramps.resize(static_cast<std::size_t>(count));
    parallel_each(count, [&](int i) {
        const auto idx = static_cast<std::size_t>(i);
        const auto raw = build_grid(run.sequence.domains[idx], seq.h);
        auto d = base_distance(*raw, spec);
        if (!inner && seq.extension == DistanceExtension::own_distance)
            for (std::size_t k = 0; k < raw->size(); ++k)
                if (raw->active(k) && spec.signed_distance(raw->x(k), raw->y(k)) < 0.0) d[k] = raw->distance[k];
        run.grids[idx] = with_distance(raw, std::move(d));
        RampOptions opts;
        opts.keep_levels = true;
        run.ramps[idx] = ramp_solve(nl, run.grids[idx], [](std::size_t, double n) { return n; }, ramp, cfg, opts);
    });

    run.common_level = run.ramps.front().final_index();
    for (const auto& r : run.ramps) {
        run.common_level = std::min(run.common_level, r.final_index());
        run.diverged = run.diverged || r.outcome == RampOutcome::diverged;
    }

    const DomainSpec cmp = seq.comparison ? *seq.comparison : (inner ? run.sequence.domains.front() : spec);
    const auto cmp_raw = build_grid(cmp, seq.h);
    run.comparison_grid = with_distance(cmp_raw, base_distance(*cmp_raw, spec));

    for (const auto& r : run.ramps)
        run.restricted.push_back(
            restrict_to(r.levels[static_cast<std::size_t>(run.common_level)], run.comparison_grid));

    const Grid& cg = *run.comparison_grid;
    for (std::size_t i = 1; i < run.restricted.size(); ++i) {
        const auto& prev = run.restricted[i - 1];
        const auto& cur = run.restricted[i];
        for (std::size_t k = 0; k < cg.size(); ++k) {
            if (!cg.active(k)) continue;
            // inner: nonincreasing in the index; outer: nondecreasing.
            const double breach = (inner ? cur[k] - prev[k] : prev[k] - cur[k]) / scaled(cur[k]);
            run.worst_order_violation = std::max(run.worst_order_violation, breach);
            if (breach > 2.0 * cfg.newton_tol)
                throw InvariantBreach(std::string(inner ? "u_max_via_inner" : "u_min_via_outer") +
                                      ": domain-sequence monotonicity breached at (" + fmt(cg.x(k)) + ", " +
                                      fmt(cg.y(k)) + ") between indices " + std::to_string(i - 1) + " and " +
                                      std::to_string(i) + " by " + fmt(breach));
        }
    }
    return run;
}

std::vector<std::size_t> band_nodes(const Grid& g, double lo, double hi) {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < g.size(); ++k)
        if (g.interior(k) && g.distance[k] >= lo && g.distance[k] <= hi) out.push_back(k);
    return out;
}

BoundaryRule mixed_rule(const GridPtr& grid) {
    return [grid](std::size_t node, double n) {
        return grid->node_class[node] == NodeClass::boundary_artificial ? n : 0.0;
    };
}

double reaction_residual(const Reaction& nl, const Grid& g, const std::vector<double>& u, std::size_t k,
                         double* floor) {
    const auto nbs = g.neighbors(k);
    double lap = static_cast<double>(nbs.size()) * u[k];
    double mag = static_cast<double>(nbs.size()) * std::abs(u[k]);
    for (const auto n : nbs) {
        lap -= u[n];
        mag += std::abs(u[n]);
    }
    const double f = nl(g.distance[k], u[k]);
    *floor = 32.0 * eps_d * (mag / (g.h * g.h) + std::abs(f));
    return lap / (g.h * g.h) + f;
}

} // namespace

std::vector<double> RampSchedule::levels() const {
    if (!(n0 > 0.0) || !(factor > 1.0) || cap < 2)
        throw PreconditionError("ramp schedule: need n0 > 0, factor > 1 and cap >= 2");
    std::vector<double> out;
    for (int k = 0; k < cap; ++k) out.push_back(n0 * std::pow(factor, k));
    return out;
}

RampResult ramp_solve(const Reaction& nl, const GridPtr& grid, const BoundaryRule& rule, const RampSchedule& ramp,
                      const SolveConfig& cfg, const RampOptions& opts) {
    const Grid& g = *grid;
    const auto levels = ramp.levels();
    RampResult res;
    res.probe_node = opts.probe_node ? *opts.probe_node : deepest_interior(g);
    if (res.probe_node >= g.size() || !g.interior(res.probe_node))
        throw PreconditionError("ramp: probe node is not an interior node");
    res.probe_set = opts.probe_set.empty() ? deep_band(g) : opts.probe_set;

    std::optional<GridField> prev;
    for (int k = 0; k < static_cast<int>(levels.size()); ++k) {
        const double n = levels[static_cast<std::size_t>(k)];
        auto bc = GridField::filled(grid, 0.0);
        for (std::size_t i = 0; i < g.size(); ++i)
            if (g.boundary(i)) bc.values[i] = rule(i, n);
        auto rep = solve_dirichlet(nl, bc, cfg, prev);

        RampStep step;
        step.index = k;
        step.n = n;
        step.probe_value = rep.field[res.probe_node];
        step.residual_sup = rep.residual_sup;
        step.boundary_ratio = boundary_ratio(g, rep.field);
        if (prev && ramp.resolution_ratio > 0.0 && step.boundary_ratio > ramp.resolution_ratio) {
            res.outcome = RampOutcome::resolution_limited;
            break;
        }

        if (prev) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (!g.active(i)) continue;
                const double drop = ((*prev)[i] - rep.field[i]) / scaled(rep.field[i]);
                res.worst_monotone_violation = std::max(res.worst_monotone_violation, drop);
                if (drop > 2.0 * cfg.newton_tol)
                    throw InvariantBreach("ramp: field decreased at (" + fmt(g.x(i)) + ", " + fmt(g.y(i)) +
                                          ") between levels " + std::to_string(k - 1) + " and " +
                                          std::to_string(k) + " by " + fmt(drop));
                ++res.monotone_checks;
            }
            for (const auto i : res.probe_set)
                step.probe_change =
                    std::max(step.probe_change, std::abs(rep.field[i] - (*prev)[i]) / scaled(rep.field[i]));
        }

        prev = rep.field;
        if (opts.keep_levels) res.levels.push_back(rep.field);
        res.final = std::move(rep);
        res.trace.push_back(step);

        if (k > 0 && step.probe_change <= ramp.stagnation_tol) {
            res.outcome = RampOutcome::stagnated;
            break;
        }
        const double first = res.trace.front().probe_value;
        if (first > 0.0 && step.probe_value >= ramp.divergence_factor * first) {
            res.outcome = RampOutcome::diverged;
            break;
        }
    }
    return res;
}

RampResult large_solution_ramp(const Reaction& nl, const GridPtr& grid, const RampSchedule& ramp,
                               const SolveConfig& cfg, const RampOptions& opts) {
    return ramp_solve(nl, grid, [](std::size_t, double n) { return n; }, ramp, cfg, opts);
}

DomainSequenceRun u_max_via_inner(const Reaction& nl, const DomainSpec& spec, const SequenceOptions& seq,
                                  const RampSchedule& ramp, const SolveConfig& cfg) {
    return run_sequence(nl, spec, seq, ramp, cfg, true);
}

DomainSequenceRun u_min_via_outer(const Reaction& nl, const DomainSpec& spec, const SequenceOptions& seq,
                                  const RampSchedule& ramp, const SolveConfig& cfg) {
    return run_sequence(nl, spec, seq, ramp, cfg, false);
}

UniquenessReport uniqueness_gap(const Reaction& nl, const DomainSpec& spec, const GapOptions& opts,
                                const RampSchedule& ramp, const SolveConfig& cfg) {
    UniquenessReport rep;
    const auto inner_seq = inner_domains(spec, opts.inner.count, opts.inner.h, opts.inner.margin0, opts.inner.decay);
    if (inner_seq.domains.empty()) throw PreconditionError("uniqueness_gap: no inner domain survives at this h");
    auto inner_opts = opts.inner;
    auto outer_opts = opts.outer;
    inner_opts.comparison = inner_seq.domains.front();
    outer_opts.comparison = inner_seq.domains.front();
    if (std::abs(inner_opts.h - outer_opts.h) > 1e-12 * inner_opts.h)
        throw PreconditionError("uniqueness_gap: inner and outer sequences must share h");

    rep.inner = u_max_via_inner(nl, spec, inner_opts, ramp, cfg);
    rep.outer = u_min_via_outer(nl, spec, outer_opts, ramp, cfg);
    for (const auto& w : rep.inner.sequence.warnings) rep.warnings.push_back("inner: " + w);
    for (const auto& w : rep.outer.sequence.warnings) rep.warnings.push_back("outer: " + w);

    // Both halves are compared at the same boundary level.
    const int level = std::min(rep.inner.common_level, rep.outer.common_level);
    const auto& cg = rep.inner.comparison_grid;
    for (std::size_t i = 0; i < rep.inner.ramps.size(); ++i)
        rep.u_max_seq.push_back(restrict_to(rep.inner.ramps[i].levels[static_cast<std::size_t>(level)], cg));
    for (std::size_t i = 0; i < rep.outer.ramps.size(); ++i)
        rep.u_min_seq.push_back(restrict_to(rep.outer.ramps[i].levels[static_cast<std::size_t>(level)], cg));
    if (rep.u_max_seq.size() != rep.u_min_seq.size())
        rep.warnings.push_back("inner and outer sequences differ in length; pairing the first " +
                               std::to_string(std::min(rep.u_max_seq.size(), rep.u_min_seq.size())));
    const std::size_t pairs = std::min(rep.u_max_seq.size(), rep.u_min_seq.size());

    const Grid& g = *cg;
    std::vector<std::size_t> probe;
    if (opts.probe_band) {
        probe = band_nodes(g, opts.probe_band->first, opts.probe_band->second);
    } else {
        probe = deep_band(g);
    }
    if (probe.empty()) throw PreconditionError("uniqueness_gap: the probe band holds no interior node");
    double dmin = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < g.size(); ++k)
        if (g.interior(k)) dmin = std::min(dmin, g.distance[k]);
    const auto edge = band_nodes(g, dmin, dmin + 2.0 * g.h * (1 + 1e-9));

    for (std::size_t j = 0; j < pairs; ++j) {
        const auto& umax = rep.u_max_seq[j];
        const auto& umin = rep.u_min_seq[j];
        for (std::size_t k = 0; k < g.size(); ++k) {
            if (!g.active(k)) continue;
            const double breach = (umin[k] - umax[k]) / scaled(umax[k]);
            rep.worst_ordering = std::max(rep.worst_ordering, breach);
            if (breach > 2.0 * cfg.newton_tol)
                throw InvariantBreach("uniqueness_gap: u_min exceeds u_max at (" + fmt(g.x(k)) + ", " +
                                      fmt(g.y(k)) + ") for index " + std::to_string(j) + " by " + fmt(breach));
        }
        double gap = 0.0;
        for (const auto k : probe) gap = std::max(gap, umax[k] - umin[k]);
        double bgap = 0.0;
        for (const auto k : edge) bgap = std::max(bgap, umax[k] - umin[k]);
        rep.gap_profile.push_back(std::max(gap, 0.0));
        rep.boundary_gap.push_back(std::max(bgap, 0.0));
    }

    if (pairs > 0) {
        for (const auto k : probe) rep.field_scale = std::max(rep.field_scale, std::abs(rep.u_max_seq[pairs - 1][k]));
        rep.final_relative_gap = rep.field_scale > 0.0 ? rep.gap_profile.back() / rep.field_scale : 0.0;
    }
    rep.gap_strictly_decreasing = pairs >= 2;
    bool boundary_decreasing = true;
    for (std::size_t j = 1; j < pairs; ++j) {
        rep.gap_strictly_decreasing = rep.gap_strictly_decreasing && rep.gap_profile[j] < rep.gap_profile[j - 1];
        boundary_decreasing = boundary_decreasing && rep.boundary_gap[j] <= rep.boundary_gap[j - 1];
    }

    if (rep.inner.diverged || rep.outer.diverged) {
        rep.verdict = GapVerdict::unresolved;
    } else if (rep.gap_strictly_decreasing && boundary_decreasing && rep.final_relative_gap < opts.gap_tol) {
        rep.verdict = GapVerdict::gap_vanishing;
    } else {
        rep.verdict = GapVerdict::gap_persistent;
    }
    return rep;
}

MixedProblemReport mixed_problem_ell(const Reaction& g, const GridPtr& theta0, const RampSchedule& ramp,
                                     const SolveConfig& cfg, const RampOptions& opts) {
    const Grid& grid = *theta0;
    if (grid.count(NodeClass::boundary_graph) == 0 || grid.count(NodeClass::boundary_artificial) == 0)
        throw PreconditionError("mixed_problem_ell: grid needs both graph-type and artificial boundary nodes");

    MixedProblemReport rep;
    // Interior node nearest P among those next to the graph.
    std::size_t probe = grid.size();
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (!grid.interior(k)) continue;
        bool touches = false;
        for (const auto nb : grid.neighbors(k)) touches = touches || grid.node_class[nb] == NodeClass::boundary_graph;
        if (!touches) continue;
        if (probe == grid.size() || std::abs(grid.x(k)) < std::abs(grid.x(probe)) - 1e-12 * grid.h) probe = k;
    }
    if (probe == grid.size()) throw PreconditionError("mixed_problem_ell: no interior node touches the graph");
    rep.graph_probe_node = probe;

    auto ropts = opts;
    ropts.keep_levels = true;
    rep.ramp = ramp_solve(g, theta0, mixed_rule(theta0), ramp, cfg, ropts);
    for (const auto& lv : rep.ramp.levels) rep.graph_probe_trace.push_back(lv[probe]);
    for (std::size_t k = 0; k < grid.size(); ++k)
        if (grid.node_class[k] == NodeClass::boundary_graph)
            rep.graph_trace_sup = std::max(rep.graph_trace_sup, std::abs(rep.ramp.final.field[k]));
    const double first = rep.graph_probe_trace.front();
    rep.graph_probe_diverged = first > 0.0 && rep.graph_probe_trace.back() >= ramp.divergence_factor * first;
    if (!opts.keep_levels) rep.ramp.levels.clear();
    return rep;
}

RetractionReport mixed_problem_retracted(const Reaction& g, const DomainSpec& theta0, double h,
                                         const std::vector<double>& sigmas, const RampSchedule& ramp,
                                         const SolveConfig& cfg) {
    if (theta0.kind != DomainKind::graph_domain) throw PreconditionError("mixed_problem_retracted: needs a graph domain");
    for (std::size_t i = 1; i < sigmas.size(); ++i)
        if (!(sigmas[i] < sigmas[i - 1])) throw PreconditionError("mixed_problem_retracted: sigmas must decrease");

    RetractionReport rep;
    rep.sigmas = sigmas;
    for (const double sigma : sigmas) {
        if (sigma < 0.0) throw PreconditionError("mixed_problem_retracted: sigma must be nonnegative");
        const double lowered = std::floor(sigma / h + 1e-9) * h;
        if (lowered < 0.5 * sigma - 1e-12)
            throw PreconditionError("mixed_problem_retracted: sigma " + fmt(sigma) + " is below the spacing");
        auto spec = theta0;
        spec.graph.offset -= lowered;
        const auto raw = build_grid(spec, h);
        rep.grids.push_back(with_distance(raw, base_distance(*raw, theta0)));
    }
    rep.runs.resize(sigmas.size());
    parallel_each(static_cast<int>(sigmas.size()), [&](int i) {
        RampOptions opts;
        opts.keep_levels = true;
        rep.runs[static_cast<std::size_t>(i)] =
            mixed_problem_ell(g, rep.grids[static_cast<std::size_t>(i)], ramp, cfg, opts);
    });

    for (std::size_t i = 0; i + 1 < sigmas.size(); ++i) {
        const auto& small = rep.runs[i].ramp.levels;
        const auto& large = rep.runs[i + 1].ramp.levels;
        const Grid& sg = *rep.grids[i];
        const std::size_t common = std::min(small.size(), large.size());
        for (std::size_t lv = 0; lv < common; ++lv) {
            const auto upper = restrict_to(large[lv], rep.grids[i]);
            for (std::size_t k = 0; k < sg.size(); ++k) {
                if (!sg.active(k)) continue;
                const double breach = (small[lv][k] - upper[k]) / scaled(upper[k]);
                rep.worst_violation = std::max(rep.worst_violation, breach);
                ++rep.comparisons;
                if (breach > 2.0 * cfg.newton_tol)
                    throw InvariantBreach("mixed_problem_retracted: l decreased under retraction at (" +
                                          fmt(sg.x(k)) + ", " + fmt(sg.y(k)) + ") by " + fmt(breach));
            }
        }
    }
    return rep;
}

ShiftedTestReport shifted_supersolution_test(const Reaction& nl, const GridField& u_min, const GridField& u_max,
                                             const GridField& ell, int steps, double tol) {
    if (steps < 1) throw PreconditionError("shifted_supersolution_test: steps must be >= 1");
    const Grid& a = *u_min.grid;
    const Grid& t = *ell.grid;
    if (u_max.grid->size() != a.size()) throw PreconditionError("shifted_supersolution_test: u_min and u_max differ");
    if (a.dim != t.dim || std::abs(a.h - t.h) > 1e-12 * a.h)
        throw PreconditionError("shifted_supersolution_test: lattices differ");

    ShiftedTestReport rep;
    rep.max_steps = max_shift_steps(u_min.grid, ell.grid, std::numeric_limits<double>::infinity());
    if (steps > rep.max_steps)
        throw PreconditionError("shifted_supersolution_test: shift by " + std::to_string(steps) +
                                " steps leaves the ambient grid (at most " + std::to_string(rep.max_steps) + ")");
    rep.steps = steps;
    rep.eps = steps * a.h;
    const double dx = a.dim == 1 ? rep.eps : 0.0;
    const double dy = a.dim == 1 ? 0.0 : rep.eps;

    // u_bar on Theta_eps; NaN elsewhere.
    std::vector<double> ubar(a.size(), std::numeric_limits<double>::quiet_NaN());
    std::vector<std::size_t> src_t(a.size(), t.size());
    std::vector<std::size_t> src_a(a.size(), a.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (!a.active(k)) continue;
        const auto tk = t.node_at(a.x(k) + dx, a.y(k) + dy);
        const auto ak = a.node_at(a.x(k) + dx, a.y(k) + dy);
        if (!tk || !t.active(*tk) || !ak || !a.active(*ak)) continue;
        ubar[k] = u_min[*ak] + ell[*tk];
        src_t[k] = *tk;
        src_a[k] = *ak;
    }
    if (std::none_of(ubar.begin(), ubar.end(), [](double v) { return std::isfinite(v); }))
        throw PreconditionError("shifted_supersolution_test: the shifted domain misses the ambient grid");

    rep.supersolution_holds = true;
    rep.dominates = true;
    rep.supersolution_worst = std::numeric_limits<double>::infinity();
    rep.dominance_worst = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (!std::isfinite(ubar[k])) continue;
        ++rep.nodes_checked;
        const double diff = ubar[k] - u_max[k];
        if (diff < rep.dominance_worst) {
            rep.dominance_worst = diff;
            rep.dominance_node = k;
        }
        if (diff < -tol * scaled(u_max[k])) rep.dominates = false;

        if (!a.interior(k) || !t.interior(src_t[k]) || !a.interior(src_a[k])) continue;
        ++rep.interior_checked;
        double floor = 0.0;
        const double r = reaction_residual(nl, a, ubar, k, &floor);
        if (r < rep.supersolution_worst) {
            rep.supersolution_worst = r;
            rep.supersolution_node = k;
        }
        if (r < -(tol + floor)) rep.supersolution_holds = false;
    }
    return rep;
}

int max_shift_steps(const GridPtr& ambient, const GridPtr& theta0, double decay_band) {
    const Grid& a = *ambient;
    const Grid& t = *theta0;
    int best = 0;
    const int limit = static_cast<int>(std::min<double>(std::floor(decay_band / t.h * (1 + 1e-12)),
                                                        static_cast<double>(std::max(t.nx, t.ny))));
    for (int s = 1; s <= limit; ++s) {
        const double dx = t.dim == 1 ? s * t.h : 0.0;
        const double dy = t.dim == 1 ? 0.0 : s * t.h;
        bool inside = true;
        for (std::size_t k = 0; k < t.size() && inside; ++k) {
            if (!t.active(k)) continue;
            const auto ak = a.node_at(t.x(k) - dx, t.y(k) - dy);
            inside = ak && a.active(*ak);
        }
        if (!inside) break;
        best = s;
    }
    return best;
}

PhiGapReport phi_gap_test(const GridField& u1, const GridField& u2, const Gauge& phi,
                          const std::vector<std::pair<double, double>>& bands) {
    const Grid& g = *u1.grid;
    if (u2.values.size() != g.size()) throw PreconditionError("phi_gap_test: fields live on different grids");
    PhiGapReport rep;
    rep.bands = bands;
    for (const auto& [lo, hi] : bands) {
        double worst = 0.0;
        std::size_t n = 0;
        for (std::size_t k = 0; k < g.size(); ++k) {
            if (!g.active(k) || g.distance[k] < lo || g.distance[k] > hi) continue;
            if (!(u1[k] > 0.0))
                throw PreconditionError("phi_gap_test: u1 is not positive at (" + fmt(g.x(k)) + ", " + fmt(g.y(k)) +
                                        ")");
            const double p = phi.phi(u1[k]);
            if (!(p > 0.0)) {
                ++rep.excluded;
                continue;
            }
            worst = std::max(worst, std::abs(u2[k] - u1[k]) / p);
            ++n;
        }
        rep.ratios.push_back(worst);
        rep.counts.push_back(n);
    }
    rep.monotone_decreasing = !rep.ratios.empty();
    for (std::size_t i = 1; i < rep.ratios.size(); ++i)
        rep.monotone_decreasing = rep.monotone_decreasing && rep.ratios[i] <= rep.ratios[i - 1];
    return rep;
}

PhiGapReport phi_gap_test(const GridField& u1, const GridField& u2, const Gauge& phi,
                          const std::vector<std::pair<double, double>>& bands, const Reaction& nl, double eps,
                          double tol) {
    auto rep = phi_gap_test(u1, u2, phi, bands);
    const Grid& g = *u1.grid;
    std::vector<double> v(g.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t k = 0; k < g.size(); ++k)
        if (g.active(k)) v[k] = u1[k] + eps * phi.phi(u1[k]);
    bool holds = true;
    rep.v_worst = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (!g.interior(k)) continue;
        double floor = 0.0;
        const double r = reaction_residual(nl, g, v, k, &floor);
        rep.v_worst = std::min(rep.v_worst, r);
        if (r < -(tol + floor)) holds = false;
    }
    rep.v_supersolution = holds;
    return rep;
}

BarrierProbeReport barrier_probe(const Reaction& nl, const DomainSpec& spec, double zx, double r,
                                 const RampSchedule& ramp, const SolveConfig& cfg, const BarrierOptions& opts) {
    BarrierProbeReport rep;
    rep.z = zx;
    rep.r = r;
    const auto grid = ball_section(spec, zx, r, opts.h);
    const Grid& g = *grid;
    const double zy = spec.graph_at(zx);
    const double tx = zx;
    const double ty = zy - opts.probe_depth * r;
    if (!(opts.probe_depth > 0.0) || r - opts.probe_depth * r < 2.0 * opts.h)
        throw PreconditionError("barrier_probe: probe point lies within 2h of the ball boundary");

    std::size_t probe = g.size();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (!g.interior(k)) continue;
        const double dist = std::hypot(g.x(k) - tx, g.y(k) - ty);
        if (dist < best - 1e-12 * g.h) {
            best = dist;
            probe = k;
        }
    }
    if (probe == g.size()) throw PreconditionError("barrier_probe: ball section has no interior node");
    rep.probe_x = g.x(probe);
    rep.probe_y = g.y(probe);

    RampOptions ropts;
    ropts.probe_node = probe;
    ropts.probe_set = {probe};
    rep.ramp = ramp_solve(nl, grid, mixed_rule(grid), ramp, cfg, ropts);
    const double first = rep.ramp.trace.front().probe_value;
    rep.growth = first > 0.0 ? rep.ramp.trace.back().probe_value / first : std::numeric_limits<double>::infinity();
    switch (rep.ramp.outcome) {
    case RampOutcome::stagnated: rep.verdict = BarrierVerdict::barrier_indicated; break;
    case RampOutcome::diverged: rep.verdict = BarrierVerdict::no_barrier_indicated; break;
    default: rep.verdict = BarrierVerdict::unresolved; break;
    }
    return rep;
}

const char* to_string(RampOutcome o) {
    switch (o) {
    case RampOutcome::stagnated: return "stagnated";
    case RampOutcome::diverged: return "diverged";
    case RampOutcome::resolution_limited: return "resolution_limited";
    case RampOutcome::cap_reached: return "cap_reached";
    }
    return "?";
}

const char* to_string(GapVerdict v) {
    switch (v) {
    case GapVerdict::gap_vanishing: return "gap_vanishing";
    case GapVerdict::gap_persistent: return "gap_persistent";
    case GapVerdict::unresolved: return "unresolved";
    }
    return "?";
}

const char* to_string(BarrierVerdict v) {
    switch (v) {
    case BarrierVerdict::barrier_indicated: return "barrier_indicated";
    case BarrierVerdict::no_barrier_indicated: return "no_barrier_indicated";
    case BarrierVerdict::unresolved: return "unresolved";
    }
    return "?";
}

} // namespace blowup
