#include "doctest.h"

#include "blowup/error.hpp"
#include "blowup/large.hpp"

#include <cmath>

using namespace blowup;

namespace {

const Reaction zero_reaction([](double, double) { return 0.0; }, "zero");

RampSchedule schedule(double stagnation_tol = 1e-6) {
    RampSchedule r;
    r.stagnation_tol = stagnation_tol;
    return r;
}

DomainSpec slab(double rho = 1.0, double height = 1.0) { return DomainSpec::graph_domain(zero_graph(), rho, height, "zero"); }

} // namespace

TEST_CASE("ramp levels") {
    RampSchedule r;
    r.n0 = 3.0;
    r.factor = 2.0;
    r.cap = 4;
    CHECK(r.levels() == std::vector<double>{3.0, 6.0, 12.0, 24.0});
}

TEST_CASE("harmonic ramp diverges linearly") {
    const auto g = build_grid(DomainSpec::interval(0.0, 1.0), 1.0 / 16);
    const auto r = large_solution_ramp(zero_reaction, g, schedule(), {});
    CHECK(r.outcome == RampOutcome::diverged);
    for (const auto& s : r.trace) CHECK(s.probe_value == doctest::Approx(s.n).epsilon(1e-9));
    CHECK(r.worst_monotone_violation <= 0.0);
}

TEST_CASE("linear reaction has no large solution") {
    const auto g = build_grid(DomainSpec::interval(0.0, 1.0), 1.0 / 32);
    const auto r = large_solution_ramp(Reaction(power_law(1.0)), g, schedule(), {});
    CHECK(r.outcome == RampOutcome::diverged);
    const double ratio = std::cosh(0.0) / std::cosh(0.5);
    CHECK(r.trace.back().probe_value / r.trace.back().n == doctest::Approx(ratio).epsilon(1e-3));
}

TEST_CASE("cubic ramp matches the boundary rate") {
    const double h = 1.0 / 256;
    const auto g = build_grid(DomainSpec::interval(0.0, 1.0), h);
    const auto r = large_solution_ramp(Reaction(power_law(3.0)), g, schedule(), {});
    CHECK(r.outcome == RampOutcome::resolution_limited);
    CHECK(r.worst_monotone_violation <= 0.0);
    for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i].probe_value >= r.trace[i - 1].probe_value);
    double dev = 0.0;
    for (std::size_t k = 0; k < g->size(); ++k) {
        const double d = g->distance[k];
        if (!g->interior(k) || d < 4 * h - 1e-12 || d > 16 * h + 1e-12) continue;
        dev = std::max(dev, std::abs(r.final.field[k] * d / std::sqrt(2.0) - 1.0));
    }
    CHECK(dev < 0.03);
    CHECK(r.trace.back().boundary_ratio <= 4.0);
}

TEST_CASE("resolution guard can be disabled") {
    const auto g = build_grid(DomainSpec::interval(0.0, 1.0), 1.0 / 32);
    auto sched = schedule();
    sched.resolution_ratio = 0.0;
    sched.cap = 8;
    const auto r = large_solution_ramp(Reaction(power_law(3.0)), g, sched, {});
    CHECK(r.outcome == RampOutcome::cap_reached);
    CHECK(r.trace.size() == 8);
}

TEST_CASE("coarse stagnation tolerance stops the ramp") {
    const auto g = build_grid(DomainSpec::interval(0.0, 1.0), 1.0 / 64);
    const auto r = large_solution_ramp(Reaction(power_law(3.0)), g, schedule(5e-2), {});
    CHECK(r.outcome == RampOutcome::stagnated);
    CHECK(r.trace.back().probe_change <= 5e-2);
}

TEST_CASE("kept levels and custom boundary rule") {
    const auto g = build_grid(DomainSpec::interval(0.0, 1.0), 1.0 / 16);
    auto sched = schedule();
    sched.cap = 3;
    RampOptions o;
    o.keep_levels = true;
    const auto r = ramp_solve(zero_reaction, g, [&](std::size_t k, double n) { return g->x(k) < 0.5 ? 0.0 : n; },
                              sched, {}, o);
    REQUIRE(r.levels.size() == 3);
    for (std::size_t k = 0; k < g->size(); ++k)
        CHECK(r.levels[2][k] == doctest::Approx(4.0 * g->x(k)).epsilon(1e-9));
}

TEST_CASE("domain sequences are ordered") {
    const Reaction f(power_law(3.0));
    SequenceOptions o;
    o.count = 3;
    o.h = 1.0 / 128;
    o.margin0 = 1.0 / 16;
    const auto spec = DomainSpec::interval(0.0, 1.0);
    const auto inner = u_max_via_inner(f, spec, o, schedule(), {});
    const auto outer = u_min_via_outer(f, spec, o, schedule(), {});
    CHECK(inner.restricted.size() == 3);
    CHECK(outer.restricted.size() == 3);
    CHECK(inner.worst_order_violation <= 1e-9);
    CHECK(outer.worst_order_violation <= 1e-9);
    CHECK(inner.common_level >= 0);
}

TEST_CASE("uniqueness gap shrinks along the sequences") {
    GapOptions o;
    for (auto* q : {&o.inner, &o.outer}) {
        q->count = 3;
        q->h = 1.0 / 256;
        q->margin0 = 1.0 / 16;
    }
    const auto rep = uniqueness_gap(Reaction(power_law(3.0)), DomainSpec::interval(0.0, 1.0), o, schedule(), {});
    REQUIRE(rep.gap_profile.size() == 3);
    CHECK(rep.gap_strictly_decreasing);
    CHECK(rep.worst_ordering <= 1e-9);
    CHECK(rep.verdict != GapVerdict::unresolved);
}

TEST_CASE("mixed problem vanishes on the graph and is ordered under retraction") {
    const auto g = g_transform(weighted_power(3.0, 1.0), std::vector<double>{0.0, 1.0}, 10.0, 50);
    CHECK(g.certified_exact);
    const auto theta = slab(0.5, 0.5);
    const auto grid = build_grid(theta, 1.0 / 16);
    const auto rep = mixed_problem_ell(Reaction(g), grid, schedule(), {});
    CHECK(rep.graph_trace_sup == 0.0);
    for (std::size_t k = 0; k < grid->size(); ++k)
        if (grid->active(k)) CHECK(rep.ramp.final.field[k] >= 0.0);
    CHECK_FALSE(rep.graph_probe_diverged);

    const auto ret = mixed_problem_retracted(Reaction(g), theta, 1.0 / 16, {0.25, 0.125}, schedule(), {});
    CHECK(ret.comparisons > 0);
    CHECK(ret.worst_violation <= 1e-9);
}

TEST_CASE("shifted supersolution test") {
    const double h = 1.0 / 32;
    const auto spec = weighted_power(3.0, 1.0);
    const Reaction f(spec);
    const auto amb = build_grid(slab(), h);
    const auto theta = build_grid(slab(0.5, 0.875), h);
    const auto u = large_solution_ramp(f, amb, schedule(), {});
    const auto g = g_transform(spec, std::vector<double>{0.0, 1.0}, 10.0, 50);
    auto ell = mixed_problem_ell(Reaction(g), theta, schedule(), {}).ramp.final.field;
    const double tol = u.final.residual_sup + 1e-9;
    const int eps0 = max_shift_steps(amb, theta, 0.5);
    CHECK(eps0 == 4);

    for (int s : {1, 2, 4}) {
        const auto rep = shifted_supersolution_test(f, u.final.field, u.final.field, ell, s, tol);
        CHECK(rep.passed());
        CHECK(rep.interior_checked > 0);
    }
    CHECK_THROWS_AS(shifted_supersolution_test(f, u.final.field, u.final.field, ell, eps0 + 1, tol), PreconditionError);

    for (auto& v : ell.values) v *= 0.1;
    const auto bad = shifted_supersolution_test(f, u.final.field, u.final.field, ell, eps0, tol);
    CHECK_FALSE(bad.supersolution_holds);
    CHECK_FALSE(bad.dominates);
}

TEST_CASE("phi gap ratios") {
    const auto g = build_grid(DomainSpec::interval(0.0, 1.0), 1.0 / 64);
    auto u1 = GridField::filled(g, 0.0);
    for (std::size_t k = 0; k < g->size(); ++k) u1[k] = 1.0 / std::max(g->distance[k], 1e-3);
    auto u2 = u1;
    for (auto& v : u2.values) v += 0.5;
    const std::vector<std::pair<double, double>> bands{{0.25, 0.5}, {0.125, 0.25}, {0.03125, 0.125}};
    const auto rep = phi_gap_test(u1, u2, log1p_gauge(), bands);
    REQUIRE(rep.ratios.size() == 3);
    CHECK(rep.monotone_decreasing);
    CHECK(rep.ratios[2] == doctest::Approx(0.5 / std::log1p(8.0)).epsilon(1e-12));
    CHECK(phi_gap_test(u1, u1, identity_gauge(), bands).ratios == std::vector<double>{0.0, 0.0, 0.0});

    const auto v = phi_gap_test(u1, u2, identity_gauge(), bands, zero_reaction, 0.1, 1e-9);
    REQUIRE(v.v_supersolution.has_value());
}

TEST_CASE("barrier probe separates weights") {
    RampSchedule r;
    r.n0 = 10.0;
    r.stagnation_tol = 0.25;
    BarrierOptions o;
    o.h = 1.0 / 64;
    const auto yes = barrier_probe(Reaction(constant_weight(2.0, 1.0)), slab(), 0.0, 0.25, r, {}, o);
    CHECK(yes.verdict == BarrierVerdict::barrier_indicated);
    const auto no = barrier_probe(Reaction(exp_decay(2.0, 1.0)), slab(), 0.0, 0.25, r, {}, o);
    CHECK(no.verdict == BarrierVerdict::no_barrier_indicated);
    CHECK(no.growth > yes.growth);
    o.probe_depth = 0.95;
    CHECK_THROWS_AS(barrier_probe(Reaction(power_law(2.0)), slab(), 0.0, 0.25, r, {}, o), PreconditionError);
}
