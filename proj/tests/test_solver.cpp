#include "doctest.h"

#include "blowup/error.hpp"
#include "blowup/solver.hpp"

#include <cmath>
#include <random>

using namespace blowup;

namespace {

GridField from_fn(const GridPtr& g, auto fn) {
    auto f = GridField::filled(g, 0.0);
    for (std::size_t k = 0; k < g->size(); ++k)
        if (g->active(k)) f.values[k] = fn(g->x(k), g->y(k));
    return f;
}

double cosh_solution(double x) { return std::cosh(x - 0.5) / std::cosh(0.5); }

double cosh_error(double h) {
    const auto g = build_grid(DomainSpec::interval(0.0, 1.0), h);
    const auto rep = solve_dirichlet(Reaction(power_law(1.0)), GridField::filled(g, 1.0));
    double err = 0.0;
    for (std::size_t k = 0; k < g->size(); ++k) err = std::max(err, std::abs(rep.field[k] - cosh_solution(g->x(k))));
    return err;
}

const Reaction zero_reaction([](double, double) { return 0.0; }, "zero");

} // namespace

TEST_CASE("harmonic data reproduce linear functions") {
    const auto g = build_grid(DomainSpec::interval(0.0, 1.0), 1.0 / 16);
    const auto bc = from_fn(g, [](double x, double) { return x; });
    const auto rep = solve_dirichlet(zero_reaction, bc);
    CHECK(rep.converged);
    for (std::size_t k = 0; k < g->size(); ++k) CHECK(rep.field[k] == doctest::Approx(g->x(k)).epsilon(1e-12));
}

TEST_CASE("linear profile matches the cosh solution to second order") {
    const double e1 = cosh_error(1.0 / 64);
    const double e2 = cosh_error(1.0 / 128);
    CHECK(e1 < 1e-4);
    CHECK(e1 / e2 >= 3.5);
    CHECK(e1 / e2 <= 4.5);
}

TEST_CASE("zero data give the zero solution") {
    const auto g = build_grid(DomainSpec::rectangle(0.0, 1.0, 0.0, 1.0), 1.0 / 8);
    const auto rep = solve_dirichlet(Reaction(power_law(3.0)), GridField::filled(g, 0.0));
    CHECK(rep.converged);
    CHECK(rep.iterations == 0);
    for (std::size_t k = 0; k < g->size(); ++k) CHECK(rep.field[k] == 0.0);
}

TEST_CASE("residual examples") {
    const auto g = build_grid(DomainSpec::interval(0.0, 1.0), 0.25);
    const auto c = residual(zero_reaction, GridField::filled(g, 2.0));
    for (std::size_t k = 1; k < 4; ++k) CHECK(c[k] == 0.0);
    const auto q = residual(zero_reaction, from_fn(g, [](double x, double) { return x * x; }));
    for (std::size_t k = 1; k < 4; ++k) CHECK(q[k] == doctest::Approx(-2.0));
}

TEST_CASE("supersolution and subsolution checks") {
    const auto g = build_grid(DomainSpec::interval(0.0, 1.0), 1.0 / 32);
    const Reaction cube(power_law(3.0));
    const auto big = GridField::filled(g, 10.0);
    CHECK(is_supersolution(cube, big, 0.0).holds);
    CHECK_FALSE(is_subsolution(cube, big, 0.0).holds);

    // Harmonic minus a positive bump: -Lap of the bump is negative at its peak.
    auto bumped = from_fn(g, [](double x, double) { return x - 0.1 * std::exp(-100.0 * (x - 0.5) * (x - 0.5)); });
    const auto sup = is_supersolution(zero_reaction, bumped, 1e-12);
    CHECK_FALSE(sup.holds);
    CHECK(residual(zero_reaction, bumped)[sup.worst_node] == sup.worst);
    CHECK(sup.worst < 0.0);
    CHECK(std::abs(g->x(sup.worst_node) - 0.5) < 0.1);

    auto raised = from_fn(g, [](double x, double) { return x + 0.1 * std::exp(-100.0 * (x - 0.5) * (x - 0.5)); });
    const auto sub = is_subsolution(zero_reaction, raised, 1e-12);
    CHECK_FALSE(sub.holds);
    CHECK(sub.worst > 0.0);

    const auto rep = solve_dirichlet(cube, GridField::filled(g, 3.0));
    CHECK(is_supersolution(cube, rep.field, 1e-9).holds);
    CHECK(is_subsolution(cube, rep.field, 1e-9).holds);
    CHECK(rep.bracket_sub);
    CHECK(rep.bracket_super);
}

TEST_CASE("energy never increases across accepted steps") {
    const auto g = build_grid(DomainSpec::rectangle(0.0, 1.0, 0.0, 1.0), 1.0 / 16);
    const auto rep = solve_dirichlet(Reaction(power_law(3.0)), GridField::filled(g, 50.0));
    REQUIRE(rep.converged);
    CHECK(rep.iterations > 1);
    for (std::size_t k = 1; k < rep.energy_trace.size(); ++k)
        CHECK(rep.energy_trace[k] <= rep.energy_trace[k - 1] * (1 + 1e-12) + 1e-12);
    CHECK(rep.residual_sup <= 1e-10 + rep.residual_floor);
}

TEST_CASE("comparison in the boundary data") {
    const auto g = build_grid(DomainSpec::rectangle(0.0, 1.0, 0.0, 1.0), 1.0 / 16);
    const Reaction cube(power_law(3.0));
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(0.0, 5.0);
    for (int trial = 0; trial < 5; ++trial) {
        auto lo = GridField::filled(g, 0.0);
        auto hi = lo;
        for (std::size_t k = 0; k < g->size(); ++k) {
            if (!g->boundary(k)) continue;
            lo.values[k] = U(rng);
            hi.values[k] = lo.values[k] + U(rng);
        }
        const auto a = solve_dirichlet(cube, lo);
        const auto b = solve_dirichlet(cube, hi);
        for (std::size_t k = 0; k < g->size(); ++k) CHECK(a.field[k] <= b.field[k] + 2e-10);
    }
}

TEST_CASE("monotonicity in the nonlinearity") {
    const auto g = build_grid(DomainSpec::interval(-1.0, 1.0), 1.0 / 64);
    const auto bc = GridField::filled(g, 4.0);
    const auto weak = solve_dirichlet(Reaction(power_law(2.0)), bc);
    const auto strong = solve_dirichlet(Reaction(constant_weight(2.0, 3.0)), bc);
    for (std::size_t k = 0; k < g->size(); ++k) CHECK(strong.field[k] <= weak.field[k] + 2e-10);
}

TEST_CASE("uniqueness from different initial iterates") {
    const auto g = build_grid(DomainSpec::rectangle(0.0, 1.0, 0.0, 1.0), 1.0 / 16);
    const Reaction sq(power_law(2.0));
    const auto bc = GridField::filled(g, 7.0);
    const auto a = solve_dirichlet(sq, bc);
    const auto b = solve_dirichlet(sq, bc, {}, GridField::filled(g, 100.0));
    for (std::size_t k = 0; k < g->size(); ++k) CHECK(std::abs(a.field[k] - b.field[k]) <= 2e-10);
}

TEST_CASE("flat and kinked nonlinearities") {
    const auto g = build_grid(DomainSpec::interval(0.0, 1.0), 1.0 / 64);
    const Reaction stair(staircase_counterexample(3, 2));
    const auto rep = solve_dirichlet(stair, GridField::filled(g, 300.0));
    CHECK(rep.converged);
    const auto table = custom_table({{0.0, 0.0}, {1.0, 1.0}, {2.0, 1.0}, {3.0, 10.0}, {1e6, 1e7}});
    const auto t = solve_dirichlet(Reaction(table), GridField::filled(g, 5.0));
    CHECK(t.converged);
}

TEST_CASE("solver preconditions and failure modes") {
    const auto g = build_grid(DomainSpec::interval(0.0, 1.0), 1.0 / 16);
    const Reaction decreasing([](double, double r) { return -r; }, "decreasing");
    CHECK_THROWS_AS(solve_dirichlet(decreasing, GridField::filled(g, 1.0)), PreconditionError);
    auto nonmono = power_law(2.0);
    nonmono.monotone_in_r = false;
    CHECK_THROWS_AS(solve_dirichlet(Reaction(nonmono), GridField::filled(g, 1.0)), PreconditionError);
    auto inf_bc = GridField::filled(g, 1.0);
    inf_bc.values[0] = INFINITY;
    CHECK_THROWS_AS(solve_dirichlet(zero_reaction, inf_bc), PreconditionError);

    SolveConfig cfg;
    cfg.newton_max_iter = 1;
    cfg.fallback = false;
    try {
        solve_dirichlet(Reaction(power_law(3.0)), GridField::filled(g, 1e4), cfg);
        FAIL("expected a stall");
    } catch (const SolveError& e) {
        CHECK(e.best().values.size() == g->size());
        CHECK(e.residual() > 0.0);
    }
    cfg.fallback = true;
    cfg.newton_max_iter = 2;
    const auto rep = solve_dirichlet(Reaction(power_law(3.0)), GridField::filled(g, 10.0), cfg);
    CHECK(rep.used_fallback);
    CHECK(rep.converged);
}

TEST_CASE("monotone_iterate") {
    const auto g = build_grid(DomainSpec::interval(0.0, 1.0), 1.0 / 32);
    SUBCASE("zero data converge to zero") {
        const Reaction cube(power_law(3.0));
        const auto z = GridField::filled(g, 0.0);
        const auto rep = monotone_iterate(cube, z, z, z);
        CHECK(rep.converged);
        CHECK(rep.iterations == 0);
    }
    SUBCASE("cross-check against Newton") {
        const Reaction lin(power_law(1.0));
        const auto bc = GridField::filled(g, 1.0);
        const auto newton = solve_dirichlet(lin, bc);
        const auto mono = monotone_iterate(lin, bc, GridField::filled(g, 0.0), GridField::filled(g, 1.0));
        CHECK(mono.converged);
        for (std::size_t k = 0; k < g->size(); ++k)
            CHECK(std::abs(mono.field[k] - newton.field[k]) <= 2e-10);
    }
    SUBCASE("exact bracket returns immediately") {
        const Reaction lin(power_law(1.0));
        const auto bc = GridField::filled(g, 1.0);
        const auto exact = solve_dirichlet(lin, bc).field;
        const auto rep = monotone_iterate(lin, bc, exact, exact);
        CHECK(rep.iterations == 0);
    }
    SUBCASE("bad brackets are rejected") {
        const Reaction lin(power_law(1.0));
        const auto bc = GridField::filled(g, 1.0);
        CHECK_THROWS_AS(monotone_iterate(lin, bc, GridField::filled(g, 2.0), GridField::filled(g, 1.0)),
                        PreconditionError);
        CHECK_THROWS_AS(monotone_iterate(lin, bc, GridField::filled(g, 0.0), GridField::filled(g, 0.5)),
                        PreconditionError);
    }
}

TEST_CASE("discrete energy of a known field") {
    // u = x on [0,1] with f = 0: h * sum (1/h)^2 / 2 over all edges = 1/2.
    const auto g = build_grid(DomainSpec::interval(0.0, 1.0), 0.125);
    const auto u = from_fn(g, [](double x, double) { return x; });
    CHECK(discrete_energy(zero_reaction, u) == doctest::Approx(0.5));
}
