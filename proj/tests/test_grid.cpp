#include "doctest.h"

#include "blowup/error.hpp"
#include "blowup/grid.hpp"

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

} // namespace

TEST_CASE("build_grid node counts") {
    const auto line = build_grid(DomainSpec::interval(0.0, 1.0), 0.25);
    CHECK(line->size() == 5);
    CHECK(line->count(NodeClass::interior) == 3);
    CHECK(line->count(NodeClass::boundary_graph) == 2);

    const auto sq = build_grid(DomainSpec::rectangle(0.0, 1.0, 0.0, 1.0), 0.5);
    CHECK(sq->size() == 9);
    CHECK(sq->count(NodeClass::interior) == 1);
    CHECK(sq->count(NodeClass::boundary_graph) + sq->count(NodeClass::boundary_artificial) == 8);

    CHECK_THROWS_AS(build_grid(DomainSpec::interval(0.0, 1.0), 0.3), PreconditionError);
    CHECK_THROWS_AS(DomainSpec::interval(1.0, 1.0), PreconditionError);
    CHECK_THROWS_AS(build_grid(DomainSpec::interval(0.0, 1.0), 0.0), PreconditionError);
}

TEST_CASE("slab graph domain classification") {
    const auto spec = DomainSpec::graph_domain(zero_graph(), 1.0, 1.0, "zero");
    const auto g = build_grid(spec, 0.25);
    CHECK(g->nx == 9);
    for (std::size_t k = 0; k < g->size(); ++k) {
        const double x = g->x(k);
        const double y = g->y(k);
        if (y > 0.0) CHECK(g->node_class[k] == NodeClass::exterior);
        else if (y == 0.0) CHECK(g->node_class[k] == NodeClass::boundary_graph);
        else if (std::abs(x) == 1.0 || y == -1.0) CHECK(g->node_class[k] == NodeClass::boundary_artificial);
        else CHECK(g->node_class[k] == NodeClass::interior);
    }
    // Every interior node has its full stencil classified.
    for (std::size_t k = 0; k < g->size(); ++k) {
        if (!g->interior(k)) continue;
        CHECK(g->neighbors(k).size() == 4);
        for (auto n : g->neighbors(k)) CHECK(g->active(n));
    }
    CHECK_THROWS_AS(DomainSpec::graph_domain([](double x) { return 1.0 + x; }, 1.0, 1.0), PreconditionError);
}

TEST_CASE("saw graph domain keeps stencils closed") {
    const auto spec = DomainSpec::graph_domain(lipschitz_saw(1.0, 0.5), 1.0, 1.0, "saw");
    const auto g = build_grid(spec, 1.0 / 32);
    for (std::size_t k = 0; k < g->size(); ++k) {
        if (!g->interior(k)) continue;
        CHECK(g->y(k) < spec.graph_at(g->x(k)));
        for (auto n : g->neighbors(k)) CHECK(g->active(n));
    }
    for (std::size_t k = 0; k < g->size(); ++k)
        if (g->node_class[k] == NodeClass::boundary_graph) CHECK(g->distance[k] == 0.0);
}

TEST_CASE("boundary_distance") {
    const auto line = build_grid(DomainSpec::interval(0.0, 1.0), 0.25);
    CHECK(boundary_distance(line)[2] == doctest::Approx(0.5));
    const auto sq = build_grid(DomainSpec::rectangle(0.0, 1.0, 0.0, 1.0), 0.5);
    CHECK(boundary_distance(sq)[4] == doctest::Approx(0.5));
    const auto slab = build_grid(DomainSpec::graph_domain(zero_graph(), 1.0, 1.0), 0.25);
    const auto node = slab->node_at(0.0, -0.25);
    REQUIRE(node);
    CHECK(boundary_distance(slab)[*node] == doctest::Approx(0.25));
}

TEST_CASE("boundary_distance error and Lipschitz bound") {
    const double h = 1.0 / 16;
    const auto g = build_grid(DomainSpec::rectangle(0.0, 1.0, 0.0, 2.0), h);
    const auto d = boundary_distance(g);
    for (std::size_t k = 0; k < g->size(); ++k) {
        const double x = g->x(k);
        const double y = g->y(k);
        const double exact = std::min({x, 1.0 - x, y, 2.0 - y});
        CHECK(std::abs(d[k] - exact) <= h);
        for (auto n : g->neighbors(k)) CHECK(std::abs(d[k] - d[n]) <= h + h);
    }
    // Saw graph: compare with a dense brute-force polyline distance.
    const auto spec = DomainSpec::graph_domain(lipschitz_saw(1.0, 0.5), 1.0, 1.0, "saw");
    const auto sg = build_grid(spec, 1.0 / 16);
    for (std::size_t k = 0; k < sg->size(); k += 7) {
        if (!sg->interior(k)) continue;
        double best = 1e9;
        for (int j = -40000; j <= 40000; ++j) {
            const double x = 2.0 * j / 40000.0;
            best = std::min(best, std::hypot(sg->x(k) - x, sg->y(k) - spec.graph_at(x)));
        }
        CHECK(std::abs(sg->distance[k] - best) <= sg->h);
    }
}

TEST_CASE("laplacian_apply is exact on quadratics") {
    const auto line = build_grid(DomainSpec::interval(0.0, 1.0), 0.25);
    const auto lin = laplacian_apply(from_fn(line, [](double x, double) { return x; }));
    const auto quad = laplacian_apply(from_fn(line, [](double x, double) { return x * x; }));
    for (std::size_t k = 1; k < 4; ++k) {
        CHECK(lin[k] == doctest::Approx(0.0));
        CHECK(quad[k] == doctest::Approx(2.0));
    }
    CHECK(quad[4] == 1.0);

    const auto sq = build_grid(DomainSpec::rectangle(0.0, 1.0, 0.0, 1.0), 0.125);
    const auto q2 = laplacian_apply(from_fn(sq, [](double x, double y) { return x * x + y * y; }));
    for (std::size_t k = 0; k < sq->size(); ++k)
        if (sq->interior(k)) CHECK(q2[k] == doctest::Approx(4.0));
}

TEST_CASE("laplacian_apply is linear") {
    const auto g = build_grid(DomainSpec::rectangle(0.0, 1.0, 0.0, 1.0), 1.0 / 16);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    auto u = GridField::filled(g, 0.0);
    auto v = GridField::filled(g, 0.0);
    for (auto& x : u.values) x = U(rng);
    for (auto& x : v.values) x = U(rng);
    const double a = 0.7;
    const double b = -2.3;
    auto w = u;
    for (std::size_t k = 0; k < w.values.size(); ++k) w.values[k] = a * u[k] + b * v[k];
    const auto Lu = laplacian_apply(u);
    const auto Lv = laplacian_apply(v);
    const auto Lw = laplacian_apply(w);
    for (std::size_t k = 0; k < g->size(); ++k) {
        if (!g->interior(k)) continue;
        CHECK(Lw[k] == doctest::Approx(a * Lu[k] + b * Lv[k]).epsilon(1e-12).scale(1e3));
    }
}

TEST_CASE("shift_field") {
    const auto line = build_grid(DomainSpec::interval(0.0, 1.0), 0.25);
    const auto u = from_fn(line, [](double x, double) { return x; });
    const auto same = shift_field(u, 0);
    CHECK(same.values == u.values);
    const auto up = shift_field(u, 1);
    for (std::size_t k = 0; k < 4; ++k) CHECK(up[k] == doctest::Approx(line->x(k) + 0.25));
    CHECK(std::isnan(up[4]));

    const auto c = shift_field(GridField::filled(line, 3.0), 2);
    for (std::size_t k = 0; k < 3; ++k) CHECK(c[k] == 3.0);

    std::vector<unsigned char> target(line->size(), 1);
    CHECK_THROWS_AS(shift_field(u, 1, target), PreconditionError);
    target[4] = 0;
    CHECK_NOTHROW(shift_field(u, 1, target));

    // In 2-D the shift moves along +y, toward the graph.
    const auto slab = build_grid(DomainSpec::graph_domain(zero_graph(), 1.0, 1.0), 0.25);
    const auto yv = shift_field(from_fn(slab, [](double, double y) { return y; }), 1);
    const auto n = slab->node_at(0.0, -0.5);
    CHECK(yv[*n] == doctest::Approx(-0.25));
}

TEST_CASE("inner and outer domain sequences") {
    const auto base = DomainSpec::interval(0.0, 1.0);
    const auto in = inner_domains(base, 3, 0.01, 0.2, 0.5);
    REQUIRE(in.domains.size() == 3);
    CHECK(in.domains[0].x0 == doctest::Approx(0.2));
    CHECK(in.domains[0].x1 == doctest::Approx(0.8));
    CHECK(in.domains[1].x0 == doctest::Approx(0.1));
    CHECK(in.domains[2].x1 == doctest::Approx(0.95));
    const auto out = outer_domains(base, 3, 0.01, 0.2, 0.5);
    CHECK(out.domains[0].x0 == doctest::Approx(-0.2));
    CHECK(out.domains[2].x1 == doctest::Approx(1.05));

    const auto one = inner_domains(base, 1, 0.01, 0.2);
    CHECK(one.domains.size() == 1);

    const auto dropped = inner_domains(base, 5, 0.05, 0.2, 0.5);
    CHECK(dropped.domains.size() == 2);
    CHECK_FALSE(dropped.warnings.empty());

    const auto rect = DomainSpec::rectangle(0.0, 1.0, 0.0, 1.0);
    const auto rin = inner_domains(rect, 2, 0.05, 0.2, 0.5);
    CHECK(rin.domains[0].y0 == doctest::Approx(0.2));
    CHECK(rin.domains[1].y1 == doctest::Approx(0.9));
}

TEST_CASE("domain sequences nest nodewise at shared spacing") {
    const double h = 1.0 / 32;
    for (const auto& base : {DomainSpec::rectangle(-1.0, 1.0, -1.0, 1.0),
                             DomainSpec::graph_domain(zero_graph(), 1.0, 1.0)}) {
        const auto in = inner_domains(base, 4, h, 0.25, 0.5);
        const auto out = outer_domains(base, 4, h, 0.25, 0.5);
        std::vector<DomainSpec> chain(in.domains.begin(), in.domains.end());
        chain.push_back(base);
        for (auto it = out.domains.rbegin(); it != out.domains.rend(); ++it) chain.push_back(*it);
        for (std::size_t k = 0; k + 1 < chain.size(); ++k) {
            const auto small = build_grid(chain[k], h);
            const auto big = build_grid(chain[k + 1], h);
            for (std::size_t n = 0; n < small->size(); ++n) {
                if (!small->active(n)) continue;
                const auto m = big->node_at(small->x(n), small->y(n));
                REQUIRE(m);
                CHECK(big->interior(*m));
            }
        }
    }
}

TEST_CASE("restrict_to aligned lattices") {
    const double h = 0.125;
    const auto big = build_grid(DomainSpec::interval(-1.0, 1.0), h);
    const auto small = build_grid(DomainSpec::interval(-0.5, 0.5), h);
    const auto u = from_fn(big, [](double x, double) { return x * x; });
    const auto r = restrict_to(u, small);
    for (std::size_t k = 0; k < small->size(); ++k) CHECK(r[k] == doctest::Approx(small->x(k) * small->x(k)));
    CHECK_THROWS_AS(restrict_to(r, big), PreconditionError);
}

TEST_CASE("ball_section grid") {
    const auto spec = DomainSpec::graph_domain(zero_graph(), 1.0, 1.0);
    const double h = 1.0 / 32;
    const auto g = ball_section(spec, 0.0, 0.5, h);
    std::size_t arc = 0;
    for (std::size_t k = 0; k < g->size(); ++k) {
        const double rr = std::hypot(g->x(k), g->y(k));
        if (g->active(k)) {
            CHECK(rr < 0.5);
            CHECK(g->y(k) <= 0.0);
        }
        if (g->node_class[k] == NodeClass::boundary_artificial) {
            ++arc;
            CHECK(rr > 0.5 - 2 * h);
        }
        if (g->interior(k))
            for (auto n : g->neighbors(k)) CHECK(g->active(n));
    }
    CHECK(arc > 0);
    CHECK_THROWS_AS(ball_section(spec, 0.0, 0.1, h), PreconditionError);
}
