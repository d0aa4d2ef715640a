#include "blowup/grid.hpp"

#include "blowup/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace blowup {

namespace {

constexpr double nan_v = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

double seg_distance(double px, double py, double ax, double ay, double bx, double by) {
    const double vx = bx - ax;
    const double vy = by - ay;
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0.0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(px - (ax + t * vx), py - (ay + t * vy));
}

// Unsigned distance from (x, y) to the graph of fn, sampled as a polyline on the
// window where a closer point can exist.
double graph_distance(const DomainSpec& s, double x, double y) {
    const double vertical = std::abs(y - s.graph_at(x));
    if (vertical == 0.0) return 0.0;
    constexpr int segments = 256;
    const double lo = x - vertical;
    const double step = 2.0 * vertical / segments;
    double best = vertical;
    double ax = lo;
    double ay = s.graph_at(ax);
    for (int k = 1; k <= segments; ++k) {
        const double bx = lo + k * step;
        const double by = s.graph_at(bx);
        best = std::min(best, seg_distance(x, y, ax, ay, bx, by));
        ax = bx;
        ay = by;
    }
    return best;
}

std::size_t steps_of(double extent, double h, const char* what) {
    const double n = extent / h;
    const double rounded = std::round(n);
    if (!(rounded >= 1.0) || std::abs(n - rounded) > 1e-9 * std::max(1.0, n))
        throw PreconditionError(std::string("build_grid: spacing ") + fmt(h) + " does not divide the " + what +
                                " extent " + fmt(extent));
    return static_cast<std::size_t>(rounded);
}

} // namespace

DomainSpec DomainSpec::interval(double a, double b) {
    if (!(b > a)) throw PreconditionError("interval: degenerate bounds [" + fmt(a) + ", " + fmt(b) + "]");
    DomainSpec s;
    s.kind = DomainKind::interval;
    s.x0 = a;
    s.x1 = b;
    s.y0 = s.y1 = 0.0;
    return s;
}

DomainSpec DomainSpec::rectangle(double x0, double x1, double y0, double y1) {
    if (!(x1 > x0) || !(y1 > y0)) throw PreconditionError("rectangle: degenerate bounds");
    DomainSpec s;
    s.kind = DomainKind::rectangle;
    s.x0 = x0;
    s.x1 = x1;
    s.y0 = y0;
    s.y1 = y1;
    return s;
}

DomainSpec DomainSpec::graph_domain(ScalarFn F, double rho, double height, std::string label) {
    if (!(rho > 0.0) || !(height > 0.0)) throw PreconditionError("graph_domain: rho and height must be positive");
    if (!F) throw PreconditionError("graph_domain: missing graph function");
    if (std::abs(F(0.0)) > 1e-12) throw PreconditionError("graph_domain: graph must pass through P, F(0) = 0");
    DomainSpec s;
    s.kind = DomainKind::graph_domain;
    s.x0 = -rho;
    s.x1 = rho;
    s.y0 = -height;
    s.y1 = 0.0;
    s.graph.fn = std::move(F);
    s.graph.label = std::move(label);
    return s;
}

double DomainSpec::signed_distance(double x, double y) const {
    switch (kind) {
    case DomainKind::interval:
        return std::min(x - x0, x1 - x);
    case DomainKind::rectangle: {
        const double dx = std::max({x0 - x, 0.0, x - x1});
        const double dy = std::max({y0 - y, 0.0, y - y1});
        if (dx > 0.0 || dy > 0.0) return -std::hypot(dx, dy);
        return std::min({x - x0, x1 - x, y - y0, y1 - y});
    }
    case DomainKind::graph_domain: {
        const double outside = std::max({x0 - x, x - x1, y0 - y, 0.0});
        const double g = graph_distance(*this, x, y);
        if (outside > 0.0) return -outside;
        return y <= graph_at(x) ? g : -g;
    }
    }
    return 0.0;
}

DomainSpec DomainSpec::offset_by(double margin) const {
    DomainSpec s = *this;
    s.x0 -= margin;
    s.x1 += margin;
    if (kind == DomainKind::rectangle) {
        s.y0 -= margin;
        s.y1 += margin;
    } else if (kind == DomainKind::graph_domain) {
        s.y0 -= margin;
        s.graph.offset += margin;
    }
    if (!(s.x1 > s.x0) || (kind != DomainKind::interval && !(s.y1 >= s.y0)))
        throw PreconditionError("offset_by: inset " + fmt(-margin) + " collapses the domain");
    if (kind == DomainKind::graph_domain && !(s.graph.offset - s.y0 > 0.0))
        throw PreconditionError("offset_by: inset " + fmt(-margin) + " collapses the graph domain");
    return s;
}

std::string DomainSpec::describe() const {
    std::ostringstream os;
    os.precision(10);
    switch (kind) {
    case DomainKind::interval: os << "interval[" << x0 << "," << x1 << "]"; break;
    case DomainKind::rectangle: os << "rectangle[" << x0 << "," << x1 << "]x[" << y0 << "," << y1 << "]"; break;
    case DomainKind::graph_domain:
        os << "graph(" << graph.label << ")[" << x0 << "," << x1 << "] depth " << -y0 << " offset " << graph.offset;
        break;
    }
    return os.str();
}

ScalarFn zero_graph() {
    return [](double) { return 0.0; };
}

ScalarFn lipschitz_saw(double slope, double period) {
    if (!(period > 0.0)) throw PreconditionError("lipschitz_saw: period must be positive");
    return [slope, period](double x) {
        const double t = std::abs(x) / period;
        const double frac = t - std::floor(t);
        return slope * period * std::min(frac, 1.0 - frac);
    };
}

ScalarFn table_graph(std::vector<std::pair<double, double>> pts) {
    if (pts.size() < 2) throw PreconditionError("table_graph: need at least two points");
    std::sort(pts.begin(), pts.end());
    auto shared = std::make_shared<const std::vector<std::pair<double, double>>>(std::move(pts));
    return [shared](double x) {
        const auto& t = *shared;
        if (x <= t.front().first) return t.front().second;
        if (x >= t.back().first) return t.back().second;
        auto it = std::upper_bound(t.begin(), t.end(), x,
                                   [](double v, const std::pair<double, double>& e) { return v < e.first; });
        const auto& hi = *it;
        const auto& lo = *(it - 1);
        return lo.second + (x - lo.first) / (hi.first - lo.first) * (hi.second - lo.second);
    };
}

std::size_t Grid::count(NodeClass c) const {
    return static_cast<std::size_t>(std::count(node_class.begin(), node_class.end(), c));
}

std::optional<std::size_t> Grid::node_at(double px, double py) const {
    const double fi = (px - x_origin) / h;
    const double ri = std::round(fi);
    if (std::abs(fi - ri) > 1e-6 || ri < 0.0 || ri >= static_cast<double>(nx)) return std::nullopt;
    double rj = 0.0;
    if (dim == 2) {
        const double fj = (py - y_origin) / h;
        rj = std::round(fj);
        if (std::abs(fj - rj) > 1e-6 || rj < 0.0 || rj >= static_cast<double>(ny)) return std::nullopt;
    }
    return index(static_cast<std::size_t>(ri), static_cast<std::size_t>(rj));
}

std::vector<std::size_t> Grid::neighbors(std::size_t node) const {
    std::vector<std::size_t> out;
    const std::size_t i = col(node);
    const std::size_t j = row(node);
    if (i > 0) out.push_back(node - 1);
    if (i + 1 < nx) out.push_back(node + 1);
    if (dim == 2) {
        if (j > 0) out.push_back(node - nx);
        if (j + 1 < ny) out.push_back(node + nx);
    }
    return out;
}

kernels::Stencil Grid::stencil() const { return {dim, nx, ny, h, mask_}; }

void Grid::refresh_mask() {
    mask_.assign(node_class.size(), 0);
    for (std::size_t k = 0; k < node_class.size(); ++k) mask_[k] = node_class[k] == NodeClass::interior ? 1 : 0;
}

GridField GridField::filled(const GridPtr& grid, double value) {
    GridField f{grid, std::vector<double>(grid->size(), value)};
    for (std::size_t k = 0; k < grid->size(); ++k)
        if (!grid->active(k)) f.values[k] = nan_v;
    return f;
}

namespace {

// Interior nodes need every stencil neighbour classified as non-exterior.
void demote_frontier(Grid& g, NodeClass frontier) {
    std::vector<NodeClass> next = g.node_class;
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (g.node_class[k] != NodeClass::interior) continue;
        const auto nb = g.neighbors(k);
        const std::size_t expected = g.dim == 1 ? 2 : 4;
        bool exposed = nb.size() < expected;
        for (const auto n : nb) exposed = exposed || g.node_class[n] == NodeClass::exterior;
        if (exposed) next[k] = frontier;
    }
    g.node_class = std::move(next);
}

Grid build_box(const DomainSpec& spec, double h) {
    Grid g;
    g.dim = spec.dim();
    g.h = h;
    g.spec = spec;
    g.label = spec.describe();
    g.x_origin = spec.x0;
    g.y_origin = spec.y0;
    g.nx = steps_of(spec.x1 - spec.x0, h, "x") + 1;
    g.ny = g.dim == 2 ? steps_of(spec.y1 - spec.y0, h, "y") + 1 : 1;
    g.node_class.assign(g.size(), NodeClass::interior);
    g.distance.assign(g.size(), 0.0);
    for (std::size_t k = 0; k < g.size(); ++k) {
        const std::size_t i = g.col(k);
        const std::size_t j = g.row(k);
        bool edge = i == 0 || i + 1 == g.nx;
        if (g.dim == 2) edge = edge || j == 0 || j + 1 == g.ny;
        if (edge) {
            g.node_class[k] = NodeClass::boundary_graph;
        } else {
            g.distance[k] = spec.signed_distance(g.x(k), g.y(k));
        }
    }
    return g;
}

Grid build_graph(const DomainSpec& spec, double h) {
    Grid g;
    g.dim = 2;
    g.h = h;
    g.spec = spec;
    g.label = spec.describe();
    g.x_origin = spec.x0;
    g.y_origin = spec.y0;
    g.nx = steps_of(spec.x1 - spec.x0, h, "lateral") + 1;
    steps_of(spec.graph.offset - spec.y0, h, "vertical");

    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < g.nx; ++i) {
        const double x = spec.x0 + static_cast<double>(i) * h;
        const double F = spec.graph_at(x);
        if (!std::isfinite(F)) throw RangeError("x", x, "graph function not finite");
        if (F - spec.y0 < 2.0 * h) throw PreconditionError("build_grid: graph reaches the cylinder bottom at x = " + fmt(x));
        top = std::max(top, F);
    }
    g.ny = static_cast<std::size_t>(std::ceil((top - spec.y0) / h - 1e-9)) + 2;
    g.node_class.assign(g.size(), NodeClass::exterior);
    g.distance.assign(g.size(), 0.0);

    const double tie = 1e-9 * h;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const std::size_t i = g.col(k);
        const std::size_t j = g.row(k);
        const double x = g.x(k);
        const double y = g.y(k);
        const double F = spec.graph_at(x);
        if (y > F + tie) continue;
        if (std::abs(y - F) <= tie) {
            g.node_class[k] = NodeClass::boundary_graph;
        } else if (i == 0 || i + 1 == g.nx || j == 0) {
            g.node_class[k] = NodeClass::boundary_artificial;
            g.distance[k] = graph_distance(spec, x, y);
        } else {
            g.node_class[k] = NodeClass::interior;
            g.distance[k] = graph_distance(spec, x, y);
        }
    }
    demote_frontier(g, NodeClass::boundary_graph);
    for (std::size_t k = 0; k < g.size(); ++k)
        if (g.node_class[k] == NodeClass::boundary_graph) g.distance[k] = 0.0;
    return g;
}

} // namespace

GridPtr build_grid(const DomainSpec& spec, double h) {
    if (!(h > 0.0)) throw PreconditionError("build_grid: spacing must be positive");
    Grid g = spec.kind == DomainKind::graph_domain ? build_graph(spec, h) : build_box(spec, h);
    if (g.count(NodeClass::interior) == 0) throw PreconditionError("build_grid: no interior nodes at h = " + fmt(h));
    g.refresh_mask();
    return std::make_shared<const Grid>(std::move(g));
}

GridPtr with_distance(const GridPtr& grid, std::vector<double> distance) {
    if (distance.size() != grid->size()) throw PreconditionError("with_distance: size mismatch");
    auto g = std::make_shared<Grid>(*grid);
    g->distance = std::move(distance);
    g->refresh_mask();
    return g;
}

GridPtr ball_section(const DomainSpec& spec, double zx, double r, double h) {
    if (spec.kind != DomainKind::graph_domain) throw PreconditionError("ball_section: needs a graph domain");
    if (!(r > 0.0) || !(h > 0.0)) throw PreconditionError("ball_section: radius and spacing must be positive");
    if (2.0 * r / h < 8.0) throw PreconditionError("ball_section: fewer than 8 nodes across the ball");
    const double zy = spec.graph_at(zx);

    Grid g;
    g.dim = 2;
    g.h = h;
    g.spec = spec;
    g.label = "ball_section(z=" + fmt(zx) + ",r=" + fmt(r) + ") of " + spec.describe();
    const double i_lo = std::floor((zx - r - spec.x0) / h) - 1.0;
    const double j_lo = std::floor((zy - r - spec.y0) / h) - 1.0;
    g.x_origin = spec.x0 + i_lo * h;
    g.y_origin = spec.y0 + j_lo * h;
    g.nx = static_cast<std::size_t>(std::ceil((zx + r - g.x_origin) / h)) + 2;
    g.ny = static_cast<std::size_t>(std::ceil((zy + r - g.y_origin) / h)) + 2;
    g.node_class.assign(g.size(), NodeClass::exterior);
    g.distance.assign(g.size(), 0.0);

    const double tie = 1e-9 * h;
    auto in_ball = [&](double x, double y) { return std::hypot(x - zx, y - zy) < r - tie; };
    auto below = [&](double x, double y) { return y <= spec.graph_at(x) + tie; };
    for (std::size_t k = 0; k < g.size(); ++k) {
        const double x = g.x(k);
        const double y = g.y(k);
        if (!in_ball(x, y) || !below(x, y)) continue;
        if (std::abs(y - spec.graph_at(x)) <= tie) {
            g.node_class[k] = NodeClass::boundary_graph;
            continue;
        }
        bool arc = false;
        bool graph_side = false;
        for (const auto n : g.neighbors(k)) {
            arc = arc || !in_ball(g.x(n), g.y(n));
            graph_side = graph_side || !below(g.x(n), g.y(n));
        }
        g.distance[k] = graph_distance(spec, x, y);
        if (arc) {
            g.node_class[k] = NodeClass::boundary_artificial;
        } else if (graph_side) {
            g.node_class[k] = NodeClass::boundary_graph;
            g.distance[k] = 0.0;
        } else {
            g.node_class[k] = NodeClass::interior;
        }
    }
    if (g.count(NodeClass::interior) == 0) throw PreconditionError("ball_section: no interior nodes");
    g.refresh_mask();
    return std::make_shared<const Grid>(std::move(g));
}

GridField boundary_distance(const GridPtr& grid) {
    GridField f{grid, grid->distance};
    for (std::size_t k = 0; k < grid->size(); ++k)
        if (!grid->active(k)) f.values[k] = nan_v;
    return f;
}

GridField laplacian_apply(const GridField& field) {
    GridField out = field;
    kernels::omp::laplacian(field.grid->stencil(), field.values, out.values);
    return out;
}

namespace {

std::optional<std::size_t> shifted_source(const Grid& g, std::size_t node, int steps) {
    const auto i = static_cast<std::int64_t>(g.col(node));
    const auto j = static_cast<std::int64_t>(g.row(node));
    std::int64_t si = i;
    std::int64_t sj = j;
    if (g.dim == 1) si += steps;
    else sj += steps;
    if (si < 0 || sj < 0 || si >= static_cast<std::int64_t>(g.nx) || sj >= static_cast<std::int64_t>(g.ny))
        return std::nullopt;
    const std::size_t src = g.index(static_cast<std::size_t>(si), static_cast<std::size_t>(sj));
    if (!g.active(src)) return std::nullopt;
    return src;
}

} // namespace

GridField shift_field(const GridField& field, int steps) {
    const Grid& g = *field.grid;
    GridField out{field.grid, std::vector<double>(g.size(), nan_v)};
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (!g.active(k)) continue;
        if (const auto src = shifted_source(g, k, steps)) out.values[k] = field.values[*src];
    }
    return out;
}

GridField shift_field(const GridField& field, int steps, std::span<const unsigned char> target) {
    const Grid& g = *field.grid;
    if (target.size() != g.size()) throw PreconditionError("shift_field: target mask size mismatch");
    GridField out{field.grid, std::vector<double>(g.size(), nan_v)};
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (!target[k]) continue;
        const auto src = shifted_source(g, k, steps);
        if (!src)
            throw PreconditionError("shift_field: shift by " + std::to_string(steps) + " escapes the grid at node (" +
                                    fmt(g.x(k)) + ", " + fmt(g.y(k)) + ")");
        out.values[k] = field.values[*src];
    }
    return out;
}

GridField restrict_to(const GridField& field, const GridPtr& target) {
    const Grid& src = *field.grid;
    if (src.dim != target->dim || std::abs(src.h - target->h) > 1e-12 * src.h)
        throw PreconditionError("restrict_to: lattices differ in dimension or spacing");
    GridField out{target, std::vector<double>(target->size(), nan_v)};
    for (std::size_t k = 0; k < target->size(); ++k) {
        if (!target->active(k)) continue;
        const auto s = src.node_at(target->x(k), target->y(k));
        if (!s || !src.active(*s))
            throw PreconditionError("restrict_to: target node (" + fmt(target->x(k)) + ", " + fmt(target->y(k)) +
                                    ") is not covered by the source grid");
        out.values[k] = field.values[*s];
    }
    return out;
}

namespace {

DomainSequence make_sequence(const DomainSpec& spec, int count, double h, double margin0, double decay, double sign) {
    if (count < 1) throw PreconditionError("domain sequence: count must be >= 1");
    if (!(h > 0.0) || !(margin0 > 0.0) || !(decay > 0.0 && decay < 1.0))
        throw PreconditionError("domain sequence: need h > 0, margin0 > 0, 0 < decay < 1");
    DomainSequence seq;
    double last = std::numeric_limits<double>::infinity();
    for (int k = 0; k < count; ++k) {
        const double raw = margin0 * std::pow(decay, k);
        const double m = std::round(raw / h) * h;
        if (m < 2.0 * h - 1e-12 * h) {
            seq.warnings.push_back("margin " + fmt(raw) + " is below 2h at h = " + fmt(h) + "; domain dropped");
            continue;
        }
        if (std::abs(m - last) < 1e-12 * h) {
            seq.warnings.push_back("margin " + fmt(raw) + " rounds onto the previous margin; domain dropped");
            continue;
        }
        seq.domains.push_back(spec.offset_by(sign * m));
        seq.margins.push_back(m);
        last = m;
    }
    return seq;
}

} // namespace

DomainSequence inner_domains(const DomainSpec& spec, int count, double h, double margin0, double decay) {
    return make_sequence(spec, count, h, margin0, decay, -1.0);
}

DomainSequence outer_domains(const DomainSpec& spec, int count, double h, double margin0, double decay) {
    return make_sequence(spec, count, h, margin0, decay, 1.0);
}

const char* to_string(NodeClass c) {
    switch (c) {
    case NodeClass::interior: return "interior";
    case NodeClass::boundary_graph: return "boundary_graph";
    case NodeClass::boundary_artificial: return "boundary_artificial";
    case NodeClass::exterior: return "exterior";
    }
    return "?";
}

const char* to_string(DomainKind k) {
    switch (k) {
    case DomainKind::interval: return "interval";
    case DomainKind::rectangle: return "rectangle";
    case DomainKind::graph_domain: return "graph_domain";
    }
    return "?";
}

} // namespace blowup
