#pragma once

#include "blowup/kernels.hpp"
#include "blowup/nonlinearity.hpp"

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace blowup {

enum class DomainKind { interval, rectangle, graph_domain };

/// Local graph geometry: the domain is {y < F(x) + offset} inside the cylinder
/// [x0, x1] x (y0, ...). The boundary point P sits at the origin, F(0) = 0.
struct GraphSpec {
    ScalarFn fn;
    std::string label = "zero";
    double offset = 0.0;
};

struct DomainSpec {
    DomainKind kind = DomainKind::interval;
    double x0 = 0.0;
    double x1 = 1.0;
    double y0 = 0.0;
    double y1 = 1.0;
    GraphSpec graph;

    static DomainSpec interval(double a, double b);
    static DomainSpec rectangle(double x0, double x1, double y0, double y1);
    /// Cylinder of half-width rho and depth height around P = (0, 0).
    static DomainSpec graph_domain(ScalarFn F, double rho, double height, std::string label = "custom");

    int dim() const { return kind == DomainKind::interval ? 1 : 2; }
    double graph_at(double x) const { return graph.fn(x) + graph.offset; }
    /// Distance to the true boundary, positive inside and negative outside. For
    /// graph domains the true boundary is the graph; the cylinder walls are artificial.
    double signed_distance(double x, double y = 0.0) const;
    /// Outset (margin > 0) or inset (margin < 0) copy.
    DomainSpec offset_by(double margin) const;
    std::string describe() const;
};

/// Zero graph, a symmetric Lipschitz saw, or a tabulated polyline.
ScalarFn zero_graph();
ScalarFn lipschitz_saw(double slope, double period);
ScalarFn table_graph(std::vector<std::pair<double, double>> pts);

enum class NodeClass : unsigned char {
    interior,
    boundary_graph,      ///< Gamma_0 type: on or just below the graph (true boundary)
    boundary_artificial, ///< Gamma_inf type: cylinder sides/bottom, ball arcs
    exterior
};

class Grid {
public:
    int dim = 1;
    std::size_t nx = 0;
    std::size_t ny = 1;
    double h = 1.0;
    double x_origin = 0.0;
    double y_origin = 0.0;
    std::vector<NodeClass> node_class;
    /// d(x) per node; zero on true-boundary nodes, unused on exterior nodes.
    std::vector<double> distance;
    DomainSpec spec;
    std::string label;

    std::size_t size() const { return nx * ny; }
    std::size_t index(std::size_t i, std::size_t j = 0) const { return j * nx + i; }
    std::size_t col(std::size_t node) const { return node % nx; }
    std::size_t row(std::size_t node) const { return node / nx; }
    double x(std::size_t node) const { return x_origin + static_cast<double>(col(node)) * h; }
    double y(std::size_t node) const { return dim == 1 ? 0.0 : y_origin + static_cast<double>(row(node)) * h; }

    bool interior(std::size_t node) const { return node_class[node] == NodeClass::interior; }
    bool boundary(std::size_t node) const {
        return node_class[node] == NodeClass::boundary_graph || node_class[node] == NodeClass::boundary_artificial;
    }
    bool active(std::size_t node) const { return node_class[node] != NodeClass::exterior; }
    std::size_t count(NodeClass c) const;

    /// Lattice node at physical coordinates, if one exists within 1e-6 h.
    std::optional<std::size_t> node_at(double x, double y = 0.0) const;
    /// Stencil neighbours of an interior node (2 in 1-D, 4 in 2-D).
    std::vector<std::size_t> neighbors(std::size_t node) const;

    kernels::Stencil stencil() const;
    std::span<const unsigned char> interior_mask() const { return mask_; }
    void refresh_mask();

private:
    std::vector<unsigned char> mask_;
};

using GridPtr = std::shared_ptr<const Grid>;

/// Nodal values on a grid; exterior entries are NaN. `+inf` marks a ramped
/// ("infinite") boundary value.
struct GridField {
    GridPtr grid;
    std::vector<double> values;

    static GridField filled(const GridPtr& grid, double value);
    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }
};

GridPtr build_grid(const DomainSpec& spec, double h);
/// Copy of `grid` whose distance field is replaced (used for domain sequences,
/// where the reaction sees the distance to the original boundary).
GridPtr with_distance(const GridPtr& grid, std::vector<double> distance);
/// Lattice realization of B_r(z) intersected with a graph domain, z = (zx, F(zx)).
/// Arc nodes are Gamma_inf type, graph-side nodes Gamma_0 type.
GridPtr ball_section(const DomainSpec& spec, double zx, double r, double h);

GridField boundary_distance(const GridPtr& grid);
GridField laplacian_apply(const GridField& field);
/// Samples the field at x + steps*h*nu (nu = +x in 1-D, +y in 2-D). Nodes whose
/// source is missing are NaN.
GridField shift_field(const GridField& field, int steps);
/// As above; throws if a node flagged in `target` has no source.
GridField shift_field(const GridField& field, int steps, std::span<const unsigned char> target);
/// Values of `field` at the lattice points of `target`; both lattices must align.
GridField restrict_to(const GridField& field, const GridPtr& target);

struct DomainSequence {
    std::vector<DomainSpec> domains;
    std::vector<double> margins;
    std::vector<std::string> warnings;
};

/// Insets by margins margin0 * decay^k rounded to multiples of h; margins under 2h are dropped.
DomainSequence inner_domains(const DomainSpec& spec, int count, double h, double margin0, double decay = 0.5);
DomainSequence outer_domains(const DomainSpec& spec, int count, double h, double margin0, double decay = 0.5);

const char* to_string(NodeClass c);
const char* to_string(DomainKind k);

} // namespace blowup
