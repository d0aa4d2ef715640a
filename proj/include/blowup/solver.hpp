#pragma once

#include "blowup/error.hpp"
#include "blowup/grid.hpp"
#include "blowup/nonlinearity.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace blowup {

/// The reaction seen by the solver: f(d, r) for every real r. Below r = 0 the
/// value at 0 is held constant, which keeps f nondecreasing.
class Reaction {
public:
    Reaction(const NonlinearitySpec& spec);
    Reaction(const GTransform& g);
    Reaction(ReactionFn fn, std::string label, bool monotone = true);

    double operator()(double d, double r) const { return fn_(d, r < 0.0 ? 0.0 : r); }
    const std::string& label() const { return label_; }
    bool claimed_monotone() const { return monotone_; }
    ReactionFn function() const;

private:
    ReactionFn fn_;
    std::string label_;
    bool monotone_ = true;
};

struct SolveConfig {
    double newton_tol = 1e-10;
    int newton_max_iter = 200;
    double damping = 0.5;
    int max_backtracks = 40;
    bool fallback = true;
    /// Added to the linearized diagonal; keeps flat stretches of f well posed.
    double slope_floor = 1e-8;
    int monotone_max_iter = 20000;
};

struct BracketCheck {
    bool holds = true;
    /// Most violating residual value and where it occurs (interior nodes only).
    double worst = 0.0;
    std::size_t worst_node = 0;
};

struct SolveReport {
    GridField field;
    /// sup over interior nodes of |-Lap u + f(x, u)|.
    double residual_sup = 0.0;
    /// Largest roundoff allowance 16 eps * (stencil magnitude) met at convergence.
    double residual_floor = 0.0;
    int iterations = 0;
    double energy = 0.0;
    std::vector<double> energy_trace;
    bool converged = false;
    bool used_fallback = false;
    bool bracket_sub = false;
    bool bracket_super = false;
};

/// Newton stalled with fallback disabled; carries the best iterate.
class SolveError : public Error {
public:
    SolveError(const std::string& what, GridField best, double residual)
        : Error(what), best_(std::move(best)), residual_(residual) {}
    const GridField& best() const noexcept { return best_; }
    double residual() const noexcept { return residual_; }

private:
    GridField best_;
    double residual_;
};

/// -Lap u + f(x, u) on interior nodes, 0 on boundary nodes, NaN outside.
GridField residual(const Reaction& nl, const GridField& field);

BracketCheck is_supersolution(const Reaction& nl, const GridField& field, double tol);
BracketCheck is_subsolution(const Reaction& nl, const GridField& field, double tol);

/// Discrete energy h^N [ 1/2 sum_edges (du/h)^2 + sum_nodes G(d, u) ], G' = f.
double discrete_energy(const Reaction& nl, const GridField& field);

/// Unique solution of -Lap u + f(x, u) = 0 with u = boundary on boundary nodes.
/// `initial` defaults to the discrete harmonic extension of the boundary data.
SolveReport solve_dirichlet(const Reaction& nl, const GridField& boundary, const SolveConfig& cfg = {},
                            const std::optional<GridField>& initial = std::nullopt);

/// Shifted monotone scheme (-Lap + lambda) u_{m+1} = lambda u_m - f(u_m) started
/// from `super`; iterates stay in [sub, super].
SolveReport monotone_iterate(const Reaction& nl, const GridField& boundary, const GridField& sub,
                             const GridField& super, const SolveConfig& cfg = {});

GridField harmonic_extension(const GridField& boundary);

} // namespace blowup
