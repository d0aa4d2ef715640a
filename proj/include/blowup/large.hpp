#pragma once

#include "blowup/grid.hpp"
#include "blowup/nonlinearity.hpp"
#include "blowup/solver.hpp"

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace blowup {

/// Boundary levels n_k = n0 * factor^k, k < cap, with the stopping rules of a ramp.
struct RampSchedule {
    double n0 = 1.0;
    double factor = 2.0;
    int cap = 40;
    /// Stop when the sup change on the probe set, relative to max(1, |u|), falls below this.
    double stagnation_tol = 1e-6;
    /// Stop when the probe value exceeds this multiple of its first value.
    double divergence_factor = 1e3;
    /// Reject a level once a ramped boundary value exceeds this multiple of an
    /// adjacent interior value (the layer is no longer resolved); <= 0 disables.
    double resolution_ratio = 4.0;

    std::vector<double> levels() const;
};

enum class RampOutcome { stagnated, diverged, resolution_limited, cap_reached };

struct RampStep {
    int index = 0;
    double n = 0.0;
    double probe_value = 0.0;
    double residual_sup = 0.0;
    double probe_change = 0.0;
    double boundary_ratio = 0.0;
};

struct RampResult {
    SolveReport final;
    /// Accepted levels only; a level rejected by the resolution guard is not recorded.
    std::vector<RampStep> trace;
    /// Field per accepted level, when requested.
    std::vector<GridField> levels;
    RampOutcome outcome = RampOutcome::cap_reached;
    std::size_t probe_node = 0;
    std::vector<std::size_t> probe_set;
    /// Largest decrease u_{k-1} - u_k seen at any node (<= 0 when monotone).
    double worst_monotone_violation = -std::numeric_limits<double>::infinity();
    std::size_t monotone_checks = 0;

    int final_index() const { return trace.empty() ? -1 : trace.back().index; }
};

/// Boundary value at `node` for ramp level n.
using BoundaryRule = std::function<double(std::size_t node, double n)>;

struct RampOptions {
    /// Probe node for the trace; defaults to the deepest interior node.
    std::optional<std::size_t> probe_node;
    /// Stagnation probe set; defaults to interior nodes with d >= max d / 2.
    std::vector<std::size_t> probe_set;
    bool keep_levels = false;
};

/// Ramps the boundary data through the schedule, warm-starting every solve from
/// the previous level and asserting nodewise monotonicity in the level.
RampResult ramp_solve(const Reaction& nl, const GridPtr& grid, const BoundaryRule& rule, const RampSchedule& ramp,
                      const SolveConfig& cfg, const RampOptions& opts = {});

/// Boundary data n on every boundary node.
RampResult large_solution_ramp(const Reaction& nl, const GridPtr& grid, const RampSchedule& ramp,
                               const SolveConfig& cfg, const RampOptions& opts = {});

enum class DistanceExtension { clamp_zero, own_distance };

struct DomainSequenceRun {
    DomainSpec base;
    DomainSequence sequence;
    std::vector<GridPtr> grids;
    std::vector<RampResult> ramps;
    /// Level index shared by every ramp in the sequence; comparisons use it.
    int common_level = -1;
    GridPtr comparison_grid;
    /// Each domain's field at the common level restricted to the comparison grid.
    std::vector<GridField> restricted;
    /// Largest breach of the expected ordering between consecutive domains.
    double worst_order_violation = -std::numeric_limits<double>::infinity();
    bool diverged = false;
};

struct SequenceOptions {
    int count = 4;
    double h = 1.0 / 64;
    double margin0 = 0.25;
    double decay = 0.5;
    DistanceExtension extension = DistanceExtension::clamp_zero;
    /// Comparison lattice; defaults to the innermost domain (inner) or the base domain (outer).
    std::optional<DomainSpec> comparison;
};

/// Large solutions on inset domains; restrictions must be nonincreasing in the index.
DomainSequenceRun u_max_via_inner(const Reaction& nl, const DomainSpec& spec, const SequenceOptions& seq,
                                  const RampSchedule& ramp, const SolveConfig& cfg);
/// Large solutions on outset domains; restrictions must be nondecreasing in the index.
DomainSequenceRun u_min_via_outer(const Reaction& nl, const DomainSpec& spec, const SequenceOptions& seq,
                                  const RampSchedule& ramp, const SolveConfig& cfg);

enum class GapVerdict { gap_vanishing, gap_persistent, unresolved };

struct UniquenessReport {
    DomainSequenceRun inner;
    DomainSequenceRun outer;
    std::vector<GridField> u_max_seq;
    std::vector<GridField> u_min_seq;
    std::vector<double> gap_profile;
    std::vector<double> boundary_gap;
    /// sup |u_max| over the probe band of the last pair.
    double field_scale = 0.0;
    double final_relative_gap = 0.0;
    /// Largest u_min - u_max over the comparison lattice and all pairs.
    double worst_ordering = -std::numeric_limits<double>::infinity();
    bool gap_strictly_decreasing = false;
    GapVerdict verdict = GapVerdict::unresolved;
    std::vector<std::string> warnings;
};

struct GapOptions {
    SequenceOptions inner;
    SequenceOptions outer;
    /// Interior probe band in units of distance; defaults to d >= max d / 2.
    std::optional<std::pair<double, double>> probe_band;
    double gap_tol = 1e-3;
};

UniquenessReport uniqueness_gap(const Reaction& nl, const DomainSpec& spec, const GapOptions& opts,
                                const RampSchedule& ramp, const SolveConfig& cfg);

struct MixedProblemReport {
    RampResult ramp;
    /// Trace of a probe next to the graph (Gamma_0 side).
    std::vector<double> graph_probe_trace;
    std::size_t graph_probe_node = 0;
    /// sup of |l| on graph-type boundary nodes (zero data).
    double graph_trace_sup = 0.0;
    bool graph_probe_diverged = false;
};

/// l = 0 on graph-type nodes, l = n on artificial nodes, ramped.
MixedProblemReport mixed_problem_ell(const Reaction& g, const GridPtr& theta0, const RampSchedule& ramp,
                                     const SolveConfig& cfg, const RampOptions& opts = {});

struct RetractionReport {
    std::vector<double> sigmas;
    std::vector<GridPtr> grids;
    std::vector<MixedProblemReport> runs;
    /// Largest breach of l_{n,sigma} <= l_{n',sigma'} (n' >= n, sigma' < sigma).
    double worst_violation = -std::numeric_limits<double>::infinity();
    std::size_t comparisons = 0;
};

/// The mixed problem on retracted domains whose frontier is lowered by a
/// multiple of h in [sigma/2, sigma]; sigmas must be decreasing.
RetractionReport mixed_problem_retracted(const Reaction& g, const DomainSpec& theta0, double h,
                                         const std::vector<double>& sigmas, const RampSchedule& ramp,
                                         const SolveConfig& cfg);

struct ShiftedTestReport {
    int steps = 0;
    double eps = 0.0;
    int max_steps = 0;
    bool supersolution_holds = false;
    double supersolution_worst = 0.0;
    std::size_t supersolution_node = 0;
    bool dominates = false;
    double dominance_worst = 0.0;
    std::size_t dominance_node = 0;
    std::size_t interior_checked = 0;
    std::size_t nodes_checked = 0;

    bool passed() const { return supersolution_holds && dominates; }
};

/// Forms u_bar(x) = u_min(x + eps nu) + l(x + eps nu) on Theta_eps (nodes whose
/// shift lands in the l-grid) and checks that u_bar is a supersolution there and
/// dominates u_max. `tol` absorbs the residuals of the input solves.
ShiftedTestReport shifted_supersolution_test(const Reaction& nl, const GridField& u_min, const GridField& u_max,
                                             const GridField& ell, int steps, double tol);

/// Largest step count for which Theta_eps stays inside the ambient grid and
/// within `decay_band` of the graph (eps <= band).
int max_shift_steps(const GridPtr& ambient, const GridPtr& theta0, double decay_band);

struct PhiGapReport {
    std::vector<std::pair<double, double>> bands;
    std::vector<double> ratios;
    std::vector<std::size_t> counts;
    std::size_t excluded = 0;
    bool monotone_decreasing = false;
    std::optional<bool> v_supersolution;
    double v_worst = 0.0;
};

/// sup over each distance band of |u2 - u1| / phi(u1).
PhiGapReport phi_gap_test(const GridField& u1, const GridField& u2, const Gauge& phi,
                          const std::vector<std::pair<double, double>>& bands);
/// As above, and checks that v = u1 + eps phi(u1) is a discrete supersolution.
PhiGapReport phi_gap_test(const GridField& u1, const GridField& u2, const Gauge& phi,
                          const std::vector<std::pair<double, double>>& bands, const Reaction& nl, double eps,
                          double tol);

enum class BarrierVerdict { barrier_indicated, no_barrier_indicated, unresolved };

struct BarrierProbeReport {
    double z = 0.0;
    double r = 0.0;
    double probe_x = 0.0;
    double probe_y = 0.0;
    RampResult ramp;
    BarrierVerdict verdict = BarrierVerdict::unresolved;
    double growth = 0.0;
};

struct BarrierOptions {
    double h = 1.0 / 64;
    /// Probe depth below z as a fraction of r.
    double probe_depth = 0.5;
};

BarrierProbeReport barrier_probe(const Reaction& nl, const DomainSpec& spec, double zx, double r,
                                 const RampSchedule& ramp, const SolveConfig& cfg, const BarrierOptions& opts = {});

const char* to_string(RampOutcome o);
const char* to_string(GapVerdict v);
const char* to_string(BarrierVerdict v);

} // namespace blowup
