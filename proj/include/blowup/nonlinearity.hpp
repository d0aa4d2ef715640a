#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace blowup {

using ScalarFn = std::function<double(double)>;
/// Reaction term evaluated at boundary distance `d` and value `r`.
using ReactionFn = std::function<double(double d, double r)>;

enum class NonlinearityKind { separable, general, staircase };

/// Maximal interval on which a staircase profile is constant.
struct FlatInterval {
    double lo = 0.0;
    double hi = 0.0;
    double value = 0.0;
};

/// A reaction term f(x, r) with x entering only through the boundary distance d(x).
///
/// `separable` means f = weight(d) * profile(r) (an absent weight is identically 1);
/// `general` evaluates `reaction(d, r)`; `staircase` is x-independent and carries
/// its flat intervals as metadata.
struct NonlinearitySpec {
    NonlinearityKind kind = NonlinearityKind::separable;
    ScalarFn profile;
    ScalarFn weight;
    ReactionFn reaction;
    bool monotone_in_r = true;
    bool vanishes_at_zero = true;
    double r_max = std::numeric_limits<double>::infinity();
    std::string family;
    std::vector<FlatInterval> flats;

    double profile_at(double r) const;
    double weight_at(double d) const;
};

/// f(x, r) at boundary distance d. Throws RangeError for r < 0, d < 0 or r > r_max.
double eval_f(const NonlinearitySpec& spec, double d, double r);

// Families used throughout the experiments. Weights are functions of d.
NonlinearitySpec power_law(double p);                        // r^p
NonlinearitySpec weighted_power(double p, double alpha);     // d^alpha r^p
NonlinearitySpec exp_decay(double p, double kappa);          // exp(-kappa/d) r^p
NonlinearitySpec exp_alpha_decay(double p, double alpha);    // exp(-1/d^alpha) r^p
NonlinearitySpec constant_weight(double p, double weight);   // c r^p
NonlinearitySpec custom_table(std::vector<std::pair<double, double>> table);
NonlinearitySpec general_reaction(ReactionFn fn, std::string label, bool vanishes_at_zero = true);

/// Nondecreasing profile squeezed between min(u^2,u^3) and max(u^2,u^3) with
/// `n_intervals` flat intervals whose lengths grow without bound. Placement is a
/// deterministic function of `seed`.
NonlinearitySpec staircase_counterexample(int n_intervals, std::uint64_t seed);

/// Sampled increment floor g(x, l) = inf_{u >= 0} f(x, l + u) - f(x, u).
struct GTransform {
    std::shared_ptr<const NonlinearitySpec> source;
    std::vector<double> ell_grid;
    /// Distance classes; a single entry 0 for separable or x-independent sources.
    std::vector<double> d_grid;
    /// values[d_index][ell_index]; for separable sources the weight is factored out.
    std::vector<std::vector<double>> values;
    /// Sample u attaining the minimum, per (d_index, ell_index).
    std::vector<std::vector<double>> argmin_u;
    double u_search_max = 0.0;
    bool certified_exact = false;
    /// Set when a negative increment beyond tolerance was clamped to zero.
    bool nonmonotone_warning = false;

    /// g at (d, r). Exact f when certified; otherwise linear interpolation in l
    /// from g(0) = 0 with constant extrapolation past the last sampled l.
    double value(double d, double r) const;
};

GTransform g_transform(const NonlinearitySpec& spec, std::span<const double> ell_grid, double u_search_max,
                       std::size_t u_samples, std::span<const double> d_grid = {});

/// The u-sample used by g_transform: 0 followed by a geometric sweep up to u_search_max.
std::vector<double> increment_search_points(double u_search_max, std::size_t u_samples);

enum class KoOutcome { converges, diverges, inconclusive };

struct KoOptions {
    int max_doublings = 64;
    /// Fitted tail exponents at or below 1 + margin count as non-integrable.
    double exponent_margin = 0.02;
    /// Consecutive non-integrable doublings before `diverges` is declared.
    int divergence_streak = 8;
    /// Consecutive stable extrapolations before `converges` is declared.
    int stable_streak = 3;
};

struct KoVerdict {
    KoOutcome verdict = KoOutcome::inconclusive;
    double a = 0.0;
    double a_requested = 0.0;
    bool a_shifted = false;
    bool degenerate = false;
    double integral_estimate = std::numeric_limits<double>::quiet_NaN();
    double tail_exponent = std::numeric_limits<double>::quiet_NaN();
    double truncation = 0.0;
    double partial_integral = 0.0;
    int doublings = 0;
};

/// Keller-Osserman test: integrability of 1/sqrt(F(s) - F(a)) on (a, inf),
/// F the antiderivative of `profile`.
KoVerdict ko_integral(const ScalarFn& profile, double a, double tail_bound, double tol, const KoOptions& opts = {});

/// Pointwise minimum of f over a distance band, tabulated on r_grid and callable
/// anywhere (the call evaluates the same minimum over the band samples).
struct Minorant {
    std::vector<double> r_grid;
    std::vector<double> values;
    std::vector<double> d_samples;
    bool vacuous = false;
    std::shared_ptr<const NonlinearitySpec> source;

    double operator()(double r) const;
    ScalarFn as_function() const;
};

Minorant ko_loc_minorant(const NonlinearitySpec& spec, double d_min, double d_max, std::span<const double> r_grid,
                         std::size_t d_samples = 65);

enum class Hypothesis { complete_decay, weight_decay, superadditivity, phi_condition, ratio_monotone };

struct Witness {
    double d = 0.0;
    double r = 0.0;
    double ell = 0.0;
    double eps = 0.0;
    double lhs = 0.0;
    double rhs = 0.0;
};

struct HypothesisReport {
    Hypothesis hypothesis = Hypothesis::complete_decay;
    bool holds = true;
    std::optional<Witness> witness;
    std::vector<std::size_t> sample_counts;
    /// Smallest lhs - rhs over all evaluated samples.
    double worst_margin = std::numeric_limits<double>::infinity();
    std::size_t skipped = 0;
    bool inconclusive = false;
};

/// Which way the shift x + eps*nu moves the boundary distance.
enum class DistanceShift {
    toward_boundary, ///< d -> d - eps (the graph frame: Omega lies below the graph)
    into_interior    ///< d -> d + eps
};

HypothesisReport check_complete_decay(const NonlinearitySpec& spec, std::span<const double> d_grid,
                                      std::span<const double> eps_grid, std::span<const double> r_grid,
                                      std::span<const double> ell_grid,
                                      DistanceShift shift = DistanceShift::toward_boundary);

struct SuperadditivityGrid {
    std::vector<double> u;
    std::vector<double> ell;
    std::vector<double> d;
};

HypothesisReport check_superadditivity(const NonlinearitySpec& spec, double C, const SuperadditivityGrid& grid);

/// Concave gauge phi with phi(0) = 0; `derivative` may be left empty.
struct Gauge {
    ScalarFn phi;
    ScalarFn derivative;
    std::string label;
};

Gauge identity_gauge();
Gauge log1p_gauge();

HypothesisReport check_phi_condition(const NonlinearitySpec& spec, const Gauge& phi, double eps,
                                     std::span<const double> r_grid, std::span<const double> d_grid);

HypothesisReport check_ratio_monotone(const NonlinearitySpec& spec, std::span<const double> r_grid,
                                      std::span<const double> d_grid);

const char* to_string(KoOutcome v);
const char* to_string(Hypothesis h);
const char* to_string(NonlinearityKind k);

} // namespace blowup
