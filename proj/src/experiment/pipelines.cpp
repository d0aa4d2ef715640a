#include "blowup/experiment.hpp"

#include "blowup/error.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace blowup::experiment {

namespace {

class Csv {
public:
    explicit Csv(const std::string& header) { out_ << header << '\n'; }

    template <class... T>
    void row(const T&... cells) {
        bool first = true;
        ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
        out_ << '\n';
    }

    std::string str() const { return out_.str(); }

private:
    static std::string cell(double v) { return format_double(v); }
    static std::string cell(int v) { return std::to_string(v); }
    static std::string cell(std::size_t v) { return std::to_string(v); }

    std::ostringstream out_;
};

std::vector<double> make_grid(const json& g) {
    const double lo = g.at("lo").get<double>();
    const double hi = g.at("hi").get<double>();
    const long n = g.at("count").get<long>();
    std::vector<double> v(static_cast<std::size_t>(n));
    for (long k = 0; k < n; ++k) {
        const double t = n == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(n - 1);
        v[static_cast<std::size_t>(k)] = g.at("spacing") == "geometric" ? lo * std::pow(hi / lo, t) : lo + (hi - lo) * t;
    }
    return v;
}

json witness_json(const std::optional<Witness>& w) {
    if (!w) return nullptr;
    return {{"d", w->d}, {"r", w->r}, {"ell", w->ell}, {"eps", w->eps}, {"lhs", w->lhs}, {"rhs", w->rhs}};
}

json hypothesis_json(const HypothesisReport& r) {
    return {{"hypothesis", to_string(r.hypothesis)},
            {"holds", r.holds},
            {"inconclusive", r.inconclusive},
            {"worst_margin", r.worst_margin},
            {"skipped", r.skipped},
            {"sample_counts", r.sample_counts},
            {"witness", witness_json(r.witness)}};
}

std::string trace_csv(const RampResult& r) {
    Csv csv("index,n,probe_value,residual_sup");
    for (const auto& s : r.trace) csv.row(s.index, s.n, s.probe_value, s.residual_sup);
    return csv.str();
}

std::string field_csv(const GridField& f) {
    const Grid& g = *f.grid;
    Csv csv("index,x,y,u");
    for (std::size_t k = 0; k < g.size(); ++k)
        if (g.active(k)) csv.row(k, g.x(k), g.y(k), f[k]);
    return csv.str();
}

json ramp_json(const RampResult& r, const Grid& g) {
    const auto& last = r.trace.back();
    return {{"outcome", to_string(r.outcome)},
            {"levels", r.trace.size()},
            {"final_index", r.final_index()},
            {"final_n", last.n},
            {"probe", {{"x", g.x(r.probe_node)}, {"y", g.y(r.probe_node)}, {"value", last.probe_value}}},
            {"residual_sup", last.residual_sup},
            {"boundary_ratio", last.boundary_ratio},
            {"worst_monotone_violation", r.trace.size() > 1 ? r.worst_monotone_violation : 0.0},
            {"monotone_checks", r.monotone_checks}};
}

Gauge gauge(const std::string& name) { return name == "identity" ? identity_gauge() : log1p_gauge(); }

ScalarFn profile_of(const NonlinearitySpec& spec) {
    return [spec](double s) { return spec.profile_at(s); };
}

Reaction g_reaction(const NonlinearitySpec& spec, const json& p, json& report) {
    const auto ell = make_grid(p.at("ell"));
    auto g = g_transform(spec, ell, p.at("u_search_max").get<double>(),
                         static_cast<std::size_t>(p.at("u_samples").get<long>()));
    report["g_certified_exact"] = g.certified_exact;
    report["g_nonmonotone_warning"] = g.nonmonotone_warning;
    return Reaction(g);
}

void run_ko(const PipelineSpec& s, PipelineOutcome& out) {
    const auto spec = s.nonlinearity.build();
    const auto v = ko_integral(profile_of(spec), s.params.at("a").get<double>(), s.params.at("tail_bound").get<double>(),
                               s.params.at("tol").get<double>());
    out.verdict = {{"verdict", to_string(v.verdict)},   {"a", v.a},
                   {"a_requested", v.a_requested},       {"a_shifted", v.a_shifted},
                   {"degenerate", v.degenerate},         {"integral_estimate", v.integral_estimate},
                   {"tail_exponent", v.tail_exponent},   {"truncation", v.truncation},
                   {"partial_integral", v.partial_integral}, {"doublings", v.doublings}};
}

double search_cover(const NonlinearitySpec& spec, const json& p) {
    const long cover = p.at("flat_cover").get<long>();
    if (cover < 0) return p.at("u_search_max").get<double>();
    if (static_cast<std::size_t>(cover) >= spec.flats.size())
        throw PreconditionError("flat_cover " + std::to_string(cover) + " exceeds the number of flat intervals");
    return spec.flats[static_cast<std::size_t>(cover)].hi;
}

void run_g_transform(const PipelineSpec& s, PipelineOutcome& out) {
    const auto spec = s.nonlinearity.build();
    const auto ell = make_grid(s.params.at("ell"));
    const double usm = search_cover(spec, s.params);
    const auto g = g_transform(spec, ell, usm, static_cast<std::size_t>(s.params.at("u_samples").get<long>()));
    Csv csv("ell,g,f,argmin_u");
    double dev = 0.0;
    for (std::size_t k = 0; k < ell.size(); ++k) {
        const double f = spec.profile_at(ell[k]);
        csv.row(ell[k], g.values[0][k], f, g.argmin_u[0][k]);
        dev = std::max(dev, std::abs(g.values[0][k] - f) / std::max(std::abs(f), 1e-300));
    }
    out.artifacts.push_back({out.name + "/g.csv", csv.str()});
    out.verdict = {{"certified_exact", g.certified_exact},
                   {"nonmonotone_warning", g.nonmonotone_warning},
                   {"u_search_max", usm},
                   {"max_relative_deviation_from_f", dev}};
}

void run_counterexample(const PipelineSpec& s, PipelineOutcome& out) {
    const auto spec = s.nonlinearity.build();
    if (spec.kind != NonlinearityKind::staircase) throw PreconditionError("counterexample needs the staircase family");
    if (spec.flats.size() < 3) throw PreconditionError("counterexample needs at least three flat intervals");
    const auto ko = ko_integral(profile_of(spec), 1.0, 2.0, 1e-6);

    const auto ell = s.params.at("ell").get<std::vector<double>>();
    auto p = s.params;
    if (p.at("flat_cover").get<long>() < 0) p["flat_cover"] = 2;
    const double usm = search_cover(spec, p);
    const auto g = g_transform(spec, ell, usm, static_cast<std::size_t>(p.at("u_samples").get<long>()));
    double gmax = 0.0;
    for (const double v : g.values[0]) gmax = std::max(gmax, v);

    const auto& I0 = spec.flats[0];
    std::vector<double> r;
    for (int k = 0; k < 10; ++k) r.push_back(I0.lo + (I0.hi - I0.lo) * k / 9.0);
    const auto ratio = check_ratio_monotone(spec, r, {});

    const auto& I1 = spec.flats[1];
    SuperadditivityGrid sg;
    for (int k = 0; k < 9; ++k) {
        sg.u.push_back(I1.lo + (I1.hi - I1.lo) * k / 8.0);
        sg.ell.push_back(1.0 + (0.5 * (I1.hi - I1.lo) - 1.0) * k / 8.0);
    }
    const auto sup = check_superadditivity(spec, 0.0, sg);

    json flats = json::array();
    for (const auto& f : spec.flats) flats.push_back({{"lo", f.lo}, {"hi", f.hi}, {"value", f.value}});
    out.verdict = {{"family", spec.family},
                   {"flats", flats},
                   {"ko", to_string(ko.verdict)},
                   {"g_values", g.values[0]},
                   {"g_ell", ell},
                   {"g_u_search_max", usm},
                   {"g_vanishes", gmax <= 1e-12},
                   {"ratio_monotone", hypothesis_json(ratio)},
                   {"superadditivity", hypothesis_json(sup)}};
}

void run_hypotheses(const PipelineSpec& s, PipelineOutcome& out) {
    const auto spec = s.nonlinearity.build();
    const auto& p = s.params;
    const auto r = make_grid(p.at("r"));
    const auto d = make_grid(p.at("d"));
    const auto eps = make_grid(p.at("eps"));
    const auto ell = make_grid(p.at("ell"));
    out.verdict = json::object();
    for (const auto& c : p.at("checks")) {
        const auto name = c.get<std::string>();
        HypothesisReport rep;
        if (name == "complete_decay") {
            rep = check_complete_decay(spec, d, eps, r, ell);
        } else if (name == "superadditivity") {
            rep = check_superadditivity(spec, p.at("C").get<double>(), SuperadditivityGrid{r, ell, d});
        } else if (name == "ratio_monotone") {
            rep = check_ratio_monotone(spec, r, d);
        } else {
            rep = check_phi_condition(spec, gauge(p.at("phi").get<std::string>()), p.at("phi_eps").get<double>(), r, d);
        }
        out.verdict[name] = hypothesis_json(rep);
    }
}

void run_dirichlet(const PipelineSpec& s, PipelineOutcome& out) {
    const auto dom = s.domain.build();
    const auto grid = build_grid(dom, s.domain.h);
    const double b = s.params.at("boundary").get<double>();
    const auto rep = solve_dirichlet(Reaction(s.nonlinearity.build()), GridField::filled(grid, b), s.solver);
    out.verdict = {{"converged", rep.converged},  {"iterations", rep.iterations},
                   {"residual_sup", rep.residual_sup}, {"used_fallback", rep.used_fallback},
                   {"nodes", grid->size()},        {"h", grid->h}};
    if (s.params.at("exact") == "cosh") {
        if (dom.kind != DomainKind::interval || s.nonlinearity.power() != 1.0)
            throw PreconditionError("exact = cosh needs the linear profile on an interval");
        const double c = 0.5 * (dom.x0 + dom.x1);
        const double half = 0.5 * (dom.x1 - dom.x0);
        const double w = s.nonlinearity.family == "constant_weight" ? std::sqrt(s.nonlinearity.weight) : 1.0;
        double err = 0.0;
        for (std::size_t k = 0; k < grid->size(); ++k)
            err = std::max(err, std::abs(rep.field[k] - b * std::cosh(w * (grid->x(k) - c)) / std::cosh(w * half)));
        out.verdict["sup_error"] = err;
    }
    out.artifacts.push_back({out.name + "/field.csv", field_csv(rep.field)});
}

void run_ramp(const PipelineSpec& s, PipelineOutcome& out) {
    const auto grid = build_grid(s.domain.build(), s.domain.h);
    const auto r = large_solution_ramp(Reaction(s.nonlinearity.build()), grid, s.ramp, s.solver);
    out.verdict = ramp_json(r, *grid);
    const auto p = s.nonlinearity.power();
    if (grid->dim == 1 && p && *p > 1.0) {
        const double lo = s.params.at("rate_band")[0].get<double>() * grid->h;
        const double hi = s.params.at("rate_band")[1].get<double>() * grid->h;
        const double w = s.nonlinearity.family == "constant_weight" ? s.nonlinearity.weight : 1.0;
        const double c = std::pow(2.0 * (*p + 1.0) / ((*p - 1.0) * (*p - 1.0) * w), 1.0 / (*p - 1.0));
        double dev = 0.0;
        std::size_t count = 0;
        for (std::size_t k = 0; k < grid->size(); ++k) {
            const double d = grid->distance[k];
            if (!grid->interior(k) || d < lo * (1 - 1e-9) || d > hi * (1 + 1e-9)) continue;
            dev = std::max(dev, std::abs(r.final.field[k] * std::pow(d, 2.0 / (*p - 1.0)) / c - 1.0));
            ++count;
        }
        out.verdict["rate"] = {{"band", {lo, hi}}, {"constant", c}, {"max_relative_deviation", dev}, {"nodes", count}};
    }
    out.artifacts.push_back({out.name + "/trace.csv", trace_csv(r)});
    if (s.params.at("write_field").get<bool>()) out.artifacts.push_back({out.name + "/field.csv", field_csv(r.final.field)});
}

void run_mixed(const PipelineSpec& s, PipelineOutcome& out) {
    const auto dom = s.domain.build();
    if (dom.kind != DomainKind::graph_domain) throw PreconditionError("mixed needs a graph domain");
    const auto spec = s.nonlinearity.build();
    json extra = json::object();
    const auto g = g_reaction(spec, s.params, extra);
    const auto grid = build_grid(dom, s.domain.h);
    const auto rep = mixed_problem_ell(g, grid, s.ramp, s.solver);
    out.verdict = ramp_json(rep.ramp, *grid);
    out.verdict.update(extra);
    out.verdict["graph_probe"] = {{"x", grid->x(rep.graph_probe_node)},
                                  {"y", grid->y(rep.graph_probe_node)},
                                  {"trace", rep.graph_probe_trace},
                                  {"diverged", rep.graph_probe_diverged}};
    out.verdict["graph_trace_sup"] = rep.graph_trace_sup;
    out.verdict["barrier_failure_evidence"] = rep.graph_probe_diverged;
    const auto sigmas = s.params.at("sigmas").get<std::vector<double>>();
    if (!sigmas.empty()) {
        const auto ret = mixed_problem_retracted(g, dom, s.domain.h, sigmas, s.ramp, s.solver);
        out.verdict["retraction"] = {{"sigmas", sigmas},
                                     {"comparisons", ret.comparisons},
                                     {"worst_violation", ret.worst_violation}};
    }
    out.artifacts.push_back({out.name + "/trace.csv", trace_csv(rep.ramp)});
}

void run_uniqueness(const PipelineSpec& s, PipelineOutcome& out) {
    const auto& p = s.params;
    GapOptions o;
    for (auto* q : {&o.inner, &o.outer}) {
        q->h = s.domain.h;
        q->margin0 = p.at("margin0").get<double>();
        q->decay = p.at("margin_decay").get<double>();
        q->extension = p.at("extend_weight") == "own_distance" ? DistanceExtension::own_distance
                                                                : DistanceExtension::clamp_zero;
    }
    o.inner.count = static_cast<int>(p.at("inner_count").get<long>());
    o.outer.count = static_cast<int>(p.at("outer_count").get<long>());
    o.gap_tol = p.at("gap_tol").get<double>();
    if (!p.at("probe_band").empty()) o.probe_band = std::pair{p.at("probe_band")[0].get<double>(), p.at("probe_band")[1].get<double>()};

    const Reaction nl(s.nonlinearity.build());
    const auto rep = uniqueness_gap(nl, s.domain.build(), o, s.ramp, s.solver);
    Csv csv("index,margin_inner,margin_outer,gap,boundary_gap");
    for (std::size_t j = 0; j < rep.gap_profile.size(); ++j)
        csv.row(j, rep.inner.sequence.margins[j], rep.outer.sequence.margins[j], rep.gap_profile[j], rep.boundary_gap[j]);
    out.artifacts.push_back({out.name + "/gap.csv", csv.str()});

    double worst_mono = -std::numeric_limits<double>::infinity();
    for (const auto* run : {&rep.inner, &rep.outer})
        for (std::size_t i = 0; i < run->ramps.size(); ++i) {
            const auto& r = run->ramps[i];
            if (r.trace.size() > 1) worst_mono = std::max(worst_mono, r.worst_monotone_violation);
            out.artifacts.push_back({out.name + "/" + (run == &rep.inner ? "inner_" : "outer_") + std::to_string(i) +
                                         "_trace.csv",
                                     trace_csv(r)});
        }
    out.verdict = {{"verdict", to_string(rep.verdict)},
                   {"gap_profile", rep.gap_profile},
                   {"boundary_gap", rep.boundary_gap},
                   {"gap_strictly_decreasing", rep.gap_strictly_decreasing},
                   {"field_scale", rep.field_scale},
                   {"final_relative_gap", rep.final_relative_gap},
                   {"worst_ordering", rep.worst_ordering},
                   {"common_level", std::min(rep.inner.common_level, rep.outer.common_level)},
                   {"worst_monotone_violation", worst_mono},
                   {"warnings", rep.warnings}};

    if (!p.at("phi_bands").empty() && !rep.u_min_seq.empty()) {
        std::vector<std::pair<double, double>> bands;
        for (const auto& b : p.at("phi_bands")) bands.emplace_back(b[0].get<double>(), b[1].get<double>());
        const auto pg = phi_gap_test(rep.u_min_seq.back(), rep.u_max_seq.back(), gauge(p.at("phi").get<std::string>()), bands);
        Csv pc("band_lo,band_hi,ratio,nodes");
        for (std::size_t i = 0; i < bands.size(); ++i) pc.row(bands[i].first, bands[i].second, pg.ratios[i], pg.counts[i]);
        out.artifacts.push_back({out.name + "/phi_gap.csv", pc.str()});
        out.verdict["phi_gap"] = {{"ratios", pg.ratios},
                                  {"monotone_decreasing", pg.monotone_decreasing},
                                  {"excluded", pg.excluded},
                                  {"final_over_first", pg.ratios.front() > 0.0 ? pg.ratios.back() / pg.ratios.front()
                                                                               : std::numeric_limits<double>::quiet_NaN()}};
    }
}

void run_shifted(const PipelineSpec& s, PipelineOutcome& out) {
    const auto& p = s.params;
    const auto dom = s.domain.build();
    if (dom.kind != DomainKind::graph_domain) throw PreconditionError("shifted needs a graph domain");
    auto theta = dom;
    theta.x0 = -p.at("theta_rho").get<double>();
    theta.x1 = p.at("theta_rho").get<double>();
    theta.y0 = -p.at("theta_height").get<double>();
    const double h = s.domain.h;
    const auto spec = s.nonlinearity.build();
    const Reaction f(spec);
    const auto amb = build_grid(dom, h);
    const auto tg = build_grid(theta, h);

    out.verdict = json::object();
    const auto g = g_reaction(spec, p, out.verdict);
    const auto u = large_solution_ramp(f, amb, s.ramp, s.solver);
    auto ell = mixed_problem_ell(g, tg, s.ramp, s.solver).ramp;
    const double scale = p.at("corrupt_scale").get<double>();
    if (scale != 1.0)
        for (auto& v : ell.final.field.values) v *= scale;

    const int eps0 = max_shift_steps(amb, tg, p.at("decay_band").get<double>());
    const double tol = u.final.residual_sup + ell.final.residual_sup + 2.0 * s.solver.newton_tol;
    json results = json::array();
    bool all = true;
    for (const auto& st : p.at("steps")) {
        const int steps = static_cast<int>(st.get<double>());
        if (steps < 1 || steps > eps0) {
            results.push_back({{"steps", steps}, {"within_eps0", false}, {"passed", false}});
            all = false;
            continue;
        }
        const auto r = shifted_supersolution_test(f, u.final.field, u.final.field, ell.final.field, steps, tol);
        results.push_back({{"steps", steps},
                           {"within_eps0", true},
                           {"eps", r.eps},
                           {"supersolution_holds", r.supersolution_holds},
                           {"supersolution_worst", r.supersolution_worst},
                           {"dominates", r.dominates},
                           {"dominance_worst", r.dominance_worst},
                           {"dominance_at", {amb->x(r.dominance_node), amb->y(r.dominance_node)}},
                           {"interior_checked", r.interior_checked},
                           {"nodes_checked", r.nodes_checked},
                           {"passed", r.passed()}});
        all = all && r.passed();
    }
    out.verdict["eps0_steps"] = eps0;
    out.verdict["tolerance"] = tol;
    out.verdict["corrupt_scale"] = scale;
    out.verdict["ambient_ramp"] = ramp_json(u, *amb);
    out.verdict["ell_ramp"] = ramp_json(ell, *tg);
    out.verdict["results"] = results;
    out.verdict["all_passed"] = all;
    out.artifacts.push_back({out.name + "/ambient_trace.csv", trace_csv(u)});
    out.artifacts.push_back({out.name + "/ell_trace.csv", trace_csv(ell)});
}

void run_barrier(const PipelineSpec& s, PipelineOutcome& out) {
    BarrierOptions bo;
    bo.h = s.domain.h;
    bo.probe_depth = s.params.at("probe_depth").get<double>();
    const auto dom = s.domain.build();
    if (dom.kind != DomainKind::graph_domain) throw PreconditionError("barrier needs a graph domain");
    const auto rep = barrier_probe(Reaction(s.nonlinearity.build()), dom, s.params.at("z").get<double>(),
                                   s.params.at("r").get<double>(), s.ramp, s.solver, bo);
    out.verdict = {{"verdict", to_string(rep.verdict)},
                   {"z", rep.z},
                   {"r", rep.r},
                   {"probe", {rep.probe_x, rep.probe_y}},
                   {"growth", rep.growth},
                   {"outcome", to_string(rep.ramp.outcome)},
                   {"levels", rep.ramp.trace.size()},
                   {"worst_monotone_violation", rep.ramp.trace.size() > 1 ? rep.ramp.worst_monotone_violation : 0.0}};
    out.artifacts.push_back({out.name + "/trace.csv", trace_csv(rep.ramp)});
}

} // namespace

PipelineOutcome run_pipeline(const PipelineSpec& spec, std::uint64_t /*seed*/) {
    PipelineOutcome out;
    out.name = spec.name;
    out.kind = spec.kind;
    try {
        if (spec.kind == "ko") run_ko(spec, out);
        else if (spec.kind == "g_transform") run_g_transform(spec, out);
        else if (spec.kind == "counterexample") run_counterexample(spec, out);
        else if (spec.kind == "hypotheses") run_hypotheses(spec, out);
        else if (spec.kind == "dirichlet") run_dirichlet(spec, out);
        else if (spec.kind == "ramp") run_ramp(spec, out);
        else if (spec.kind == "mixed") run_mixed(spec, out);
        else if (spec.kind == "uniqueness") run_uniqueness(spec, out);
        else if (spec.kind == "shifted") run_shifted(spec, out);
        else if (spec.kind == "barrier") run_barrier(spec, out);
        else throw ConfigError("kind", "unknown pipeline kind '" + spec.kind + "'");
    } catch (const InvariantBreach& e) {
        out.status = "breach";
        out.message = e.what();
    } catch (const std::exception& e) {
        out.status = "error";
        out.message = e.what();
    }
    if (out.status != "ok") {
        out.artifacts.clear();
        out.verdict = nullptr;
    }
    json doc = {{"pipeline", out.name}, {"kind", out.kind}, {"status", out.status}};
    if (!out.message.empty()) doc["message"] = out.message;
    if (!out.verdict.is_null()) doc["result"] = out.verdict;
    out.artifacts.insert(out.artifacts.begin(), Artifact{out.name + "/verdict.json", dump_json(doc)});
    return out;
}

} // namespace blowup::experiment
