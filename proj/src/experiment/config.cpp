#include "blowup/experiment.hpp"

#include "blowup/error.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace blowup::experiment {

namespace {

const std::vector<std::string> kinds = {"ko",     "g_transform", "hypotheses", "counterexample", "dirichlet", "ramp",
                                        "mixed",  "uniqueness",  "shifted",    "barrier"};

/// Typed access to one JSON object; unread keys are reported by finish().
class Node {
public:
    Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
    }

    std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }
    bool has(const std::string& k) const { return j_.contains(k); }

    const json* raw(const std::string& k) {
        seen_.insert(k);
        return j_.contains(k) ? &j_.at(k) : nullptr;
    }

    double num(const std::string& k, double def) {
        const auto* v = raw(k);
        if (!v) return def;
        if (!v->is_number()) throw ConfigError(key(k), "expected a number");
        return v->get<double>();
    }

    double positive(const std::string& k, double def) {
        const double v = num(k, def);
        if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(key(k), "must be positive and finite");
        return v;
    }

    long integer(const std::string& k, long def) {
        const auto* v = raw(k);
        if (!v) return def;
        if (!v->is_number_integer()) throw ConfigError(key(k), "expected an integer");
        return v->get<long>();
    }

    bool flag(const std::string& k, bool def) {
        const auto* v = raw(k);
        if (!v) return def;
        if (!v->is_boolean()) throw ConfigError(key(k), "expected true or false");
        return v->get<bool>();
    }

    std::string str(const std::string& k, const std::string& def) {
        const auto* v = raw(k);
        if (!v) return def;
        if (!v->is_string()) throw ConfigError(key(k), "expected a string");
        return v->get<std::string>();
    }

    std::string choice(const std::string& k, const std::string& def, const std::vector<std::string>& allowed) {
        const auto v = str(k, def);
        if (std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
            std::string list;
            for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
            throw ConfigError(key(k), "'" + v + "' is not one of: " + list);
        }
        return v;
    }

    std::vector<double> numbers(const std::string& k, std::vector<double> def) {
        const auto* v = raw(k);
        if (!v) return def;
        if (!v->is_array()) throw ConfigError(key(k), "expected an array of numbers");
        std::vector<double> out;
        for (const auto& e : *v) {
            if (!e.is_number()) throw ConfigError(key(k), "expected an array of numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }

    std::vector<std::pair<double, double>> pairs(const std::string& k) {
        const auto* v = raw(k);
        if (!v) return {};
        if (!v->is_array()) throw ConfigError(key(k), "expected an array of [a, b] pairs");
        std::vector<std::pair<double, double>> out;
        for (const auto& e : *v) {
            if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
                throw ConfigError(key(k), "expected an array of [a, b] pairs");
            out.emplace_back(e[0].get<double>(), e[1].get<double>());
        }
        return out;
    }

    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) throw ConfigError(key(k), "unknown key");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

NonlinearityBlock parse_nonlinearity(const json& j, const std::string& path) {
    Node n(j, path);
    NonlinearityBlock b;
    b.family = n.choice("family", b.family,
                        {"power", "weighted_power", "exp_decay", "exp_alpha_decay", "constant_weight", "staircase",
                         "custom_table"});
    b.p = n.positive("p", b.p);
    b.alpha = n.positive("alpha", b.alpha);
    b.kappa = n.positive("kappa", b.kappa);
    b.weight = n.positive("weight", b.weight);
    b.n_intervals = static_cast<int>(n.integer("n_intervals", b.n_intervals));
    const long seed = n.integer("seed", 0);
    if (seed < 0) throw ConfigError(n.key("seed"), "must be nonnegative");
    b.seed = static_cast<std::uint64_t>(seed);
    b.table = n.pairs("table");
    n.finish();
    if (b.family == "staircase" && b.n_intervals < 0) throw ConfigError(n.key("n_intervals"), "must be >= 0");
    if (b.family == "custom_table" && b.table.size() < 2)
        throw ConfigError(n.key("table"), "custom_table needs at least two (r, f) pairs");
    try {
        (void)b.build();
    } catch (const Error& e) {
        throw ConfigError(path, e.what());
    }
    return b;
}

DomainBlock parse_domain(const json& j, const std::string& path) {
    Node n(j, path);
    DomainBlock b;
    b.kind = n.choice("kind", b.kind, {"interval", "rectangle", "graph_domain"});
    b.x0 = n.num("x0", b.kind == "rectangle" ? 0.0 : -1.0);
    b.x1 = n.num("x1", 1.0);
    b.y0 = n.num("y0", 0.0);
    b.y1 = n.num("y1", 1.0);
    b.graph = n.choice("graph", b.graph, {"zero", "saw", "table"});
    b.slope = n.positive("slope", b.slope);
    b.period = n.positive("period", b.period);
    b.graph_table = n.pairs("graph_table");
    b.rho = n.positive("rho", b.rho);
    b.height = n.positive("height", b.height);
    b.h = n.positive("h", b.h);
    n.finish();
    if (b.kind != "graph_domain" && !(b.x0 < b.x1)) throw ConfigError(n.key("x1"), "must exceed x0");
    if (b.kind == "rectangle" && !(b.y0 < b.y1)) throw ConfigError(n.key("y1"), "must exceed y0");
    if (b.graph == "table" && b.graph_table.size() < 2) throw ConfigError(n.key("graph_table"), "needs two points");
    return b;
}

SolveConfig parse_solver(const json& j, const std::string& path) {
    Node n(j, path);
    SolveConfig c;
    c.newton_tol = n.positive("newton_tol", c.newton_tol);
    c.newton_max_iter = static_cast<int>(n.integer("newton_max_iter", c.newton_max_iter));
    c.damping = n.positive("damping", c.damping);
    c.max_backtracks = static_cast<int>(n.integer("max_backtracks", c.max_backtracks));
    c.fallback = n.flag("fallback", c.fallback);
    c.slope_floor = n.positive("slope_floor", c.slope_floor);
    c.monotone_max_iter = static_cast<int>(n.integer("monotone_max_iter", c.monotone_max_iter));
    n.finish();
    if (c.newton_max_iter < 1) throw ConfigError(n.key("newton_max_iter"), "must be >= 1");
    if (!(c.damping < 1.0)) throw ConfigError(n.key("damping"), "must lie in (0, 1)");
    return c;
}

RampSchedule parse_ramp(const json& j, const std::string& path) {
    Node n(j, path);
    RampSchedule r;
    r.n0 = n.positive("n0", r.n0);
    r.factor = n.positive("factor", r.factor);
    r.cap = static_cast<int>(n.integer("cap", r.cap));
    r.stagnation_tol = n.positive("stagnation_tol", r.stagnation_tol);
    r.divergence_factor = n.positive("divergence_factor", r.divergence_factor);
    r.resolution_ratio = n.num("resolution_ratio", r.resolution_ratio);
    n.finish();
    if (!(r.factor > 1.0)) throw ConfigError(n.key("factor"), "must exceed 1");
    if (r.cap < 2) throw ConfigError(n.key("cap"), "must be >= 2");
    return r;
}

json grid_spec(Node& n, const std::string& k, double lo, double hi, long count, const std::string& spacing) {
    const auto* v = n.raw(k);
    json out = {{"lo", lo}, {"hi", hi}, {"count", count}, {"spacing", spacing}};
    if (!v) return out;
    Node g(*v, n.key(k));
    out["lo"] = g.num("lo", lo);
    out["hi"] = g.num("hi", hi);
    out["count"] = g.integer("count", count);
    out["spacing"] = g.choice("spacing", spacing, {"linear", "geometric"});
    g.finish();
    if (out["count"].get<long>() < 1) throw ConfigError(g.key("count"), "must be >= 1");
    if (!(out["lo"].get<double>() <= out["hi"].get<double>())) throw ConfigError(g.key("hi"), "must be >= lo");
    if (out["spacing"] == "geometric" && !(out["lo"].get<double>() > 0.0))
        throw ConfigError(g.key("lo"), "geometric spacing needs lo > 0");
    return out;
}

json band_list(Node& n, const std::string& k) {
    json out = json::array();
    for (const auto& [lo, hi] : n.pairs(k)) {
        if (!(lo >= 0.0 && lo <= hi)) throw ConfigError(n.key(k), "bands need 0 <= lo <= hi");
        out.push_back({lo, hi});
    }
    return out;
}

json parse_params(const std::string& kind, Node& n) {
    json p = json::object();
    if (kind == "ko") {
        p["a"] = n.positive("a", 1.0);
        p["tail_bound"] = n.positive("tail_bound", 2.0);
        p["tol"] = n.positive("tol", 1e-6);
    } else if (kind == "g_transform" || kind == "counterexample") {
        p["ell"] = kind == "counterexample" ? json(n.numbers("ell", {1.0, 5.0, 10.0}))
                                            : grid_spec(n, "ell", 0.1, 10.0, 50, "linear");
        p["u_search_max"] = n.positive("u_search_max", 1e3);
        p["u_samples"] = n.integer("u_samples", kind == "counterexample" ? 20000 : 2000);
        p["flat_cover"] = n.integer("flat_cover", -1);
        if (p["u_samples"].get<long>() < 2) throw ConfigError(n.key("u_samples"), "must be >= 2");
    } else if (kind == "hypotheses") {
        const auto checks = n.raw("checks");
        json list = json::array({"complete_decay", "superadditivity", "ratio_monotone", "phi_condition"});
        if (checks) {
            if (!checks->is_array()) throw ConfigError(n.key("checks"), "expected an array of names");
            list = json::array();
            for (const auto& c : *checks) {
                if (!c.is_string()) throw ConfigError(n.key("checks"), "expected an array of names");
                const auto s = c.get<std::string>();
                if (s != "complete_decay" && s != "superadditivity" && s != "ratio_monotone" && s != "phi_condition")
                    throw ConfigError(n.key("checks"), "unknown check '" + s + "'");
                list.push_back(s);
            }
        }
        p["checks"] = list;
        p["r"] = grid_spec(n, "r", 0.01, 10.0, 41, "geometric");
        p["d"] = grid_spec(n, "d", 0.05, 1.0, 20, "linear");
        p["eps"] = grid_spec(n, "eps", 0.01, 0.04, 4, "linear");
        p["ell"] = grid_spec(n, "ell", 0.0, 4.0, 5, "linear");
        p["C"] = n.num("C", 0.0);
        p["phi"] = n.choice("phi", "log1p", {"identity", "log1p"});
        p["phi_eps"] = n.positive("phi_eps", 0.1);
    } else if (kind == "dirichlet") {
        p["boundary"] = n.num("boundary", 1.0);
        p["exact"] = n.choice("exact", "none", {"none", "cosh"});
    } else if (kind == "ramp") {
        p["rate_band"] = n.numbers("rate_band", {4.0, 16.0});
        p["write_field"] = n.flag("write_field", false);
        if (p["rate_band"].size() != 2) throw ConfigError(n.key("rate_band"), "expected [lo, hi] in units of h");
    } else if (kind == "mixed") {
        p["sigmas"] = n.numbers("sigmas", {});
        p["ell"] = grid_spec(n, "ell", 0.01, 1e4, 60, "geometric");
        p["u_search_max"] = n.positive("u_search_max", 1e4);
        p["u_samples"] = n.integer("u_samples", 400);
    } else if (kind == "uniqueness") {
        p["inner_count"] = n.integer("inner_count", 4);
        p["outer_count"] = n.integer("outer_count", 4);
        p["margin0"] = n.positive("margin0", 0.25);
        p["margin_decay"] = n.positive("margin_decay", 0.5);
        p["gap_tol"] = n.positive("gap_tol", 1e-3);
        p["extend_weight"] = n.choice("extend_weight", "clamp_zero", {"clamp_zero", "own_distance"});
        const auto band = n.numbers("probe_band", {});
        if (!band.empty() && band.size() != 2) throw ConfigError(n.key("probe_band"), "expected [d_lo, d_hi]");
        p["probe_band"] = band;
        p["phi_bands"] = band_list(n, "phi_bands");
        p["phi"] = n.choice("phi", "log1p", {"identity", "log1p"});
        if (!(p["margin_decay"].get<double>() < 1.0)) throw ConfigError(n.key("margin_decay"), "must lie in (0, 1)");
    } else if (kind == "shifted") {
        p["theta_rho"] = n.positive("theta_rho", 0.5);
        p["theta_height"] = n.positive("theta_height", 0.5);
        p["steps"] = n.numbers("steps", {1, 2, 4});
        p["decay_band"] = n.positive("decay_band", 0.5);
        p["ell"] = grid_spec(n, "ell", 0.01, 1e4, 60, "geometric");
        p["u_search_max"] = n.positive("u_search_max", 1e4);
        p["u_samples"] = n.integer("u_samples", 400);
        p["corrupt_scale"] = n.num("corrupt_scale", 1.0);
    } else if (kind == "barrier") {
        p["z"] = n.num("z", 0.0);
        p["r"] = n.positive("r", 0.25);
        p["probe_depth"] = n.positive("probe_depth", 0.5);
    }
    return p;
}

json merged(const json& defaults, const json* override_block) {
    json out = defaults.is_null() ? json::object() : defaults;
    if (override_block) {
        if (!override_block->is_object()) return *override_block;
        out.merge_patch(*override_block);
    }
    return out;
}

} // namespace

NonlinearitySpec NonlinearityBlock::build() const {
    if (family == "power") return power_law(p);
    if (family == "weighted_power") return weighted_power(p, alpha);
    if (family == "exp_decay") return exp_decay(p, kappa);
    if (family == "exp_alpha_decay") return exp_alpha_decay(p, alpha);
    if (family == "constant_weight") return constant_weight(p, weight);
    if (family == "staircase") return staircase_counterexample(n_intervals, seed);
    if (family == "custom_table") return custom_table(table);
    throw ConfigError("nonlinearity.family", "unknown family '" + family + "'");
}

std::optional<double> NonlinearityBlock::power() const {
    if (family == "power" || family == "constant_weight") return p;
    return std::nullopt;
}

DomainSpec DomainBlock::build() const {
    if (kind == "interval") return DomainSpec::interval(x0, x1);
    if (kind == "rectangle") return DomainSpec::rectangle(x0, x1, y0, y1);
    ScalarFn F = zero_graph();
    if (graph == "saw") F = lipschitz_saw(slope, period);
    if (graph == "table") F = table_graph(graph_table);
    return DomainSpec::graph_domain(F, rho, height, graph);
}

ExperimentConfig parse_config(const json& doc) {
    Node root(doc, "");
    ExperimentConfig cfg;
    cfg.name = root.str("name", cfg.name);
    if (cfg.name.empty() || cfg.name.find_first_of("/\\") != std::string::npos)
        throw ConfigError("name", "must be a nonempty plain name");
    const long seed = root.integer("seed", 0);
    if (seed < 0) throw ConfigError("seed", "must be nonnegative");
    cfg.seed = static_cast<std::uint64_t>(seed);
    cfg.tasks = static_cast<int>(root.integer("tasks", 1));
    if (cfg.tasks < 1) throw ConfigError("tasks", "must be >= 1");
    if (const auto* o = root.raw("output")) {
        if (!o->is_string()) throw ConfigError("output", "expected a string");
        cfg.output = o->get<std::string>();
    }
    const json defaults_nl = root.raw("nonlinearity") ? *root.raw("nonlinearity") : json::object();
    const json defaults_dom = root.raw("domain") ? *root.raw("domain") : json::object();
    const json defaults_sol = root.raw("solver") ? *root.raw("solver") : json::object();
    const json defaults_ramp = root.raw("ramp") ? *root.raw("ramp") : json::object();
    for (const auto& [block, path] : {std::pair{&defaults_nl, "nonlinearity"}, std::pair{&defaults_dom, "domain"},
                                      std::pair{&defaults_sol, "solver"}, std::pair{&defaults_ramp, "ramp"}})
        if (!block->is_object()) throw ConfigError(path, "expected an object");

    const auto* list = root.raw("pipelines");
    if (!list || !list->is_array() || list->empty())
        throw ConfigError("pipelines", "expected a nonempty array of pipeline blocks");
    root.finish();

    std::set<std::string> names;
    for (std::size_t i = 0; i < list->size(); ++i) {
        const std::string path = "pipelines[" + std::to_string(i) + "]";
        Node n((*list)[i], path);
        PipelineSpec p;
        p.kind = n.choice("kind", "", kinds);
        p.name = n.str("name", p.kind + "_" + std::to_string(i));
        if (p.name.empty() || p.name.find_first_of("/\\ ") != std::string::npos)
            throw ConfigError(n.key("name"), "must be a plain name without spaces");
        if (!names.insert(p.name).second) throw ConfigError(n.key("name"), "duplicate pipeline name '" + p.name + "'");
        p.nonlinearity = parse_nonlinearity(merged(defaults_nl, n.raw("nonlinearity")), path + ".nonlinearity");
        p.domain = parse_domain(merged(defaults_dom, n.raw("domain")), path + ".domain");
        p.solver = parse_solver(merged(defaults_sol, n.raw("solver")), path + ".solver");
        p.ramp = parse_ramp(merged(defaults_ramp, n.raw("ramp")), path + ".ramp");
        p.params = parse_params(p.kind, n);
        n.finish();
        cfg.pipelines.push_back(std::move(p));
    }
    cfg.hash = fnv1a_hex(doc.dump());
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string(), "cannot open config file");
    json doc;
    try {
        doc = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string(), std::string("parse error: ") + e.what());
    }
    return parse_config(doc);
}

std::vector<FamilyInfo> families() {
    return {
        {"power", "p", "r^p"},
        {"weighted_power", "p, alpha", "d^alpha r^p"},
        {"exp_decay", "p, kappa", "exp(-kappa/d) r^p"},
        {"exp_alpha_decay", "p, alpha", "exp(-1/d^alpha) r^p"},
        {"constant_weight", "p, weight", "weight * r^p"},
        {"staircase", "n_intervals, seed", "nondecreasing profile between u^2 and u^3 with growing flat intervals"},
        {"custom_table", "table", "piecewise linear through (r, f) pairs"},
    };
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

void dump_into(const json& j, std::string& out, int indent, int depth) {
    const std::string pad(static_cast<std::size_t>((depth + 1) * indent), ' ');
    const std::string close(static_cast<std::size_t>(depth * indent), ' ');
    switch (j.type()) {
    case json::value_t::object: {
        if (j.empty()) {
            out += "{}";
            return;
        }
        out += "{\n";
        bool first = true;
        for (const auto& [k, v] : j.items()) {
            if (!first) out += ",\n";
            first = false;
            out += pad + json(k).dump() + ": ";
            dump_into(v, out, indent, depth + 1);
        }
        out += "\n" + close + "}";
        return;
    }
    case json::value_t::array: {
        if (j.empty()) {
            out += "[]";
            return;
        }
        out += "[\n";
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (i) out += ",\n";
            out += pad;
            dump_into(j[i], out, indent, depth + 1);
        }
        out += "\n" + close + "]";
        return;
    }
    case json::value_t::number_float: {
        const double v = j.get<double>();
        out += std::isfinite(v) ? format_double(v) : "null";
        return;
    }
    default: out += j.dump(); return;
    }
}

} // namespace

std::string dump_json(const json& doc) {
    std::string out;
    dump_into(doc, out, 2, 0);
    out += "\n";
    return out;
}

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace blowup::experiment
