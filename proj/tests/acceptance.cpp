// Runs the experiment suite twice (1 and 4 tasks) and prints one line per criterion.
#include "blowup/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>

using namespace blowup;
using namespace blowup::experiment;
namespace fs = std::filesystem;

namespace {

constexpr double g_rel_tol = 1e-12;
constexpr std::size_t g_grid_points = 50;
constexpr double staircase_g_tol = 1e-12;
constexpr double ko_rel_tol = 5e-3;
constexpr long ko_oracle_panels = 1000000;
constexpr double order_lo = 3.5;
constexpr double order_hi = 4.5;
constexpr double rate_tol = 0.10;
constexpr double newton_tol = 1e-10;
constexpr double gap_rel_tol = 1e-3;
constexpr double divergence_multiple = 1e3;
constexpr double phi_final_fraction = 0.10;

// Criteria that cannot be met at desk scale; a failure here is reported but
// does not fail the run. A pass is reported as well.
const std::set<int> known_red = {7, 10};

struct Suite {
    json verdicts;
    json manifest;
    std::map<std::string, double> seconds;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const json& result(const Suite& s, const std::string& name) { return s.verdicts.at(name).at("result"); }

double seconds(const Suite& s, std::initializer_list<const char*> names) {
    double t = 0.0;
    for (const char* n : names) t += s.seconds.at(n);
    return t;
}

// integral_a^inf ds / sqrt(F(s) - F(a)), F(s) = s^(p+1)/(p+1), a = 1, by the
// midpoint rule after s = 1 + w^2, w = t/(1-t).
double ko_oracle(double p) {
    const auto F = [p](double s) { return std::pow(s, p + 1.0) / (p + 1.0); };
    const double h = 1.0 / static_cast<double>(ko_oracle_panels);
    double sum = 0.0;
    for (long i = 0; i < ko_oracle_panels; ++i) {
        const double t = (static_cast<double>(i) + 0.5) * h;
        const double w = t / (1.0 - t);
        const double dw = 1.0 / ((1.0 - t) * (1.0 - t));
        const double gap = w < 1e-4 ? w * w * (1.0 + 0.5 * p * w * w) : F(1.0 + w * w) - F(1.0);
        sum += 2.0 * w / std::sqrt(gap) * dw;
    }
    return sum * h;
}

void walk(const json& j, const std::string& key, const std::function<void(const json&)>& fn) {
    if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (it.key() == key) fn(*it);
            walk(*it, key, fn);
        }
    } else if (j.is_array()) {
        for (const auto& v : j) walk(v, key, fn);
    }
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

struct Line {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const char* title, const Line& line, double secs, double budget) {
    const bool in_time = secs <= budget;
    const bool pass = line.pass && in_time;
    std::string tag = pass ? "PASS" : "FAIL";
    if (known_red.count(id)) tag += pass ? " (expected red)" : " (known)";
    else if (!pass) ++failures;
    if (std::isfinite(budget))
        std::printf("[%s] %2d %s: %s; %.1f s of %.0f s\n", tag.c_str(), id, title, line.detail.c_str(), secs, budget);
    else
        std::printf("[%s] %2d %s: %s; %.1f s\n", tag.c_str(), id, title, line.detail.c_str(), secs);
    std::fflush(stdout);
}

Suite run_suite(const ExperimentConfig& cfg, const fs::path& out, int tasks) {
    Suite s;
    const auto r = run_experiment(cfg, {out, tasks});
    s.manifest = r.manifest;
    for (std::size_t i = 0; i < cfg.pipelines.size(); ++i) {
        const auto& name = cfg.pipelines[i].name;
        s.verdicts[name] = json::parse(slurp(out / name / "verdict.json"));
        s.seconds[name] = r.seconds[i];
    }
    return s;
}

} // namespace

int main() {
    const fs::path config = fs::path(BLOWUP_SOURCE_DIR) / "configs" / "suite.json";
    const auto cfg = load_config(config);
    const auto root = fs::temp_directory_path() / ("blowup_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);

    std::printf("suite %s, %zu pipelines\n", config.string().c_str(), cfg.pipelines.size());
    std::fflush(stdout);
    const auto a = run_suite(cfg, root / "tasks1", 1);

    for (const auto& [name, v] : a.verdicts.items())
        if (v.at("status") != "ok") std::printf("pipeline %s: %s (%s)\n", name.c_str(), v.at("status").get<std::string>().c_str(),
                                                v.value("message", "").c_str());

    const auto ok = [&](const char* name) { return a.verdicts.at(name).at("status") == "ok"; };

    {
        Line l{true, ""};
        for (const char* n : {"g_square", "g_cube", "g_three_halves"}) {
            if (!ok(n)) {
                l = {false, std::string(n) + " did not run"};
                break;
            }
            const auto& r = result(a, n);
            const auto csv = slurp(root / "tasks1" / n / "g.csv");
            const auto rows = std::count(csv.begin(), csv.end(), '\n') - 1;
            const double dev = r.at("max_relative_deviation_from_f").get<double>();
            const bool good = r.at("certified_exact").get<bool>() && dev <= g_rel_tol &&
                              static_cast<std::size_t>(rows) == g_grid_points;
            l.pass = l.pass && good;
            l.detail += std::string(l.detail.empty() ? "" : ", ") + n + " dev " + num(dev) +
                        (r.at("certified_exact").get<bool>() ? " certified" : " uncertified");
        }
        report(1, "convexity collapse", l, seconds(a, {"g_square", "g_cube", "g_three_halves"}), 1.0);
    }

    {
        Line l{false, "did not run"};
        if (ok("staircase")) {
            const auto& r = result(a, "staircase");
            double gmax = 0.0;
            for (const auto& v : r.at("g_values")) gmax = std::max(gmax, v.get<double>());
            const bool ell_ok = r.at("g_ell") == json({1.0, 5.0, 10.0});
            const bool covers = r.at("g_u_search_max").get<double>() >= r.at("flats")[2].at("hi").get<double>();
            const bool ko = r.at("ko") == "converges";
            const bool ratio_fails = !r.at("ratio_monotone").at("holds").get<bool>();
            const bool sup_fails = !r.at("superadditivity").at("holds").get<bool>();
            l.pass = ell_ok && covers && ko && gmax <= staircase_g_tol && ratio_fails && sup_fails;
            l.detail = "KO " + r.at("ko").get<std::string>() + ", max g " + num(gmax) + ", ratio-monotone " +
                       (ratio_fails ? "fails" : "holds") + ", superadditivity " + (sup_fails ? "fails" : "holds");
        }
        report(2, "staircase counterexample", l, seconds(a, {"staircase"}), 5.0);
    }

    {
        Line l{true, ""};
        for (const auto& [n, p] : {std::pair{"ko_square", 2.0}, std::pair{"ko_cube", 3.0}}) {
            if (!ok(n)) {
                l = {false, std::string(n) + " did not run"};
                break;
            }
            const auto& r = result(a, n);
            const double oracle = ko_oracle(p);
            const double est = r.at("integral_estimate").is_number() ? r.at("integral_estimate").get<double>() : NAN;
            const double rel = std::abs(est - oracle) / oracle;
            l.pass = l.pass && r.at("verdict") == "converges" && rel <= ko_rel_tol;
            l.detail += std::string(n) + " " + r.at("verdict").get<std::string>() + " rel " + num(rel) + ", ";
        }
        if (ok("ko_linear")) {
            const auto& r = result(a, "ko_linear");
            const double T = r.at("truncation").get<double>();
            const double closed = std::sqrt(2.0) * std::acosh(T);
            const double rel = std::abs(r.at("partial_integral").get<double>() - closed) / closed;
            l.pass = l.pass && r.at("verdict") == "diverges" && rel <= ko_rel_tol;
            l.detail += "ko_linear " + r.at("verdict").get<std::string>() + " partial rel " + num(rel);
        } else {
            l.pass = false;
        }
        report(3, "KO discrimination", l, seconds(a, {"ko_square", "ko_cube", "ko_linear"}), 5.0);
    }

    {
        Line l{false, "did not run"};
        if (ok("cosh_64") && ok("cosh_128")) {
            const double ratio =
                result(a, "cosh_64").at("sup_error").get<double>() / result(a, "cosh_128").at("sup_error").get<double>();
            l = {ratio >= order_lo && ratio <= order_hi, "error ratio " + num(ratio)};
        }
        report(4, "solver order", l, seconds(a, {"cosh_64", "cosh_128"}), 5.0);
    }

    {
        Line l{false, "did not run"};
        if (ok("rate_cube")) {
            const auto& r = result(a, "rate_cube");
            const double dev = r.at("rate").at("max_relative_deviation").get<double>();
            l = {dev <= rate_tol, "max |u d / sqrt2 - 1| " + num(dev) + " over " +
                                      std::to_string(r.at("rate").at("nodes").get<int>()) + " nodes, ramp " +
                                      r.at("outcome").get<std::string>()};
        }
        report(5, "blow-up rate", l, seconds(a, {"rate_cube"}), 60.0);
    }

    {
        double worst = -INFINITY;
        std::size_t ramps = 0;
        bool breach = false;
        for (const auto& [name, v] : a.verdicts.items()) {
            breach = breach || v.at("status") == "breach";
            walk(v, "worst_monotone_violation", [&](const json& x) {
                ++ramps;
                worst = std::max(worst, x.is_number() ? x.get<double>() : INFINITY);
            });
        }
        double total = 0.0;
        for (const auto& [n, t] : a.seconds) total += t;
        report(6, "ramp monotonicity",
               {!breach && ramps > 0 && worst <= 2.0 * newton_tol,
                std::to_string(ramps) + " ramp records, worst normalized drop " + num(worst) + (breach ? ", breach" : "")},
               total, INFINITY);
    }

    {
        Line l{true, ""};
        for (const char* n : {"gap_cube_1d", "gap_square_2d"}) {
            if (!ok(n)) {
                l = {false, std::string(n) + " did not run"};
                break;
            }
            const auto& r = result(a, n);
            const double rel = r.at("final_relative_gap").get<double>();
            const double order = r.at("worst_ordering").get<double>();
            const bool dec = r.at("gap_strictly_decreasing").get<bool>();
            l.pass = l.pass && dec && rel < gap_rel_tol && order <= 2.0 * newton_tol &&
                     r.at("gap_profile").size() == 4;
            l.detail += std::string(l.detail.empty() ? "" : ", ") + n + " rel gap " + num(rel) +
                        (dec ? " decreasing" : " not decreasing") + " ordering " + num(order);
        }
        report(7, "uniqueness gap", l, seconds(a, {"gap_cube_1d", "gap_square_2d"}), 600.0);
    }

    {
        Line l{false, "did not run"};
        if (ok("shifted_slab")) {
            const auto& r = result(a, "shifted_slab");
            std::set<int> passed;
            for (const auto& x : r.at("results"))
                if (x.at("passed").get<bool>()) passed.insert(x.at("steps").get<int>());
            l.pass = passed == std::set<int>{1, 2, 4};
            l.detail = "eps0 " + std::to_string(r.at("eps0_steps").get<int>()) + " steps, passing steps";
            for (int s : passed) l.detail += " " + std::to_string(s);
        }
        report(8, "shifted supersolution", l, seconds(a, {"shifted_slab"}), 120.0);
    }

    {
        Line l{false, "did not run"};
        if (ok("barrier_constant") && ok("barrier_distance") && ok("barrier_exp")) {
            const auto& c = result(a, "barrier_constant");
            const auto& d = result(a, "barrier_distance");
            const auto& e = result(a, "barrier_exp");
            l.pass = c.at("verdict") == "barrier_indicated" && d.at("verdict") == "barrier_indicated" &&
                     e.at("verdict") == "no_barrier_indicated" && e.at("growth").get<double>() > divergence_multiple;
            l.detail = "constant " + c.at("verdict").get<std::string>() + " (x" + num(c.at("growth").get<double>()) +
                       "), d " + d.at("verdict").get<std::string>() + " (x" + num(d.at("growth").get<double>()) +
                       "), exp " + e.at("verdict").get<std::string>() + " (x" + num(e.at("growth").get<double>()) + ")";
        }
        report(9, "barrier discrimination", l, seconds(a, {"barrier_constant", "barrier_distance", "barrier_exp"}),
               300.0);
    }

    {
        Line l{false, "did not run"};
        if (ok("gap_cube_1d") && result(a, "gap_cube_1d").contains("phi_gap")) {
            const auto& r = result(a, "gap_cube_1d").at("phi_gap");
            const auto ratios = r.at("ratios").get<std::vector<double>>();
            const double frac = ratios.back() / ratios.front();
            l.pass = ratios.size() == 4 && r.at("monotone_decreasing").get<bool>() && frac < phi_final_fraction;
            l.detail = "band ratios";
            for (double x : ratios) l.detail += " " + num(x);
            l.detail += ", final/first " + num(frac);
        }
        report(10, "phi gap", l, seconds(a, {"gap_cube_1d"}), 60.0);
    }

    {
        const auto b = run_suite(cfg, root / "tasks4", 4);
        std::size_t files = 0;
        std::size_t differing = 0;
        std::string first;
        const bool same_list = a.manifest.at("files") == b.manifest.at("files");
        for (const auto& f : a.manifest.at("files")) {
            const auto p = f.at("path").get<std::string>();
            ++files;
            if (slurp(root / "tasks1" / p) != slurp(root / "tasks4" / p)) {
                ++differing;
                if (first.empty()) first = p;
            }
        }
        double total = 0.0;
        for (const auto& [n, t] : b.seconds) total += t;
        report(11, "determinism",
               {same_list && differing == 0 && files > 0,
                std::to_string(files) + " artifacts compared across 1 and 4 tasks, " + std::to_string(differing) +
                    " differ" + (first.empty() ? "" : " (first " + first + ")")},
               total, INFINITY);
    }

    fs::remove_all(root);
    std::printf("%d unexpected failure(s)\n", failures);
    return failures == 0 ? 0 : 1;
}
