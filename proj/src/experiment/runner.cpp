#include "blowup/experiment.hpp"

#include "blowup/error.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace blowup::experiment {

namespace fs = std::filesystem;

namespace {

constexpr const char* tool_name = "blowup_lab";
constexpr const char* tool_version = "0.1.0";

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw PreconditionError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& content) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw PreconditionError("cannot write " + p.string());
    out << content;
    if (!out) throw PreconditionError("write failed for " + p.string());
}

std::string timestamp() {
    std::time_t t = std::time(nullptr);
    if (const char* e = std::getenv("SOURCE_DATE_EPOCH"); e && *e) t = static_cast<std::time_t>(std::strtoll(e, nullptr, 10));
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void prepare_output(const fs::path& out) {
    if (!fs::exists(out)) {
        fs::create_directories(out);
        return;
    }
    if (!fs::is_directory(out)) throw PreconditionError(out.string() + " exists and is not a directory");
    if (fs::is_empty(out)) return;
    const auto manifest = out / "manifest.json";
    if (!fs::exists(manifest))
        throw PreconditionError("refusing to write into non-empty directory " + out.string() + " (no previous manifest)");
    const auto doc = json::parse(read_file(manifest));
    if (doc.value("tool", "") != tool_name)
        throw PreconditionError(manifest.string() + " was not written by " + tool_name);
    for (const auto& f : doc.at("files")) fs::remove(out / f.at("path").get<std::string>());
    fs::remove(manifest);
}

std::string headline(const PipelineOutcome& o) {
    if (o.status != "ok") return o.message;
    for (const char* key : {"verdict", "outcome", "all_passed", "converged"})
        if (o.verdict.contains(key)) return std::string(key) + "=" + (o.verdict[key].is_string() ? o.verdict[key].get<std::string>() : o.verdict[key].dump());
    return "";
}

} // namespace

RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
    if (cfg.pipelines.empty()) throw ConfigError("pipelines", "no pipelines to run");
    const int tasks = std::max(1, opts.tasks);
    prepare_output(opts.out);

    RunResult result;
    result.out = opts.out;
    const std::string started = timestamp();

    const std::size_t n = cfg.pipelines.size();
    std::vector<std::optional<PipelineOutcome>> done(n);
    result.seconds.assign(n, 0.0);
    std::mutex mu;
    std::condition_variable cv;
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            const auto t0 = std::chrono::steady_clock::now();
            auto o = run_pipeline(cfg.pipelines[i], cfg.seed);
            const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
            {
                std::lock_guard lock(mu);
                result.seconds[i] = dt.count();
                done[i] = std::move(o);
            }
            cv.notify_all();
        }
    };
    std::vector<std::jthread> pool;
    for (int t = 0; t < std::min<int>(tasks, static_cast<int>(n)); ++t) pool.emplace_back(worker);

    json pipelines = json::array();
    json files = json::array();
    std::string summary;
    auto record = [&](const Artifact& a) {
        write_file(opts.out / a.path, a.content);
        files.push_back({{"path", a.path}, {"bytes", a.content.size()}, {"hash", fnv1a_hex(a.content)}});
    };
    for (std::size_t i = 0; i < n; ++i) {
        PipelineOutcome o;
        {
            std::unique_lock lock(mu);
            cv.wait(lock, [&] { return done[i].has_value(); });
            o = std::move(*done[i]);
            done[i].reset();
        }
        for (const auto& a : o.artifacts) record(a);
        json entry = {{"name", o.name}, {"kind", o.kind}, {"status", o.status}};
        if (!o.message.empty()) entry["message"] = o.message;
        pipelines.push_back(entry);
        summary += o.name + " " + o.kind + " " + o.status;
        if (const auto h = headline(o); !h.empty()) summary += " " + h;
        summary += '\n';
        result.ok = result.ok && o.status == "ok";
    }
    pool.clear();
    record({"summary.txt", summary});

    result.manifest = {{"tool", tool_name},
                       {"version", tool_version},
                       {"name", cfg.name},
                       {"config_hash", cfg.hash},
                       {"seed", cfg.seed},
                       {"started", started},
                       {"finished", timestamp()},
                       {"ok", result.ok},
                       {"pipelines", pipelines},
                       {"files", files}};
    write_file(opts.out / "manifest.json", dump_json(result.manifest));
    return result;
}

fs::path resolve_output(const ExperimentConfig& cfg, const std::optional<std::string>& cli_out) {
    if (cli_out) return *cli_out;
    if (cfg.output) return *cfg.output;
    if (const char* root = std::getenv("BLOWUP_OUT_ROOT"); root && *root) return fs::path(root) / cfg.name;
    return fs::path("runs") / cfg.name;
}

namespace {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

Table parse_csv(const std::string& text) {
    Table t;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::istringstream ls(line);
        for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
        if (first) t.header = std::move(cells);
        else t.rows.push_back(std::move(cells));
        first = false;
    }
    return t;
}

std::optional<double> as_number(const std::string& s) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) return std::nullopt;
    return v;
}

struct Diff {
    std::size_t differences = 0;
    std::size_t compared = 0;
    double max_abs = 0.0;
    double max_rel = 0.0;
    json examples = json::array();
    std::vector<std::string> warnings;

    void value(const std::string& where, double a, double b, double tol) {
        ++compared;
        if (std::isnan(a) && std::isnan(b)) return;
        if (a == b) return;
        const double abs = std::abs(a - b);
        const double rel = abs / std::max({1.0, std::abs(a), std::abs(b)});
        max_abs = std::isfinite(abs) ? std::max(max_abs, abs) : max_abs;
        max_rel = std::isnan(rel) ? std::numeric_limits<double>::infinity() : std::max(max_rel, rel);
        if (std::isfinite(rel) && rel <= tol) return;
        mismatch(where, format_double(a), format_double(b), a != 0.0 ? b / a : std::numeric_limits<double>::quiet_NaN());
    }

    void text(const std::string& where, const std::string& a, const std::string& b) {
        ++compared;
        if (a != b) mismatch(where, a, b, std::numeric_limits<double>::quiet_NaN());
    }

    void mismatch(const std::string& where, const std::string& a, const std::string& b, double ratio) {
        ++differences;
        if (examples.size() < 10) examples.push_back({{"at", where}, {"a", a}, {"b", b}, {"ratio", ratio}});
    }
};

void cell(Diff& d, const std::string& where, const std::string& a, const std::string& b, double tol) {
    const auto x = as_number(a);
    const auto y = as_number(b);
    if (x && y) d.value(where, *x, *y, tol);
    else d.text(where, a, b);
}

void diff_csv(Diff& d, const std::string& a, const std::string& b, double tol) {
    const auto ta = parse_csv(a);
    const auto tb = parse_csv(b);
    if (ta.header != tb.header) {
        d.mismatch("header", "", "", std::numeric_limits<double>::quiet_NaN());
        return;
    }
    const auto col = [&](const std::string& name) -> std::optional<std::size_t> {
        const auto it = std::find(ta.header.begin(), ta.header.end(), name);
        if (it == ta.header.end()) return std::nullopt;
        return static_cast<std::size_t>(it - ta.header.begin());
    };
    if (ta.rows.size() == tb.rows.size()) {
        for (std::size_t r = 0; r < ta.rows.size(); ++r)
            for (std::size_t c = 0; c < ta.header.size() && c < ta.rows[r].size() && c < tb.rows[r].size(); ++c)
                cell(d, "row " + std::to_string(r + 1) + " " + ta.header[c], ta.rows[r][c], tb.rows[r][c], tol);
        return;
    }
    const auto cx = col("x");
    const auto cy = col("y");
    if (!cx) {
        d.mismatch("rows", std::to_string(ta.rows.size()), std::to_string(tb.rows.size()),
                   std::numeric_limits<double>::quiet_NaN());
        return;
    }
    const auto key = [&](const std::vector<std::string>& row) {
        return row[*cx] + "," + (cy ? row[*cy] : std::string("0"));
    };
    std::map<std::string, const std::vector<std::string>*> by;
    for (const auto& row : tb.rows) by[key(row)] = &row;
    std::size_t matched = 0;
    for (const auto& row : ta.rows) {
        const auto it = by.find(key(row));
        if (it == by.end()) continue;
        ++matched;
        for (std::size_t c = 0; c < ta.header.size(); ++c) {
            if (c == *cx || (cy && c == *cy) || ta.header[c] == "index") continue;
            cell(d, "(" + key(row) + ") " + ta.header[c], row[c], (*it->second)[c], tol);
        }
    }
    d.warnings.push_back("row counts differ (" + std::to_string(ta.rows.size()) + " vs " +
                         std::to_string(tb.rows.size()) + "); compared " + std::to_string(matched) +
                         " coordinate-matched rows");
}

void diff_json(Diff& d, const std::string& where, const json& a, const json& b, double tol) {
    if (a.is_number() && b.is_number()) {
        d.value(where, a.get<double>(), b.get<double>(), tol);
    } else if (a.is_object() && b.is_object()) {
        for (auto it = a.begin(); it != a.end(); ++it) {
            if (b.contains(it.key())) diff_json(d, where + "/" + it.key(), *it, b[it.key()], tol);
            else d.mismatch(where + "/" + it.key(), "present", "missing", std::numeric_limits<double>::quiet_NaN());
        }
        for (auto it = b.begin(); it != b.end(); ++it)
            if (!a.contains(it.key()))
                d.mismatch(where + "/" + it.key(), "missing", "present", std::numeric_limits<double>::quiet_NaN());
    } else if (a.is_array() && b.is_array() && a.size() == b.size()) {
        for (std::size_t i = 0; i < a.size(); ++i) diff_json(d, where + "/" + std::to_string(i), a[i], b[i], tol);
    } else {
        d.text(where, a.dump(), b.dump());
    }
}

fs::path manifest_path(const fs::path& p) { return fs::is_directory(p) ? p / "manifest.json" : p; }

} // namespace

CompareResult compare_manifests(const fs::path& a, const fs::path& b, double tol) {
    if (!(tol >= 0.0)) throw PreconditionError("tolerance must be nonnegative");
    const auto pa = manifest_path(a);
    const auto pb = manifest_path(b);
    const auto ma = json::parse(read_file(pa));
    const auto mb = json::parse(read_file(pb));
    const auto root_a = pa.parent_path();
    const auto root_b = pb.parent_path();

    CompareResult res;
    json warnings = json::array();
    json pipelines = json::array();

    std::map<std::string, json> status_b;
    for (const auto& p : mb.at("pipelines")) status_b[p.at("name").get<std::string>()] = p;
    std::map<std::string, std::string> files_b;
    for (const auto& f : mb.at("files")) files_b[f.at("path").get<std::string>()] = f.at("hash").get<std::string>();

    for (const auto& p : ma.at("pipelines")) {
        const auto name = p.at("name").get<std::string>();
        const auto it = status_b.find(name);
        if (it == status_b.end()) {
            warnings.push_back("pipeline " + name + " only in " + pa.string());
            continue;
        }
        json entry = {{"name", name}, {"status_a", p.at("status")}, {"status_b", it->second.at("status")}};
        std::size_t pipeline_diffs = 0;
        if (p.at("status") != it->second.at("status")) ++pipeline_diffs;
        json files = json::array();
        for (const auto& f : ma.at("files")) {
            const auto path = f.at("path").get<std::string>();
            if (path.rfind(name + "/", 0) != 0) continue;
            const auto fb = files_b.find(path);
            if (fb == files_b.end()) {
                warnings.push_back(path + " only in " + pa.string());
                continue;
            }
            Diff d;
            if (f.at("hash").get<std::string>() != fb->second) {
                const auto ta = read_file(root_a / path);
                const auto tb = read_file(root_b / path);
                if (path.ends_with(".json")) diff_json(d, "", json::parse(ta), json::parse(tb), tol);
                else if (path.ends_with(".csv")) diff_csv(d, ta, tb, tol);
                else d.text(path, ta, tb);
            }
            for (const auto& w : d.warnings) warnings.push_back(path + ": " + w);
            pipeline_diffs += d.differences;
            files.push_back({{"path", path},
                             {"identical", f.at("hash").get<std::string>() == fb->second},
                             {"differences", d.differences},
                             {"max_abs", d.max_abs},
                             {"max_rel", d.max_rel},
                             {"examples", d.examples}});
        }
        for (const auto& [path, hash] : files_b)
            if (path.rfind(name + "/", 0) == 0 &&
                std::none_of(ma.at("files").begin(), ma.at("files").end(),
                             [&](const json& f) { return f.at("path") == path; }))
                warnings.push_back(path + " only in " + pb.string());
        entry["differences"] = pipeline_diffs;
        entry["files"] = files;
        pipelines.push_back(entry);
        res.differences += pipeline_diffs;
        status_b.erase(it);
    }
    for (const auto& [name, p] : status_b) warnings.push_back("pipeline " + name + " only in " + pb.string());

    res.report = {{"a", pa.string()},
                  {"b", pb.string()},
                  {"tol", tol},
                  {"differences", res.differences},
                  {"pipelines", pipelines},
                  {"warnings", warnings}};
    return res;
}

} // namespace blowup::experiment
