// specgap: batch front end for the spectral-gap projection toolkit.
//
// Exit codes: 0 all checks passed, 1 usage or config error, 2 a bound or
// tolerance check failed.

#include "specgap/specgap.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

using namespace specgap;
using io::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitAssert = 2;

constexpr const char* kRunFormat = "specgap-run/1";

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct AssertionFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Tolerances {
    double closed_form = 1e-10;
    double transport = kTransportTol;
    double unitary = kUnitaryTol;
    double path = kPathTol;
    double derivative = kDerivativeCrossCheckTol;
};

struct RunConfig {
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    unsigned jobs = 1;
    int steps = 200;
    std::string scheme = "magnus4";
    Tolerances tol;

    std::string epsilons;   // comma separated; empty string = empty list
    bool epsilons_set = false;
    std::string grid_sizes = "100,200,400,800";

    std::string instance;
    Index dim = 6;
    double ratio = 0.3;
    std::string layout = "mixed";

    std::string phase = "both";
    int trials = 1000;
    std::string dims = "4,8,16";
    std::string ratios = "0.1,0.3,0.388";
    std::string layouts = "mixed";
    int subordinated_trials = 1000;
    std::string search_dims = "4,6,8,12,16,20";
    double search_ratio = 0.45;
    int starts = 16;
    int iterations = 1000;
    bool records = true;
    std::string replay;

    std::string input;
};

// --- list parsing ----------------------------------------------------------

template <typename T>
std::vector<T> parse_list(const std::string& text, const std::string& what)
{
    std::vector<T> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        if (b == std::string::npos)
            throw UsageError(what + ": empty entry in list '" + text + "'");
        const auto e = item.find_last_not_of(" \t");
        item = item.substr(b, e - b + 1);
        std::istringstream is(item);
        T v{};
        if (!(is >> v) || !is.eof())
            throw UsageError(what + ": cannot parse '" + item + "'");
        out.push_back(v);
    }
    return out;
}

std::vector<explore::Layout> parse_layouts(const std::string& text)
{
    std::vector<explore::Layout> out;
    for (const auto& name : parse_list<std::string>(text, "layouts")) {
        try {
            out.push_back(explore::parse_layout(name));
        } catch (const PreconditionError& e) {
            throw UsageError(e.what());
        }
    }
    return out;
}

// --- config file -----------------------------------------------------------

template <typename T>
T config_value(const json& j, const char* key)
{
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ParseError(key, e.what());
    }
}

/// JSON number array or comma string, stored as a comma string.
std::string config_list(const json& j, const char* key)
{
    const auto& v = j.at(key);
    if (v.is_string())
        return v.get<std::string>();
    if (!v.is_array())
        throw ParseError(key, "expected an array");
    std::ostringstream os;
    os << std::setprecision(17);
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (!v[k].is_number() && !v[k].is_string())
            throw ParseError(std::string(key) + "[" + std::to_string(k) + "]", "expected a number or name");
        os << (k ? "," : "");
        if (v[k].is_string())
            os << v[k].get<std::string>();
        else
            os << v[k].get<double>();
    }
    return os.str();
}

void apply_config(RunConfig& cfg, const json& j)
{
    io::reject_unknown(j,
                       {"format", "out", "seed", "jobs", "steps", "scheme", "tol", "epsilons", "grid_sizes", "instance",
                        "dim", "ratio", "layout", "phase", "trials", "dims", "ratios", "layouts", "subordinated_trials",
                        "search_dims", "search_ratio", "starts", "iterations", "records", "replay", "input"},
                       "");
    if (j.contains("format") && j["format"] != kRunFormat)
        throw ParseError("format", std::string("expected \"") + kRunFormat + "\"");
    if (j.contains("out"))
        cfg.out_dir = config_value<std::string>(j, "out");
    if (j.contains("seed"))
        cfg.seed = config_value<std::uint64_t>(j, "seed");
    if (j.contains("jobs"))
        cfg.jobs = config_value<unsigned>(j, "jobs");
    if (j.contains("steps"))
        cfg.steps = config_value<int>(j, "steps");
    if (j.contains("scheme"))
        cfg.scheme = config_value<std::string>(j, "scheme");
    if (j.contains("tol")) {
        const auto& t = j["tol"];
        io::reject_unknown(t, {"closed_form", "transport", "unitary", "path", "derivative"}, "tol");
        auto get = [&](const char* k, double& dst) {
            if (t.contains(k))
                dst = io::real_from_json(t[k], std::string("tol.") + k);
        };
        get("closed_form", cfg.tol.closed_form);
        get("transport", cfg.tol.transport);
        get("unitary", cfg.tol.unitary);
        get("path", cfg.tol.path);
        get("derivative", cfg.tol.derivative);
    }
    if (j.contains("epsilons")) {
        cfg.epsilons = config_list(j, "epsilons");
        cfg.epsilons_set = true;
    }
    if (j.contains("grid_sizes"))
        cfg.grid_sizes = config_list(j, "grid_sizes");
    if (j.contains("instance"))
        cfg.instance = config_value<std::string>(j, "instance");
    if (j.contains("dim"))
        cfg.dim = config_value<Index>(j, "dim");
    if (j.contains("ratio"))
        cfg.ratio = config_value<double>(j, "ratio");
    if (j.contains("layout"))
        cfg.layout = config_value<std::string>(j, "layout");
    if (j.contains("phase"))
        cfg.phase = config_value<std::string>(j, "phase");
    if (j.contains("trials"))
        cfg.trials = config_value<int>(j, "trials");
    if (j.contains("dims"))
        cfg.dims = config_list(j, "dims");
    if (j.contains("ratios"))
        cfg.ratios = config_list(j, "ratios");
    if (j.contains("layouts"))
        cfg.layouts = config_list(j, "layouts");
    if (j.contains("subordinated_trials"))
        cfg.subordinated_trials = config_value<int>(j, "subordinated_trials");
    if (j.contains("search_dims"))
        cfg.search_dims = config_list(j, "search_dims");
    if (j.contains("search_ratio"))
        cfg.search_ratio = config_value<double>(j, "search_ratio");
    if (j.contains("starts"))
        cfg.starts = config_value<int>(j, "starts");
    if (j.contains("iterations"))
        cfg.iterations = config_value<int>(j, "iterations");
    if (j.contains("records"))
        cfg.records = config_value<bool>(j, "records");
    if (j.contains("replay"))
        cfg.replay = config_value<std::string>(j, "replay");
    if (j.contains("input"))
        cfg.input = config_value<std::string>(j, "input");
}

/// --config is read before the flags so that flags override file values.
std::optional<std::string> find_config_arg(int argc, char** argv)
{
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--config") {
            if (i + 1 >= argc)
                throw UsageError("--config requires a path");
            return std::string(argv[i + 1]);
        }
        if (a.rfind("--config=", 0) == 0)
            return a.substr(9);
    }
    return std::nullopt;
}

// --- output ----------------------------------------------------------------

std::filesystem::path out_dir(const RunConfig& cfg)
{
    std::filesystem::path p = cfg.out_dir.empty() ? std::filesystem::path(".") : std::filesystem::path(cfg.out_dir);
    std::filesystem::create_directories(p);
    return p;
}

void write_text(const std::filesystem::path& p, const std::string& text)
{
    std::ofstream f(p);
    if (!f)
        throw UsageError("cannot write " + p.string());
    f << text;
}

void write_json(const std::filesystem::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

json tolerances_json(const Tolerances& t)
{
    return {{"closed_form", t.closed_form}, {"transport", t.transport},   {"unitary", t.unitary},
            {"path", t.path},               {"derivative", t.derivative}, {"bound_slack", kBoundSlack}};
}

void echo_tolerances(const Tolerances& t)
{
    std::cout << "tolerances: closed_form=" << t.closed_form << " transport=" << t.transport
              << " unitary=" << t.unitary << " path=" << t.path << " derivative=" << t.derivative
              << " bound_slack=" << kBoundSlack << "\n";
}

unsigned effective_jobs(unsigned jobs)
{
    if (jobs != 0)
        return jobs;
    const unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : n;
}

// --- instances -------------------------------------------------------------

struct LoadedInstance {
    HermitianOperator a;
    HermitianOperator v;
    IntervalUnion sigma;
    std::optional<double> declared_gap;
    json source;
};

LoadedInstance load_or_generate(const RunConfig& cfg)
{
    if (!cfg.instance.empty()) {
        auto doc = io::load_instance(cfg.instance);
        return {doc.a, doc.v, doc.sigma, doc.declared_gap, {{"instance", cfg.instance}}};
    }
    const std::uint64_t seed = cfg.seed.value_or(1);
    explore::InstanceSpec spec;
    try {
        spec = explore::make_spec(cfg.dim, cfg.ratio, explore::parse_layout(cfg.layout), seed);
    } catch (const PreconditionError& e) {
        throw UsageError(e.what());
    }
    const auto inst = explore::random_instance(spec);
    return {inst.a, inst.v, spec.sigma_set(), spec.declared_gap, {{"spec", io::spec_to_json(spec)}}};
}

// --- subcommands -----------------------------------------------------------

int cmd_example2x2(const RunConfig& cfg)
{
    const auto eps_list =
        parse_list<double>(cfg.epsilons_set ? cfg.epsilons : std::string("0.01,0.1,0.25,0.5,0.7"), "--eps");
    if (eps_list.empty())
        throw UsageError("example2x2: the epsilon list is empty");
    for (double e : eps_list)
        if (!(e > 0.0 && e < 0.75))
            throw UsageError("example2x2: epsilon " + io::csv_real(e) + " outside (0, 3/4)");

    const auto dir = out_dir(cfg);
    std::ostringstream csv;
    csv << "epsilon,v_norm_closed,v_norm_numeric,pq_closed,pq_numeric,q_entry_error,max_error,regime,below_sqrt2_half\n";
    json rows = json::array();
    std::vector<std::string> failures;
    std::cout << std::setprecision(10);
    std::cout << "epsilon        |V| closed      |P-Q| closed    |P-Q| numeric   max error\n";
    for (double e : eps_list) {
        const auto r = models::example2x2(e);
        const bool below = r.pq_numeric < kSqrt2Half;
        csv << io::csv_real(e) << "," << io::csv_real(r.v_norm_closed) << "," << io::csv_real(r.v_norm_numeric) << ","
            << io::csv_real(r.pq_closed) << "," << io::csv_real(r.pq_numeric) << "," << io::csv_real(r.q_entry_error)
            << "," << io::csv_real(r.max_error()) << "," << to_string(r.regime) << "," << (below ? 1 : 0) << "\n";
        std::cout << std::left << std::setw(15) << e << std::setw(16) << r.v_norm_closed << std::setw(16)
                  << r.pq_closed << std::setw(16) << r.pq_numeric << r.max_error() << "\n";
        rows.push_back({{"epsilon", e},
                        {"v_norm_closed", r.v_norm_closed},
                        {"v_norm_numeric", r.v_norm_numeric},
                        {"pq_closed", r.pq_closed},
                        {"pq_numeric", r.pq_numeric},
                        {"max_error", r.max_error()},
                        {"regime", to_string(r.regime)}});
        if (r.max_error() > cfg.tol.closed_form)
            failures.push_back("epsilon " + io::csv_real(e) + ": closed form mismatch " + io::csv_real(r.max_error()));
        if (!below)
            failures.push_back("epsilon " + io::csv_real(e) + ": |P-Q| not below sqrt(2)/2");
    }
    write_text(dir / "example2x2.csv", csv.str());
    write_json(dir / "example2x2.json",
               {{"format", kRunFormat}, {"command", "example2x2"}, {"tolerances", tolerances_json(cfg.tol)},
                {"rows", rows}, {"failures", failures}});
    if (!failures.empty())
        throw AssertionFailure(failures.front());
    return kExitOk;
}

int cmd_bounds(const RunConfig& cfg)
{
    const auto inst = load_or_generate(cfg);
    const auto r = analyze_instance(inst.a, inst.v, inst.sigma, inst.declared_gap);
    const auto dir = out_dir(cfg);
    json doc = io::report_to_json(r);
    doc["source"] = inst.source;
    doc["tolerances"] = tolerances_json(cfg.tol);
    write_json(dir / "bounds_report.json", doc);
    if (cfg.instance.empty())
        write_json(dir / "instance.json", io::instance_to_json(inst.a, inst.v, inst.sigma, inst.declared_gap));

    std::cout << std::setprecision(10) << "d = " << r.d << "  |V| = " << r.v_norm << "  ratio = " << r.ratio()
              << "\nregime " << to_string(r.regime) << ", hull " << to_string(r.hull)
              << (r.ceiling_asserted() ? "" : " (no ceiling asserted)") << "\n|P-Q| = " << r.measured.difference
              << "  |PQperp| = " << r.measured.pq_perp << "  |PperpQ| = " << r.measured.p_perp_q << "\nrank P = "
              << r.rank_p << "  rank Q = " << r.rank_q << "  kernel dims (" << r.kernel.pq_perp_fixed << ", "
              << r.kernel.p_perp_q_fixed << ", " << r.kernel.index << ")\n";
    for (const auto& b : r.bounds) {
        if (!b.applicable)
            continue;
        std::cout << "  " << std::left << std::setw(20) << b.name << std::setw(16) << b.value
                  << (b.violated() ? "VIOLATED" : "ok") << "\n";
    }
    if (!r.violations.empty())
        throw AssertionFailure(r.violations.front());
    return kExitOk;
}

TransportScheme parse_scheme(const std::string& s)
{
    if (s == "magnus4")
        return TransportScheme::magnus4;
    if (s == "midpoint")
        return TransportScheme::midpoint;
    throw UsageError("unknown transport scheme '" + s + "' (expected magnus4 or midpoint)");
}

int cmd_transport(const RunConfig& cfg)
{
    if (cfg.steps < 1)
        throw UsageError("transport: --steps must be at least 1");
    TransportOptions opt;
    opt.scheme = parse_scheme(cfg.scheme);
    opt.transport_tol = cfg.tol.transport;
    opt.unit_tol = cfg.tol.unitary;
    opt.path_tol = cfg.tol.path;
    opt.throw_on_failure = false;

    const auto inst = load_or_generate(cfg);
    const ProjectorPath path(inst.a, inst.v, inst.sigma);

    TransportResult r;
    try {
        r = transport_unitary(path, cfg.steps, opt);
    } catch (const RankChangeError& e) {
        throw AssertionFailure(std::string("rank change along the path at s = ") + io::csv_real(e.s()) + ": " +
                               e.what());
    }
    double cross = 0.0;
    for (int k = 0; k <= 10; ++k) {
        const double s = k / 10.0;
        cross = std::max(cross, operator_norm(path.derivative(s, DerivativeMethod::spectral) -
                                              path.derivative(s, DerivativeMethod::contour)));
    }

    const auto dir = out_dir(cfg);
    std::ostringstream trace;
    trace << "step,s,generator_norm,path_residual,unitarity_defect\n";
    for (std::size_t k = 0; k < r.trace.size(); ++k) {
        const auto& t = r.trace[k];
        trace << k + 1 << "," << io::csv_real(t.s) << "," << io::csv_real(t.generator_norm) << ","
              << io::csv_real(t.path_residual) << "," << io::csv_real(t.unitarity_defect) << "\n";
    }
    write_text(dir / "transport_trace.csv", trace.str());
    write_json(dir / "transport.json", {{"format", kRunFormat},
                                        {"command", "transport"},
                                        {"source", inst.source},
                                        {"scheme", to_string(opt.scheme)},
                                        {"steps", r.steps},
                                        {"d", path.gap()},
                                        {"v_norm", path.v_norm()},
                                        {"rank", path.rank()},
                                        {"residual", r.residual},
                                        {"unitarity_defect", r.unitarity_defect},
                                        {"max_unitarity_defect", r.max_unitarity_defect},
                                        {"max_path_residual", r.max_path_residual},
                                        {"derivative_crosscheck", cross},
                                        {"tolerances", tolerances_json(cfg.tol)},
                                        {"W", io::matrix_to_json(r.w)}});

    std::cout << std::setprecision(6) << "scheme " << to_string(opt.scheme) << ", " << r.steps
              << " steps\n|Q - W P W*| = " << r.residual << "\nmax |W*W - I| = " << r.max_unitarity_defect
              << "\nmax path residual = " << r.max_path_residual << "\nspectral vs contour derivative = " << cross
              << "\n";
    if (!r.within(opt))
        throw AssertionFailure("transport missed a tolerance (residual " + io::csv_real(r.residual) +
                               ", unitarity " + io::csv_real(r.max_unitarity_defect) + ", path " +
                               io::csv_real(r.max_path_residual) + ")");
    if (cross > cfg.tol.derivative)
        throw AssertionFailure("spectral and contour derivatives disagree by " + io::csv_real(cross));
    return kExitOk;
}

int cmd_resonance(const RunConfig& cfg)
{
    const auto eps_list =
        parse_list<double>(cfg.epsilons_set ? cfg.epsilons : std::string("0.1,0.2,0.3,0.39,0.41,0.5"), "--eps");
    const auto grids = parse_list<int>(cfg.grid_sizes, "--grid");
    if (eps_list.empty())
        throw UsageError("resonance: the epsilon list is empty");
    if (grids.empty())
        throw UsageError("resonance: the grid size list is empty");
    for (double e : eps_list) {
        if (!(e > 0.0) || !std::isfinite(e))
            throw UsageError("resonance: epsilon must be positive, got " + io::csv_real(e));
        if (std::abs(e - models::kResonanceThreshold) < 1e-15)
            throw UsageError("resonance: epsilon = 2/5 is the degenerate threshold");
    }
    for (int n : grids)
        if (n < 2)
            throw UsageError("resonance: grid sizes must be at least 2");

    const auto dir = out_dir(cfg);
    std::ostringstream roots, norms, overlaps;
    roots << "epsilon,root_count,root,expected_root_count\n";
    norms << "epsilon,N,v_norm_discrete,v_norm_limit,v_norm_expansion,error\n";
    overlaps << "epsilon,N,max_overlap,decreasing\n";
    std::vector<std::string> failures;
    std::cout << std::setprecision(10);
    for (double e : eps_list) {
        const auto scan = models::eigenvalue_scan(e);
        const int expected = e > models::kResonanceThreshold ? 1 : 0;
        roots << io::csv_real(e) << "," << scan.root_count << ","
              << (scan.roots.empty() ? "" : io::csv_real(scan.roots.front())) << "," << expected << "\n";
        std::cout << "epsilon " << e << ": " << scan.root_count << " root(s)";
        if (!scan.roots.empty())
            std::cout << " at " << scan.roots.front();
        std::cout << "\n";
        if (scan.root_count != expected)
            failures.push_back("epsilon " + io::csv_real(e) + ": root count " + std::to_string(scan.root_count));

        const double limit = models::resonance_v_norm(e);
        for (int n : grids) {
            const auto [a, v] = models::resonance_operators(models::ResonanceModel(e, n));
            const double vn = v.norm();
            norms << io::csv_real(e) << "," << n << "," << io::csv_real(vn) << "," << io::csv_real(limit) << ","
                  << io::csv_real(models::resonance_v_norm_expansion(e)) << "," << io::csv_real(vn - limit) << "\n";
        }
        const auto xs = models::overlap_decay(e, grids);
        for (std::size_t k = 0; k < xs.size(); ++k)
            overlaps << io::csv_real(e) << "," << xs[k].grid_size << "," << io::csv_real(xs[k].max_overlap) << ","
                     << (k == 0 ? "" : (xs[k].max_overlap < xs[k - 1].max_overlap ? "1" : "0")) << "\n";
    }
    const double transition = models::locate_root_transition(0.3, 0.5, 1e-9);
    std::cout << "root count changes at epsilon = " << transition << "\n";
    write_text(dir / "resonance_roots.csv", roots.str());
    write_text(dir / "resonance_norm.csv", norms.str());
    write_text(dir / "resonance_overlap.csv", overlaps.str());
    write_json(dir / "resonance.json", {{"format", kRunFormat},
                                        {"command", "resonance"},
                                        {"epsilons", eps_list},
                                        {"grid_sizes", grids},
                                        {"transition", transition},
                                        {"tolerances", tolerances_json(cfg.tol)},
                                        {"failures", failures}});
    if (!failures.empty())
        throw AssertionFailure(failures.front());
    return kExitOk;
}

struct ScanPhase {
    explore::ScanConfig config;
    explore::ScanSummary summary;
};

void write_scan_outputs(const std::filesystem::path& dir, const std::vector<ScanPhase>& phases, bool records)
{
    std::ofstream jsonl;
    if (records)
        jsonl.open(dir / "trials.jsonl");
    std::ofstream sweep(dir / "sweep.csv");
    std::ofstream cells(dir / "scan.csv");
    sweep << "layout,ratio," << io::sweep_csv_header() << "\n";
    cells << "layout,dim,ratio,seed,trials,skipped,skip_reason,max_difference,max_seed,violations,rank_mismatches,"
             "nonzero_kernels\n";
    for (const auto& ph : phases) {
        for (const auto& c : ph.summary.cells) {
            cells << explore::to_string(c.cell.layout) << "," << c.cell.dim << "," << io::csv_real(c.cell.ratio)
                  << "," << c.cell.seed << "," << c.trials << "," << (c.skipped ? 1 : 0) << ",\"" << c.skip_reason
                  << "\"," << io::csv_real(c.max_difference) << "," << c.max_seed << "," << c.violations.size() << ","
                  << c.rank_mismatches << "," << c.nonzero_kernels << "\n";
            for (const auto& rec : c.records) {
                sweep << explore::to_string(c.cell.layout) << "," << io::csv_real(c.cell.ratio) << ","
                      << io::sweep_csv_row(rec.spec.seed, rec.report) << "\n";
                if (records)
                    jsonl << io::trial_to_json(rec).dump() << "\n";
            }
        }
    }
}

json scan_section(const std::vector<ScanPhase>& phases)
{
    json parts = json::array();
    for (const auto& ph : phases)
        parts.push_back(io::scan_manifest(ph.config, ph.summary));
    if (parts.size() == 1)
        return parts.front();
    // Several scans share one section; cells are concatenated in run order.
    json merged = parts.front();
    merged["master_seeds"] = json::array();
    for (const auto& p : parts) {
        merged["master_seeds"].push_back(p["master_seed"]);
        if (&p != &parts.front())
            for (const auto& c : p["cells"])
                merged["cells"].push_back(c);
    }
    merged.erase("master_seed");
    merged.erase("trials");
    return merged;
}

int replay_manifest(const RunConfig& cfg)
{
    const auto j = io::parse_text(io::read_file(cfg.replay), cfg.replay);
    const unsigned jobs = effective_jobs(cfg.jobs);
    std::vector<std::string> mismatches;

    const auto scan_cells = io::scan_cells_from_manifest(j);
    const json* scan_sec = j["kind"] == "run" ? (j.contains("scan") ? &j["scan"] : nullptr) : nullptr;
    if (j["kind"] == "scan")
        scan_sec = &j;
    for (std::size_t k = 0; k < scan_cells.size(); ++k) {
        const auto& m = scan_cells[k];
        const auto c = explore::run_cell(m.cell, m.trials, jobs, false);
        const auto& rec = (*scan_sec)["cells"][k];
        const bool same = rec.contains("max_difference") ? (!c.skipped && rec["max_difference"].get<double>() ==
                                                                                   c.max_difference)
                                                         : c.skipped;
        std::cout << "scan cell " << k << " (" << explore::to_string(m.cell.layout) << ", dim " << m.cell.dim
                  << ", ratio " << m.cell.ratio << "): " << (same ? "identical" : "MISMATCH") << "\n";
        if (!same)
            mismatches.push_back("scan cell " + std::to_string(k));
    }

    const auto search_cells = io::search_cells_from_manifest(j);
    const json* search_sec = j["kind"] == "run" ? (j.contains("search") ? &j["search"] : nullptr) : &j;
    for (std::size_t k = 0; k < search_cells.size(); ++k) {
        const auto r = explore::run_search_cell(search_cells[k], jobs);
        const auto& rec = (*search_sec)["cells"][k];
        const bool same = rec.contains("max_difference")
                              ? (!r.skipped && rec["max_difference"].get<double>() == r.max_difference)
                              : r.skipped;
        std::cout << std::setprecision(17) << "search cell " << k << " (dim " << search_cells[k].dim
                  << "): " << (same ? "identical" : "MISMATCH") << " " << r.max_difference << "\n";
        if (!same)
            mismatches.push_back("search cell " + std::to_string(k));
    }
    if (!mismatches.empty())
        throw AssertionFailure("replay differs from manifest in " + mismatches.front());
    std::cout << "replay identical: " << scan_cells.size() << " scan cells, " << search_cells.size()
              << " search cells\n";
    return kExitOk;
}

int cmd_search(const RunConfig& cfg)
{
    if (!cfg.replay.empty())
        return replay_manifest(cfg);
    if (cfg.phase != "both" && cfg.phase != "scan" && cfg.phase != "search")
        throw UsageError("search: --phase must be scan, search or both");
    if (cfg.trials < 1 || cfg.starts < 1 || cfg.iterations < 1 || cfg.subordinated_trials < 0)
        throw UsageError("search: trials, starts and iterations must be positive");
    const unsigned jobs = effective_jobs(cfg.jobs);
    const auto dir = out_dir(cfg);
    json manifest{{"format", io::kManifestFormat}, {"kind", "run"}, {"tolerances", tolerances_json(cfg.tol)}};
    std::vector<std::string> violations;

    if (cfg.phase != "search") {
        std::vector<ScanPhase> phases;
        ScanPhase generic;
        generic.config.trials = cfg.trials;
        generic.config.dims = parse_list<Index>(cfg.dims, "--dims");
        generic.config.ratios = parse_list<double>(cfg.ratios, "--ratios");
        generic.config.layouts = parse_layouts(cfg.layouts);
        if (cfg.seed)
            generic.config.master_seed = *cfg.seed;
        generic.config.jobs = jobs;
        generic.config.keep_records = true;
        for (double r : generic.config.ratios)
            if (!(r >= 0.0 && r < kGapRatio))
                throw UsageError("search: scan ratios must lie in [0, 1/2)");
        phases.push_back(generic);
        if (cfg.subordinated_trials > 0) {
            ScanPhase sub;
            sub.config.trials = cfg.subordinated_trials;
            sub.config.dims = {8};
            sub.config.ratios = {cfg.search_ratio};
            sub.config.layouts = {explore::Layout::subordinated};
            sub.config.master_seed = explore::derive_seed(generic.config.master_seed, 0x5ab0ULL);
            sub.config.jobs = jobs;
            sub.config.keep_records = true;
            phases.push_back(sub);
        }
        for (auto& ph : phases) {
            ph.summary = explore::bound_violation_scan(ph.config);
            for (const auto& c : ph.summary.cells) {
                std::cout << std::setprecision(8) << "scan " << explore::to_string(c.cell.layout) << " dim "
                          << c.cell.dim << " ratio " << c.cell.ratio << ": ";
                if (c.skipped) {
                    std::cout << "skipped (" << c.skip_reason << ")\n";
                    continue;
                }
                std::cout << c.trials << " trials, max |P-Q| " << c.max_difference << ", violations "
                          << c.violations.size() << "\n";
                for (const auto& v : c.violations)
                    violations.push_back("seed " + std::to_string(v.seed) + ": " + v.message);
            }
        }
        write_scan_outputs(dir, phases, cfg.records);
        manifest["scan"] = scan_section(phases);
    }

    if (cfg.phase != "scan") {
        explore::SearchConfig sc;
        sc.dims = parse_list<Index>(cfg.search_dims, "--search-dims");
        sc.ratio = cfg.search_ratio;
        sc.starts = cfg.starts;
        sc.iterations = cfg.iterations;
        if (cfg.seed)
            sc.master_seed = *cfg.seed;
        sc.jobs = jobs;
        std::vector<explore::SearchCellResult> results;
        std::ofstream best(dir / "search_best.jsonl");
        std::ofstream csv(dir / "search.csv");
        csv << "layout,dim,ratio,seed,starts,iterations,skipped,skip_reason,max_difference,best_start_seed\n";
        for (const auto& cell : explore::search_cells(sc)) {
            auto r = explore::run_search_cell(cell, jobs);
            csv << explore::to_string(cell.layout) << "," << cell.dim << "," << io::csv_real(cell.ratio) << ","
                << cell.seed << "," << cell.starts << "," << cell.iterations << "," << (r.skipped ? 1 : 0) << ",\""
                << r.skip_reason << "\"," << (r.skipped ? "" : io::csv_real(r.max_difference)) << ","
                << r.best_start_seed << "\n";
            std::cout << std::setprecision(10) << "search " << explore::to_string(cell.layout) << " dim " << cell.dim
                      << " ratio " << cell.ratio << ": ";
            if (r.skipped)
                std::cout << "skipped (" << r.skip_reason << ")\n";
            else
                std::cout << "max |P-Q| " << r.max_difference << "\n";
            for (const auto& b : r.bests) {
                best << io::trial_to_json(b).dump() << "\n";
                for (const auto& v : b.report.violations)
                    violations.push_back("seed " + std::to_string(b.spec.seed) + ": " + v);
            }
            results.push_back(std::move(r));
        }
        std::cout << "per-dimension maxima:";
        json maxima = json::object();
        for (const auto& [d, m] : explore::per_dimension_maxima(results)) {
            std::cout << " " << d << ":" << m;
            maxima[std::to_string(d)] = m;
        }
        std::cout << "\n";
        manifest["search"] = io::search_manifest(sc, results);
        manifest["search"]["per_dimension_maxima"] = maxima;
    }
    manifest["violations"] = violations;
    write_json(dir / "manifest.json", manifest);
    if (!violations.empty())
        throw AssertionFailure("bound violation, " + violations.front());
    return kExitOk;
}

int cmd_report(const RunConfig& cfg)
{
    if (cfg.input.empty())
        throw UsageError("report: an input trials file is required");
    std::ifstream f(cfg.input);
    if (!f)
        throw UsageError("report: cannot open " + cfg.input);

    struct Row {
        int count = 0;
        double max_difference = 0.0;
        int violations = 0;
        int flagged = 0;
    };
    std::map<std::string, Row> by_regime;
    std::string line;
    int lineno = 0;
    int total = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        const auto j = io::parse_text(line, cfg.input + ":" + std::to_string(lineno));
        const std::string where = cfg.input + ":" + std::to_string(lineno);
        if (!j.contains("format") || j["format"] != io::kTrialFormat)
            throw ParseError(where + " format", std::string("expected \"") + io::kTrialFormat + "\"");
        const auto& rep = io::require(j, "report", where);
        auto& row = by_regime[io::require(rep, "regime", where + " report").get<std::string>()];
        ++row.count;
        row.max_difference = std::max(row.max_difference, io::require(rep, "measured", where + " report")["difference"]
                                                               .get<double>());
        row.violations += static_cast<int>(io::require(rep, "violations", where + " report").size());
        row.flagged += j.value("violation_candidate", false) ? 1 : 0;
        ++total;
    }
    const auto dir = out_dir(cfg);
    std::ostringstream csv;
    csv << "regime,count,max_difference,violations,violation_candidates\n";
    std::cout << total << " trials\n" << std::setprecision(10);
    for (const auto& [regime, row] : by_regime) {
        csv << regime << "," << row.count << "," << io::csv_real(row.max_difference) << "," << row.violations << ","
            << row.flagged << "\n";
        std::cout << "  " << std::left << std::setw(14) << regime << std::setw(8) << row.count << "max |P-Q| "
                  << row.max_difference << "  violations " << row.violations << "\n";
    }
    write_text(dir / "report.csv", csv.str());
    for (const auto& [regime, row] : by_regime)
        if (row.violations > 0 || row.flagged > 0)
            throw AssertionFailure("report: " + regime + " trials contain violations");
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv)
{
    RunConfig cfg;
    if (const char* env = std::getenv("SPECGAP_OUT_DIR"))
        cfg.out_dir = env;

    CLI::App app{"Spectral projection perturbation toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::uint64_t seed = 0;
    app.add_option("--config", config_path, "JSON run configuration (flags override it)");
    auto* seed_opt = app.add_option("--seed", seed, "seed, or master seed for search");
    app.add_option("--out", cfg.out_dir, "output directory (default $SPECGAP_OUT_DIR or .)");
    app.add_option("--jobs", cfg.jobs, "worker threads, 0 = hardware concurrency");
    app.add_option("--tol.closed-form", cfg.tol.closed_form, "closed form vs numeric");
    app.add_option("--tol.transport", cfg.tol.transport, "|Q - W P W*|");
    app.add_option("--tol.unitary", cfg.tol.unitary, "|W*W - I|");
    app.add_option("--tol.path", cfg.tol.path, "|P(s) - X P X*| along the path");
    app.add_option("--tol.derivative", cfg.tol.derivative, "spectral vs contour derivative");

    auto* ex = app.add_subcommand("example2x2", "2x2 closed forms against the numeric pipeline");
    auto* ex_eps = ex->add_option("--eps", cfg.epsilons, "comma separated epsilons in (0, 3/4)")->expected(0, 1);

    auto* bd = app.add_subcommand("bounds", "bound report for one instance");
    auto* tr = app.add_subcommand("transport", "transport unitary W along A + sV");
    for (auto* sub : {bd, tr}) {
        sub->add_option("--instance", cfg.instance, "instance JSON file");
        sub->add_option("--dim", cfg.dim, "generated instance dimension");
        sub->add_option("--ratio", cfg.ratio, "generated |V|/d");
        sub->add_option("--layout", cfg.layout, "generated layout");
    }
    tr->add_option("--steps", cfg.steps, "integration steps");
    tr->add_option("--scheme", cfg.scheme, "magnus4 or midpoint");

    auto* rs = app.add_subcommand("resonance", "secular roots, |V_N| convergence and overlap decay");
    auto* rs_eps = rs->add_option("--eps", cfg.epsilons, "comma separated epsilons")->expected(0, 1);
    rs->add_option("--grid", cfg.grid_sizes, "comma separated grid sizes N");

    auto* se = app.add_subcommand("search", "bound violation scan and open-window search");
    se->add_option("--phase", cfg.phase, "scan, search or both");
    se->add_option("--trials", cfg.trials, "trials per scan cell");
    se->add_option("--dims", cfg.dims, "scan dimensions");
    se->add_option("--ratios", cfg.ratios, "scan ratios");
    se->add_option("--layouts", cfg.layouts, "scan layouts");
    se->add_option("--subordinated-trials", cfg.subordinated_trials, "subordinated trials at the search ratio");
    se->add_option("--search-dims", cfg.search_dims, "search dimensions");
    se->add_option("--search-ratio", cfg.search_ratio, "search ratio");
    se->add_option("--starts", cfg.starts, "search starts per cell");
    se->add_option("--iterations", cfg.iterations, "iterations per start");
    se->add_flag("!--no-records", cfg.records, "skip trials.jsonl");
    se->add_option("--replay", cfg.replay, "rerun the cells of a manifest and compare");

    auto* rp = app.add_subcommand("report", "summarize a trials JSONL file");
    rp->add_option("input", cfg.input, "trials.jsonl");

    try {
        if (const auto path = find_config_arg(argc, argv))
            apply_config(cfg, io::parse_text(io::read_file(*path), *path));
        app.parse(argc, argv);
        if (seed_opt->count() > 0)
            cfg.seed = seed;
        if (ex_eps->count() > 0 || rs_eps->count() > 0)
            cfg.epsilons_set = true;

        echo_tolerances(cfg.tol);
        if (ex->parsed())
            return cmd_example2x2(cfg);
        if (bd->parsed())
            return cmd_bounds(cfg);
        if (tr->parsed())
            return cmd_transport(cfg);
        if (rs->parsed())
            return cmd_resonance(cfg);
        if (se->parsed())
            return cmd_search(cfg);
        if (rp->parsed())
            return cmd_report(cfg);
        return kExitUsage;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ParseError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const PreconditionError& e) {
        std::cerr << "precondition: " << e.what() << "\n";
        return kExitUsage;
    } catch (const AssertionFailure& e) {
        std::cerr << "FAILED: " << e.what() << "\n";
        return kExitAssert;
    } catch (const BoundViolation& e) {
        std::cerr << "FAILED: " << e.what() << " (seed " << e.seed() << ")\n";
        return kExitAssert;
    } catch (const NumericalError& e) {
        std::cerr << "FAILED: " << e.what() << "\n";
        return kExitAssert;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitAssert;
    }
}
