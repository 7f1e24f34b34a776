// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "specgap/io.hpp"
#include "specgap/models.hpp"
#include "specgap/transport.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

using namespace specgap;

namespace {

unsigned hardware_jobs()
{
    const unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : n;
}

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what)
    {
        if (!ok) {
            if (pass)
                detail << " first failure: " << what << ";";
            pass = false;
        }
    }
};

// Rank and kernel tallies shared by criteria 3, 4 and 5.
struct FredholmTally {
    long instances = 0;
    long rank_mismatches = 0;
    long nonzero_kernels = 0;
};

FredholmTally g_fredholm;

bool run(int id, double limit_s, const std::function<void(Outcome&)>& body)
{
    Outcome o;
    o.detail << std::setprecision(10);
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(o);
    } catch (const std::exception& e) {
        o.pass = false;
        o.detail << " exception: " << e.what() << ";";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (limit_s > 0 && secs > limit_s) {
        o.pass = false;
        o.detail << " runtime " << secs << " s over limit " << limit_s << " s;";
    }
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << " (" << std::fixed
              << std::setprecision(2) << secs << " s)" << o.detail.str() << std::endl;
    return o.pass;
}

void criterion1(Outcome& o)
{
    double worst = 0.0;
    double top = 0.0;
    for (double eps : {0.01, 0.1, 0.25, 0.5, 0.7}) {
        const auto r = models::example2x2(eps);
        const double err = std::max(std::abs(r.v_norm_numeric - r.v_norm_closed), std::abs(r.pq_numeric - r.pq_closed));
        worst = std::max(worst, err);
        top = std::max(top, r.pq_numeric);
        o.require(err <= 1e-10, "closed form mismatch at eps " + std::to_string(eps));
        o.require(r.pq_numeric < kSqrt2Half, "|P-Q| not below sqrt2/2 at eps " + std::to_string(eps));
    }
    o.detail << " max closed-form error " << worst << ", max |P-Q| " << top;
}

void criterion2(Outcome& o)
{
    double prev = std::numeric_limits<double>::infinity();
    for (double eps : {1e-2, 1e-4, 1e-6}) {
        const double gap = kSqrt2Half - models::example2x2(eps).pq_numeric;
        const double ratio = gap / std::sqrt(eps / 2.0);
        o.require(gap > 0.0, "gap not positive");
        o.require(gap < prev, "gap not decreasing");
        o.require(ratio > 0.5 && ratio < 2.0, "gap outside factor 2 of series");
        o.detail << " eps " << eps << ": gap " << gap << " (x" << ratio << " series);";
        prev = gap;
    }
    o.require(prev < 2e-3, "gap at 1e-6 not below 2e-3");
}

void tally(const explore::ScanSummary& s)
{
    for (const auto& c : s.cells) {
        g_fredholm.instances += c.trials;
        g_fredholm.rank_mismatches += c.rank_mismatches;
        g_fredholm.nonzero_kernels += c.nonzero_kernels;
    }
}

void criterion3(Outcome& o)
{
    explore::ScanConfig cfg;
    cfg.trials = 1000;
    cfg.dims = {4, 8, 16};
    cfg.ratios = {0.1, 0.3, 0.388};
    cfg.layouts = {explore::Layout::mixed};
    cfg.master_seed = 20240101;
    cfg.jobs = hardware_jobs();
    const auto s = explore::bound_violation_scan(cfg);
    tally(s);
    double top = 0.0;
    for (const auto& c : s.cells) {
        o.require(!c.skipped, "cell skipped");
        o.require(c.trials == 1000, "cell trial count");
        top = std::max(top, c.max_difference);
    }
    o.require(s.total_violations() == 0, "bound violations in generic cells");

    explore::ScanConfig sub;
    sub.trials = 1000;
    sub.dims = {8};
    sub.ratios = {0.45};
    sub.layouts = {explore::Layout::subordinated};
    sub.master_seed = 20240103;
    sub.jobs = cfg.jobs;
    const auto ss = explore::bound_violation_scan(sub);
    tally(ss);
    double sub_top = 0.0;
    for (const auto& c : ss.cells) {
        o.require(c.trials == 1000, "subordinated trial count");
        sub_top = std::max(sub_top, c.max_difference);
        for (const auto& [regime, n] : c.regime_counts)
            o.require(regime == "subordinated", "non-subordinated instance in subordinated cell");
    }
    o.require(ss.total_violations() == 0, "sqrt2/2 ceiling violations");
    o.require(sub_top < kSqrt2Half, "subordinated maximum reaches sqrt2/2");
    o.detail << " " << s.total_trials() << " generic trials, 0 violations required, got " << s.total_violations()
             << ", max |P-Q| " << top << "; " << ss.total_trials() << " subordinated at 0.45, violations "
             << ss.total_violations() << ", max |P-Q| " << sub_top;
}

void criterion4(Outcome& o)
{
    double worst_res = 0.0;
    double worst_unit = 0.0;
    double worst_cross = 0.0;
    for (int t = 0; t < 100; ++t) {
        const Index dim = 2 + t % 19;
        const double ratio = 0.4 * (t + 1) / 100.0;
        const auto spec = explore::make_spec(dim, ratio, explore::Layout::mixed, explore::derive_seed(20240104, t));
        const auto inst = explore::random_instance(spec);
        const auto sigma = spec.sigma_set();
        const ProjectorPath path(inst.a, inst.v, sigma);
        TransportOptions opt;
        opt.throw_on_failure = false;
        const auto r = transport_unitary(path, 200, opt);
        worst_res = std::max(worst_res, r.residual);
        worst_unit = std::max(worst_unit, r.max_unitarity_defect);
        for (int k = 0; k <= 10; ++k) {
            const double s = k / 10.0;
            worst_cross = std::max(worst_cross, operator_norm(path.derivative(s, DerivativeMethod::spectral) -
                                                              path.derivative(s, DerivativeMethod::contour)));
        }
        const auto rep = analyze_instance(inst.a, inst.v, sigma);
        ++g_fredholm.instances;
        if (rep.rank_p != rep.rank_q)
            ++g_fredholm.rank_mismatches;
        if (!(rep.kernel == KernelDims{}))
            ++g_fredholm.nonzero_kernels;
    }
    o.require(worst_res <= 1e-6, "transport residual above 1e-6");
    o.require(worst_unit <= 1e-8, "unitarity defect above 1e-8");
    o.require(worst_cross <= 1e-6, "derivative cross-check above 1e-6");
    o.detail << " 100 instances: max residual " << worst_res << ", max |W*W-I| " << worst_unit
             << ", max derivative disagreement " << worst_cross;
}

void criterion5(Outcome& o)
{
    o.require(g_fredholm.instances >= 10000 + 100, "instances from criteria 3-4 missing");
    o.require(g_fredholm.rank_mismatches == 0, "rank P != rank Q");
    o.require(g_fredholm.nonzero_kernels == 0, "nonzero kernel dimensions");
    o.detail << " " << g_fredholm.instances << " instances: rank mismatches " << g_fredholm.rank_mismatches
             << ", nonzero kernel triples " << g_fredholm.nonzero_kernels;
}

void criterion6(Outcome& o)
{
    for (double eps : {0.1, 0.2, 0.3, 0.39})
        o.require(models::eigenvalue_scan(eps).root_count == 0, "root found below 2/5 at " + std::to_string(eps));
    for (double eps : {0.41, 0.5})
        o.require(models::eigenvalue_scan(eps).root_count == 1, "no root above 2/5 at " + std::to_string(eps));
    const double transition = models::locate_root_transition(0.3, 0.5, 1e-9);
    o.require(std::abs(transition - 0.4) <= 1e-6, "transition not within 1e-6 of 2/5");

    const auto [a, v] = models::resonance_operators(models::ResonanceModel(0.3, 1000));
    const double norm_err = std::abs(v.norm() - models::resonance_v_norm(0.3));
    o.require(norm_err <= 1e-3, "|V_N| at N=1000 not within 1e-3");

    // O(ε²): the remainder over ε² stays bounded as ε shrinks.
    double worst_coeff = 0.0;
    for (double eps : {1e-3, 1e-4, 1e-5}) {
        const double rem = std::abs(models::resonance_v_norm(eps) - models::resonance_v_norm_expansion(eps));
        worst_coeff = std::max(worst_coeff, rem / (eps * eps));
    }
    o.require(worst_coeff <= 2.0, "expansion remainder not O(eps^2)");
    o.detail << " transition " << transition << ", |V_N| error at N=1000 " << norm_err
             << ", expansion remainder/eps^2 <= " << worst_coeff;
}

void criterion7(Outcome& o)
{
    const auto xs = models::overlap_decay(0.3, {100, 200, 400, 800});
    o.require(models::strictly_decreasing(xs), "overlap not strictly decreasing");
    for (const auto& x : xs)
        o.detail << " N=" << x.grid_size << ": " << x.max_overlap << ";";
    const auto [a, v] = models::resonance_operators(models::ResonanceModel(0.3, 400));
    const auto rec = explore::overcritical_probe(a, v, IntervalUnion::point(-1.0));
    o.require(rec.scan.min_difference > 0.95, "window minimum not above 0.95");
    o.detail << " min window |P-E(D)| at N=400 " << rec.scan.min_difference;
}

void criterion8(Outcome& o)
{
    explore::SearchConfig cfg;
    cfg.jobs = hardware_jobs();
    const auto cells = explore::search_cells(cfg);
    std::vector<explore::SearchCellResult> first;
    for (const auto& c : cells)
        first.push_back(explore::run_search_cell(c, cfg.jobs));
    const auto manifest = io::search_manifest(cfg, first);

    const auto replay_cells = io::search_cells_from_manifest(io::parse_text(manifest.dump(2), "manifest"));
    o.require(replay_cells.size() == first.size(), "manifest cell count");
    bool identical = replay_cells.size() == first.size();
    for (std::size_t k = 0; identical && k < replay_cells.size(); ++k) {
        const auto again = explore::run_search_cell(replay_cells[k], cfg.jobs);
        identical = again.max_difference == first[k].max_difference && again.bests.size() == first[k].bests.size();
        for (std::size_t j = 0; identical && j < again.bests.size(); ++j)
            identical = again.bests[j].report.measured.difference == first[k].bests[j].report.measured.difference &&
                        again.bests[j].spec.seed == first[k].bests[j].spec.seed;
    }
    o.require(identical, "replay from manifest not bit-identical");
    for (const auto& r : first)
        o.require(!r.skipped && r.max_difference > 0.0, "search cell did not run");
    o.detail << " maxima by dimension (interleaved, ratio 0.45):";
    for (const auto& [dim, m] : explore::per_dimension_maxima(first))
        o.detail << " " << dim << "->" << m;
    o.detail << "; replay identical";
}

}  // namespace

int main()
{
    std::cout << "jobs: " << hardware_jobs() << std::endl;
    bool ok = true;
    ok &= run(1, 1.0, criterion1);
    ok &= run(2, 1.0, criterion2);
    ok &= run(3, 120.0, criterion3);
    ok &= run(4, 120.0, criterion4);
    ok &= run(5, 0.0, criterion5);
    ok &= run(6, 30.0, criterion6);
    ok &= run(7, 60.0, criterion7);
    ok &= run(8, 300.0, criterion8);
    std::cout << (ok ? "all criteria passed" : "some criteria FAILED") << std::endl;
    return ok ? 0 : 1;
}
